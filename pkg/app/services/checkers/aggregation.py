"""Checkers for sum, count, average, minimum/maximum and median aggregation."""

import logging
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from app.schemas.checkers import RejectReason, SumCheckConfig, Verdict, residue_width
from app.schemas.dataops import AverageEntry, KeyValue, MedianEntry, MedianPivot, MinCertificateEntry
from app.schemas.hashing import HashSpec
from app.services.checkers.common import reject_here, settle
from app.services.checkers.integrity import DEFAULT_REPLICA_HASH, encode_replica, replica_consistency
from app.services.simnet import Communicator
from app.utils.hashing import as_words, bucket_matrix
from app.utils.rng import MODULUS_STREAM, make_rng

logger = logging.getLogger(__name__)

VERDICT_BITS = 64
_U64_MAX = 2**64 - 1


def draw_moduli(config: SumCheckConfig) -> np.ndarray:
    """One modulus per iteration, uniform in (rhat, 2 rhat]."""
    rng = make_rng(config.modulus_seed, MODULUS_STREAM)
    return rng.integers(config.rhat + 1, 2 * config.rhat, size=config.iterations, dtype=np.uint64, endpoint=True)


def _as_values(values: Sequence[int]):
    try:
        return np.asarray(values, dtype=np.int64)
    except OverflowError:
        return list(values)


def _residues(values, r: int) -> np.ndarray:
    if isinstance(values, np.ndarray):
        return np.mod(values, np.int64(r)).astype(np.uint64)
    return np.fromiter((v % r for v in values), dtype=np.uint64, count=len(values))


def _accumulate(d: int, buckets: np.ndarray, residues: np.ndarray, r: int) -> np.ndarray:
    table = np.zeros(d, dtype=np.uint64)
    # table entries stay below r between chunks, so a chunk cannot overflow 64 bits
    chunk = max(1, _U64_MAX // r - 1)
    for start in range(0, residues.size, chunk):
        np.add.at(table, buckets[start : start + chunk], residues[start : start + chunk])
        table %= np.uint64(r)
    return table


def condensed_table(keys: Sequence[int], values: Sequence[int], d: int, r: int, spec: HashSpec) -> np.ndarray:
    """Local phase of the condensed reduction: t[h(k)] += v mod r."""
    buckets = bucket_matrix(as_words(keys), spec, d, 1)[0]
    return _accumulate(d, buckets, _residues(_as_values(values), r), r)


def local_tables(
    keys: Sequence[int], components: Sequence[Sequence[int]], config: SumCheckConfig, moduli: np.ndarray
) -> np.ndarray:
    """Bucket tables of every iteration and value component, shape (iterations, components, d)."""
    buckets = bucket_matrix(as_words(keys), config.hash, config.d, config.iterations)
    values = [_as_values(c) for c in components]
    tables = np.zeros((config.iterations, len(components), config.d), dtype=np.uint64)
    for j, r in enumerate(moduli.tolist()):
        for c, vals in enumerate(values):
            tables[j, c] = _accumulate(config.d, buckets[j], _residues(vals, r), r)
    return tables


async def condensed_reduce(
    comm: Communicator, pairs: Sequence[KeyValue], d: int, r: int, spec: HashSpec, rhat: Optional[int] = None
) -> Optional[np.ndarray]:
    """d-bucket mod-r reduction of the pairs, tree-reduced to PE 0.

    Entries travel at the width of the modulus range (rhat, 2 rhat]; without rhat the
    narrowest range holding r is assumed.
    """
    table = condensed_table([k for k, _ in pairs], [v for _, v in pairs], d, r, spec)
    width = residue_width((r + 1) // 2 if rhat is None else rhat)
    return await comm.reduce(table, lambda a, b: (a + b) % np.uint64(r), bits=d * width)


async def _compare_tables(
    comm: Communicator,
    in_keys: Sequence[int],
    in_components: Sequence[Sequence[int]],
    out_keys: Sequence[int],
    out_components: Sequence[Sequence[int]],
    config: SumCheckConfig,
) -> Verdict:
    # all iterations travel in one reduction of (input - output) tables
    moduli = draw_moduli(config)
    r = moduli[:, None, None]
    diff = (local_tables(in_keys, in_components, config, moduli) + r - local_tables(out_keys, out_components, config, moduli)) % r
    total = await comm.reduce(diff, lambda a, b: (a + b) % r, bits=config.payload_bits * len(in_components))
    code = None
    if comm.rank == 0:
        bad = np.argwhere(total != 0)
        code = (-1, -1) if bad.size == 0 else (int(bad[0][0]), int(bad[0][2]))
    iteration, bucket = await comm.broadcast(code, bits=VERDICT_BITS)
    if iteration < 0:
        return Verdict.accept()
    return Verdict.reject(RejectReason.TABLE_MISMATCH, pe=0, iteration=iteration, bucket=bucket + 1)


async def check_sum_agg(
    comm: Communicator, pairs: Sequence[KeyValue], output: Sequence[KeyValue], config: SumCheckConfig
) -> Verdict:
    """Probabilistic check that `output` holds the per-key sums of `pairs`; both arbitrarily distributed."""
    return await _compare_tables(
        comm,
        [k for k, _ in pairs],
        [[v for _, v in pairs]],
        [k for k, _ in output],
        [[v for _, v in output]],
        config,
    )


async def check_count_agg(
    comm: Communicator, pairs: Sequence[KeyValue], counts: Sequence[KeyValue], config: SumCheckConfig
) -> Verdict:
    return await _compare_tables(
        comm,
        [k for k, _ in pairs],
        [[1] * len(pairs)],
        [k for k, _ in counts],
        [[c for _, c in counts]],
        config,
    )


async def check_average(
    comm: Communicator, pairs: Sequence[KeyValue], averages: Sequence[AverageEntry], config: SumCheckConfig
) -> Verdict:
    """Rebuild per-key sums from average*count, then sum-check (value, 1) against (sum, count)."""
    sums: List[int] = []
    detail = None
    for entry in averages:
        total = entry.average * entry.count
        if total.denominator != 1:
            detail = reject_here(comm, RejectReason.NON_INTEGRAL_SUM)
            break
        sums.append(total.numerator)
    verdict = await settle(comm, detail)
    if not verdict:
        return verdict
    return await _compare_tables(
        comm,
        [k for k, _ in pairs],
        [[v for _, v in pairs], [1] * len(pairs)],
        [e.key for e in averages],
        [sums, [e.count for e in averages]],
        config,
    )


async def _check_extremum(
    comm: Communicator,
    pairs: Sequence[KeyValue],
    asserted: Sequence[KeyValue],
    certificate: Sequence[MinCertificateEntry],
    sign: int,
    replica_hash: HashSpec,
) -> Verdict:
    verdict = await replica_consistency(comm, encode_replica((list(asserted), list(certificate))), replica_hash)
    if not verdict:
        return verdict
    beyond = RejectReason.BELOW_MINIMUM if sign > 0 else RejectReason.ABOVE_MAXIMUM
    extremes = dict(asserted)
    detail = None
    for key, value in pairs:
        if key not in extremes:
            detail = reject_here(comm, RejectReason.MISSING_KEY)
            break
        if sign * value < sign * extremes[key]:
            detail = reject_here(comm, beyond)
            break
    if detail is None:
        covered = [e.key for e in certificate]
        if len(set(covered)) != len(covered) or set(covered) != set(extremes):
            detail = reject_here(comm, RejectReason.UNCOVERED_KEY)
    if detail is None:
        held = set(pairs)
        for entry in certificate:
            if entry.value != extremes[entry.key]:
                detail = reject_here(comm, RejectReason.CERTIFICATE_MISMATCH)
                break
            if not 0 <= entry.owner_pe < comm.p:
                detail = reject_here(comm, RejectReason.PHANTOM_CERTIFICATE)
                break
            if entry.owner_pe == comm.rank and (entry.key, entry.value) not in held:
                detail = reject_here(comm, RejectReason.PHANTOM_CERTIFICATE)
                break
    return await settle(comm, detail)


async def check_min(
    comm: Communicator,
    pairs: Sequence[KeyValue],
    minima: Sequence[KeyValue],
    certificate: Sequence[MinCertificateEntry],
    replica_hash: HashSpec = DEFAULT_REPLICA_HASH,
) -> Verdict:
    """Deterministic minimum check against replicated minima and owner certificate."""
    return await _check_extremum(comm, pairs, minima, certificate, 1, replica_hash)


async def check_max(
    comm: Communicator,
    pairs: Sequence[KeyValue],
    maxima: Sequence[KeyValue],
    certificate: Sequence[MinCertificateEntry],
    replica_hash: HashSpec = DEFAULT_REPLICA_HASH,
) -> Verdict:
    return await _check_extremum(comm, pairs, maxima, certificate, -1, replica_hash)


async def check_min_bitvector(
    comm: Communicator,
    pairs: Sequence[KeyValue],
    minima: Sequence[KeyValue],
    replica_hash: HashSpec = DEFAULT_REPLICA_HASH,
) -> Verdict:
    """Minimum check without certificate: a k-bit OR marks which asserted minima some PE holds."""
    verdict = await replica_consistency(comm, encode_replica(list(minima)), replica_hash)
    if not verdict:
        return verdict
    position = {key: i for i, (key, _) in enumerate(minima)}
    extremes = dict(minima)
    detail = None
    present = 0
    for key, value in pairs:
        if key not in extremes:
            detail = reject_here(comm, RejectReason.MISSING_KEY)
            break
        if value < extremes[key]:
            detail = reject_here(comm, RejectReason.BELOW_MINIMUM)
            break
        if value == extremes[key]:
            present |= 1 << position[key]
    covered = await comm.all_reduce(present, lambda a, b: a | b, bits=len(minima))
    if detail is None and comm.rank == 0 and covered != (1 << len(minima)) - 1:
        missing = next(i for i in range(len(minima)) if not covered >> i & 1)
        detail = reject_here(comm, RejectReason.UNCOVERED_KEY, bucket=missing)
    return await settle(comm, detail)


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _rank_sign(value: int, index: int, pivot: MedianPivot) -> int:
    mine, other = (value, index), tuple(pivot)
    return (mine > other) - (mine < other)


def _certificate_defect(
    entry: MedianEntry, pairs: Sequence[KeyValue], offset: int, end: int, last: bool, distinct: bool
) -> Optional[RejectReason]:
    """What this PE can refute of one median entry from its own slice, if anything."""
    lower, upper = entry.lower, entry.upper
    if lower is None or upper is None:
        return None if distinct and lower is None and upper is None else RejectReason.CERTIFICATE_MISMATCH
    if (lower.value, lower.index) > (upper.value, upper.index) or Fraction(lower.value + upper.value, 2) != entry.median:
        return RejectReason.CERTIFICATE_MISMATCH
    if lower.index == upper.index and lower.value != upper.value:
        return RejectReason.CERTIFICATE_MISMATCH
    for pivot in (lower, upper):
        if pivot.index < 0 or (last and pivot.index >= end):
            return RejectReason.PHANTOM_CERTIFICATE
        if offset <= pivot.index < end and tuple(pairs[pivot.index - offset]) != (entry.key, pivot.value):
            return RejectReason.PHANTOM_CERTIFICATE
    return None


def _odd_group(entry: MedianEntry) -> bool:
    return entry.lower is None or entry.lower.index == entry.upper.index


async def check_median(
    comm: Communicator,
    pairs: Sequence[KeyValue],
    assertion: Sequence[MedianEntry],
    config: SumCheckConfig,
    replica_hash: HashSpec = DEFAULT_REPLICA_HASH,
    distinct: bool = False,
) -> Verdict:
    """Rank check of replicated medians against their pivot certificate.

    Elements compare to the lower and upper pivot by (value, global index): smaller -1,
    larger +1, the pivot itself 0. Per key the two balances are 0, 0 for an odd group
    and +1, -1 for an even one, which holds only if the pivots sit at the middle ranks.
    The PE holding a pivot's global index verifies the element exists.

    distinct=True admits entries without a certificate when the caller knows the values
    of each key are distinct; they count equal elements as 0 and expect a zero balance.
    """
    verdict = await replica_consistency(comm, encode_replica(list(assertion)), replica_hash)
    if not verdict:
        return verdict
    offset = await comm.exclusive_prefix_sum(len(pairs))
    end = offset + len(pairs)
    last = comm.rank == comm.p - 1
    detail = None
    for entry in assertion:
        reason = _certificate_defect(entry, pairs, offset, end, last, distinct)
        if reason is not None:
            detail = reject_here(comm, reason)
            break
    medians = {e.key: e for e in assertion}
    to_lower: List[int] = []
    to_upper: List[int] = []
    for index, (key, value) in enumerate(pairs if detail is None else (), start=offset):
        entry = medians.get(key)
        if entry is None:
            detail = reject_here(comm, RejectReason.MISSING_KEY)
            break
        if entry.lower is None:
            to_lower.append(_sign(value - entry.median))
            to_upper.append(0)
        else:
            to_lower.append(_rank_sign(value, index, entry.lower))
            to_upper.append(_rank_sign(value, index, entry.upper))
    verdict = await settle(comm, detail)
    if not verdict:
        return verdict
    # the replicated assertion enters the output side once, spread round-robin
    mine = [e for i, e in enumerate(assertion) if i % comm.p == comm.rank]
    return await _compare_tables(
        comm,
        [k for k, _ in pairs],
        [to_lower, to_upper],
        [e.key for e in mine],
        [[0 if _odd_group(e) else 1 for e in mine], [0 if _odd_group(e) else -1 for e in mine]],
        config,
    )
