"""Multiset-equality checkers and the checkers built on them: sort, zip, union, merge."""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from app.exceptions import ContractViolation
from app.schemas.checkers import PermCheckConfig, PermCheckMethod, RejectReason, Verdict
from app.schemas.dataops import WORD_BITS
from app.services.checkers.common import boundary_ok, first_disorder, reject_here, settle
from app.services.simnet import Communicator
from app.utils.hashing import as_words, derive_spec, get_hash
from app.utils.primes import choose_modulus
from app.utils.rng import POLY_STREAM, make_rng

logger = logging.getLogger(__name__)


def _mask(bits: int) -> np.uint64:
    return np.uint64((1 << bits) - 1)


def hash_sums(words, config: PermCheckConfig) -> np.ndarray:
    """Per-iteration sum of the low `bits` hash bits, mod 2^bits."""
    words = as_words(words)
    mask = _mask(config.bits)
    out = np.zeros(config.iterations, dtype=np.uint64)
    for j in range(config.iterations):
        hashed = get_hash(derive_spec(config.hash, j)).many(words) & mask
        out[j] = hashed.sum(dtype=np.uint64) & mask
    return out


async def _first_nonzero_mod(comm: Communicator, local: np.ndarray, bits: int) -> Optional[int]:
    """All-reduce the vector mod 2^bits; index of the first nonzero entry, or None."""
    mask = _mask(bits)
    total = await comm.all_reduce(local & mask, lambda a, b: (a + b) & mask, bits=local.size * bits)
    nonzero = np.flatnonzero(total)
    return int(nonzero[0]) if nonzero.size else None


async def check_permutation_hash(comm: Communicator, elements, output, config: PermCheckConfig) -> Verdict:
    """Accept iff sum h(e) - sum h(o) vanishes mod 2^bits in every iteration."""
    diff = hash_sums(elements, config) - hash_sums(output, config)
    bad = await _first_nonzero_mod(comm, diff, config.bits)
    if bad is None:
        return Verdict.accept()
    return Verdict.reject(RejectReason.PERMUTATION_MISMATCH, iteration=bad)


def poly_fingerprint(elements: Sequence[int], z: int, r: int) -> int:
    """prod (z - e) mod r."""
    acc = 1
    for e in elements:
        acc = acc * (z - e) % r
    return acc


def _draw_points(seed: int, r: int, count: int) -> Tuple[int, ...]:
    rng = make_rng(seed, POLY_STREAM)
    width = (r.bit_length() + 64 + 7) // 8
    # 64 surplus bits keep the modulo bias below 2^-64
    return tuple(int.from_bytes(rng.bytes(width), "little") % r for _ in range(count))


async def check_permutation_poly(
    comm: Communicator, elements, output, config: PermCheckConfig, prime: Optional[int] = None
) -> Verdict:
    """Compare prod (z - e) with prod (z - o) over F_r at random points z broadcast from PE 0."""
    elements = [int(e) for e in elements]
    output = [int(o) for o in output]
    stats = (max(max(elements, default=-1), max(output, default=-1)) + 1, len(elements), len(output))
    universe, n_in, n_out = await comm.all_reduce(
        stats, lambda a, b: (max(a[0], b[0]), a[1] + b[1], a[2] + b[2]), bits=3 * WORD_BITS
    )
    if n_in != n_out:
        return Verdict.reject(RejectReason.LENGTH_MISMATCH)
    r = prime if prime is not None else choose_modulus(n_in, config.delta, universe)
    if universe - 1 >= r:
        raise ContractViolation(f"element {universe - 1} outside the field of size {r}")
    point_bits = r.bit_length()
    points = _draw_points(config.seed, r, config.iterations) if comm.rank == 0 else None
    points = await comm.broadcast(points, bits=config.iterations * point_bits)
    local = tuple((poly_fingerprint(elements, z, r), poly_fingerprint(output, z, r)) for z in points)
    total = await comm.all_reduce(
        local,
        lambda a, b: tuple((x1 * y1 % r, x2 * y2 % r) for (x1, x2), (y1, y2) in zip(a, b)),
        bits=2 * config.iterations * point_bits,
    )
    for j, (q_in, q_out) in enumerate(total):
        if q_in != q_out:
            return Verdict.reject(RejectReason.FINGERPRINT_MISMATCH, iteration=j)
    return Verdict.accept()


async def check_permutation(comm: Communicator, elements, output, config: PermCheckConfig) -> Verdict:
    if config.method is PermCheckMethod.POLYNOMIAL:
        return await check_permutation_poly(comm, elements, output, config)
    return await check_permutation_hash(comm, elements, output, config)


async def _sortedness(comm: Communicator, output: Sequence[int]) -> Verdict:
    detail = None
    if first_disorder(output) is not None:
        detail = reject_here(comm, RejectReason.LOCAL_ORDER)
    lo, hi = (min(output), max(output)) if output else (None, None)
    ok = await boundary_ok(comm, lo, hi)
    if detail is None and not ok:
        detail = reject_here(comm, RejectReason.BOUNDARY_ORDER)
    return await settle(comm, detail)


async def check_sorted(comm: Communicator, elements, output: Sequence[int], config: PermCheckConfig) -> Verdict:
    """Permutation check, local order, and one boundary element exchanged with the neighbour."""
    verdict = await check_permutation(comm, elements, output, config)
    if not verdict:
        return verdict
    return await _sortedness(comm, list(output))


def _index_fingerprint(words, offset: int, spec, mask: np.uint64) -> np.uint64:
    words = as_words(words)
    if words.size == 0:
        return np.uint64(0)
    weights = get_hash(spec).many(np.arange(offset, offset + words.size, dtype=np.uint64))
    return (weights * words).sum(dtype=np.uint64) & mask


def _add3(a, b):
    return tuple(x + y for x, y in zip(a, b))


async def check_zip(
    comm: Communicator,
    s1: Sequence[int],
    s2: Sequence[int],
    zipped: Sequence[Tuple[int, int]],
    config: PermCheckConfig,
) -> Verdict:
    """Position-weighted fingerprints sum r_i x_i of S1, S2 and both projections of S."""
    counts = (len(s1), len(s2), len(zipped))
    offsets = await comm.exclusive_scan(counts, _add3, bits=3 * WORD_BITS, identity=(0, 0, 0))
    totals = await comm.all_reduce(counts, _add3, bits=3 * WORD_BITS)
    if not totals[0] == totals[1] == totals[2]:
        return Verdict.reject(RejectReason.LENGTH_MISMATCH)
    mask = _mask(config.bits)
    firsts = [x for x, _ in zipped]
    seconds = [y for _, y in zipped]
    expected = np.zeros(2 * config.iterations, dtype=np.uint64)
    actual = np.zeros(2 * config.iterations, dtype=np.uint64)
    for j in range(config.iterations):
        spec = derive_spec(config.hash, j)
        expected[2 * j] = _index_fingerprint(s1, offsets[0], spec, mask)
        expected[2 * j + 1] = _index_fingerprint(s2, offsets[1], spec, mask)
        actual[2 * j] = _index_fingerprint(firsts, offsets[2], spec, mask)
        actual[2 * j + 1] = _index_fingerprint(seconds, offsets[2], spec, mask)
    bad = await _first_nonzero_mod(comm, expected - actual, config.bits)
    if bad is None:
        return Verdict.accept()
    # slot 2j is the first component of iteration j, 2j+1 the second
    return Verdict.reject(RejectReason.FINGERPRINT_MISMATCH, iteration=bad // 2, bucket=bad % 2 + 1)


async def check_union(comm: Communicator, s1: Sequence[int], s2: Sequence[int], union: Sequence[int], config: PermCheckConfig) -> Verdict:
    return await check_permutation(comm, list(s1) + list(s2), union, config)


async def check_merge(comm: Communicator, s1: Sequence[int], s2: Sequence[int], merged: Sequence[int], config: PermCheckConfig) -> Verdict:
    verdict = await check_union(comm, s1, s2, merged, config)
    if not verdict:
        return verdict
    return await _sortedness(comm, list(merged))
