"""Reference distributed operations. Exact, unchecked, and the ground truth for the checkers."""

import heapq
import logging
import operator
from bisect import bisect_left, bisect_right
from collections import defaultdict
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from app.exceptions import AggregationOverflow, LengthMismatch
from app.schemas.dataops import (
    INT64_MAX,
    INT64_MIN,
    PAIR_BITS,
    WORD_BITS,
    AverageEntry,
    JoinMode,
    KeyValue,
    MedianEntry,
    MedianPivot,
    MinCertificateEntry,
)
from app.schemas.hashing import HashFamily, HashSpec
from app.services.simnet import Communicator
from app.utils.hashing import as_words, get_hash

logger = logging.getLogger(__name__)

DEFAULT_OWNER_HASH = HashSpec(family=HashFamily.TAB64, seed=0x5EED)


def _merge_counters(a: Dict[int, Tuple[int, ...]], b: Dict[int, Tuple[int, ...]]) -> Dict[int, Tuple[int, ...]]:
    out = dict(a)
    for key, parts in b.items():
        mine = out.get(key)
        out[key] = parts if mine is None else tuple(x + y for x, y in zip(mine, parts))
    return out


async def _aggregate(comm: Communicator, pairs: Sequence[KeyValue], with_counts: bool) -> Dict[int, Tuple[int, ...]] | None:
    local: Dict[int, Tuple[int, ...]] = {}
    for key, value in pairs:
        mine = local.get(key)
        part = (value, 1) if with_counts else (value,)
        local[key] = part if mine is None else tuple(x + y for x, y in zip(mine, part))
    entry_bits = WORD_BITS * (3 if with_counts else 2)
    merged = await comm.reduce(local, _merge_counters, bits=lambda t: len(t) * entry_bits)
    if merged is None:
        return None
    for key, parts in merged.items():
        if not INT64_MIN <= parts[0] <= INT64_MAX:
            raise AggregationOverflow(f"sum for key {key} leaves the signed 64-bit range")
    return merged


async def sum_aggregate(comm: Communicator, pairs: Sequence[KeyValue]) -> List[KeyValue]:
    """Per-key sums, gathered at PE 0 (other PEs return an empty list)."""
    merged = await _aggregate(comm, pairs, with_counts=False)
    if merged is None:
        return []
    return [KeyValue(key, parts[0]) for key, parts in sorted(merged.items())]


async def count_aggregate(comm: Communicator, pairs: Sequence[KeyValue]) -> List[KeyValue]:
    return await sum_aggregate(comm, [KeyValue(key, 1) for key, _ in pairs])


async def average_aggregate(comm: Communicator, pairs: Sequence[KeyValue]) -> List[AverageEntry]:
    """Exact per-key averages with their element counts, at PE 0."""
    merged = await _aggregate(comm, pairs, with_counts=True)
    if merged is None:
        return []
    return [AverageEntry(key, Fraction(total, count), count) for key, (total, count) in sorted(merged.items())]


def _merge_best(a: Dict[int, Tuple[int, int, int]], b: Dict[int, Tuple[int, int, int]]) -> Dict[int, Tuple[int, int, int]]:
    out = dict(a)
    for key, cand in b.items():
        if key not in out or cand < out[key]:
            out[key] = cand
    return out


async def _extremum_aggregate(
    comm: Communicator, pairs: Sequence[KeyValue], sign: int
) -> Tuple[List[KeyValue], List[MinCertificateEntry]]:
    # ties broken by (value, owner_pe, local index); sign=-1 turns it into a maximum
    best: Dict[int, Tuple[int, int, int]] = {}
    for idx, (key, value) in enumerate(pairs):
        cand = (sign * value, comm.rank, idx)
        if key not in best or cand < best[key]:
            best[key] = cand
    entry_bits = 3 * WORD_BITS
    merged = await comm.reduce(best, _merge_best, bits=lambda t: len(t) * entry_bits)
    merged = await comm.broadcast(merged, bits=lambda t: len(t) * entry_bits)
    keys = sorted(merged)
    result = [KeyValue(key, sign * merged[key][0]) for key in keys]
    certificate = [MinCertificateEntry(key, merged[key][1], sign * merged[key][0]) for key in keys]
    return result, certificate


async def min_aggregate(comm: Communicator, pairs: Sequence[KeyValue]) -> Tuple[List[KeyValue], List[MinCertificateEntry]]:
    """Per-key minima plus the owner certificate, both replicated at every PE."""
    return await _extremum_aggregate(comm, pairs, 1)


async def max_aggregate(comm: Communicator, pairs: Sequence[KeyValue]) -> Tuple[List[KeyValue], List[MinCertificateEntry]]:
    return await _extremum_aggregate(comm, pairs, -1)


def median_entry(key: int, ordered: Sequence[Tuple[int, int]]) -> MedianEntry:
    """Median and tie-break certificate of one key's (value, global index) pairs, already sorted."""
    n = len(ordered)
    lower = MedianPivot(*ordered[(n - 1) // 2])
    upper = MedianPivot(*ordered[n // 2])
    return MedianEntry(key, Fraction(lower.value + upper.value, 2), lower, upper)


async def median_aggregate(
    comm: Communicator, pairs: Sequence[KeyValue], owner_hash: HashSpec = DEFAULT_OWNER_HASH
) -> List[MedianEntry]:
    """Exact per-key medians via a GroupBy exchange, replicated at every PE.

    Ties are broken by (value, global index).
    """
    p = comm.p
    offset = await comm.exclusive_prefix_sum(len(pairs))
    owners = _owners(pairs, owner_hash, p)
    outgoing: List[List[Tuple[int, int, int]]] = [[] for _ in range(p)]
    for idx, ((key, value), owner) in enumerate(zip(pairs, owners)):
        outgoing[owner].append((key, value, offset + idx))
    received = await comm.all_to_all(outgoing, bits=lambda batch: len(batch) * 3 * WORD_BITS)
    groups: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for batch in received:
        for key, value, gidx in batch:
            groups[key].append((value, gidx))
    entries = [median_entry(key, sorted(groups[key])) for key in sorted(groups)]
    # key, median numerator and denominator, two (value, index) pivots
    entry_bits = 7 * WORD_BITS
    gathered = await comm.reduce(entries, operator.add, bits=lambda e: len(e) * entry_bits)
    replicated = await comm.broadcast(gathered, bits=lambda e: len(e) * entry_bits)
    return sorted(replicated, key=lambda e: e.key)


def _owners(pairs: Sequence[KeyValue], spec: HashSpec, p: int) -> List[int]:
    if not pairs:
        return []
    hashed = get_hash(spec).many(as_words([key for key, _ in pairs]))
    return (hashed % p).astype(int).tolist()


async def rebalance(comm: Communicator, local: Sequence, element_bits: int = WORD_BITS) -> List:
    """Move elements so PE j holds global positions [j*n/p, (j+1)*n/p), order preserved."""
    p = comm.p
    before = await comm.exclusive_prefix_sum(len(local))
    total = await comm.all_reduce(len(local), operator.add, bits=WORD_BITS)
    outgoing: List[List] = [[] for _ in range(p)]
    for j in range(p):
        lo = max(j * total // p, before)
        hi = min((j + 1) * total // p, before + len(local))
        if lo < hi:
            outgoing[j] = list(local[lo - before : hi - before])
    received = await comm.all_to_all(outgoing, bits=lambda batch: len(batch) * element_bits)
    return [x for batch in received for x in batch]


async def sort(comm: Communicator, words: Sequence[int]) -> List[int]:
    """Sample sort followed by an exact rebalance; PE j ends with the j-th slice of the sorted sequence."""
    p = comm.p
    local = sorted(words)
    if p == 1:
        return local
    step = len(local) / (p + 1)
    samples = [local[int((i + 1) * step)] for i in range(p)] if local else []
    pooled = sorted(x for s in await comm.all_gather(samples, bits=lambda s: len(s) * WORD_BITS) for x in s)
    splitters = [pooled[(i + 1) * len(pooled) // p] for i in range(p - 1)] if pooled else []
    buckets: List[List[int]] = [[] for _ in range(p)]
    for x in local:
        buckets[bisect_right(splitters, x)].append(x)
    received = await comm.all_to_all(buckets, bits=lambda b: len(b) * WORD_BITS)
    merged = list(heapq.merge(*received))
    return await rebalance(comm, merged, WORD_BITS)


async def merge(comm: Communicator, s1: Sequence[int], s2: Sequence[int]) -> List[int]:
    return await sort(comm, list(s1) + list(s2))


async def union(comm: Communicator, s1: Sequence, s2: Sequence) -> List:
    return await rebalance(comm, list(s1) + list(s2), WORD_BITS)


async def zip_sequences(comm: Communicator, s1: Sequence[int], s2: Sequence[int]) -> List[Tuple[int, int]]:
    """Index-wise pairs; S2 is moved onto S1's distribution."""
    p = comm.p
    counts = await comm.all_gather((len(s1), len(s2)), bits=2 * WORD_BITS)
    n1 = sum(c[0] for c in counts)
    n2 = sum(c[1] for c in counts)
    if n1 != n2:
        raise LengthMismatch(f"cannot zip sequences of length {n1} and {n2}")
    starts = [0] * (p + 1)
    for j in range(p):
        starts[j + 1] = starts[j] + counts[j][0]
    offset = sum(c[1] for c in counts[: comm.rank])
    outgoing: List[List[int]] = [[] for _ in range(p)]
    for idx, y in enumerate(s2):
        owner = bisect_right(starts, offset + idx) - 1
        outgoing[owner].append(y)
    received = await comm.all_to_all(outgoing, bits=lambda b: len(b) * WORD_BITS)
    ys = [y for batch in received for y in batch]
    return list(zip(s1, ys))


async def groupby_redistribute(
    comm: Communicator, pairs: Sequence[KeyValue], owner_hash: HashSpec = DEFAULT_OWNER_HASH
) -> List[KeyValue]:
    """Send every pair to PE hash(key) mod p; local order (hash, key, arrival)."""
    p = comm.p
    outgoing: List[List[KeyValue]] = [[] for _ in range(p)]
    for pair, owner in zip(pairs, _owners(pairs, owner_hash, p)):
        outgoing[owner].append(KeyValue(*pair))
    received = await comm.all_to_all(outgoing, bits=lambda b: len(b) * PAIR_BITS)
    arrived = [pair for batch in received for pair in batch]
    if not arrived:
        return []
    hashed = get_hash(owner_hash).many(as_words([key for key, _ in arrived])).tolist()
    order = sorted(range(len(arrived)), key=lambda i: (hashed[i], arrived[i].key))
    return [arrived[i] for i in order]


async def join_redistribute(
    comm: Communicator,
    r: Sequence[KeyValue],
    s: Sequence[KeyValue],
    mode: JoinMode = JoinMode.HASH,
    owner_hash: HashSpec = DEFAULT_OWNER_HASH,
) -> Tuple[List[KeyValue], List[KeyValue]]:
    """Co-partition two relations, by key hash or by key ranges that never split a key."""
    if mode is JoinMode.HASH:
        return await groupby_redistribute(comm, r, owner_hash), await groupby_redistribute(comm, s, owner_hash)
    p = comm.p
    distinct = sorted({key for key, _ in r} | {key for key, _ in s})
    step = len(distinct) / (p + 1)
    samples = [distinct[int((i + 1) * step)] for i in range(p)] if distinct else []
    pooled = sorted({x for batch in await comm.all_gather(samples, bits=lambda b: len(b) * WORD_BITS) for x in batch})
    splitters = [pooled[(i + 1) * len(pooled) // p] for i in range(p - 1)] if pooled else []
    out = []
    for relation in (r, s):
        outgoing: List[List[KeyValue]] = [[] for _ in range(p)]
        for pair in relation:
            outgoing[min(bisect_left(splitters, pair[0]), p - 1)].append(KeyValue(*pair))
        received = await comm.all_to_all(outgoing, bits=lambda b: len(b) * PAIR_BITS)
        out.append(sorted(pair for batch in received for pair in batch))
    return out[0], out[1]

