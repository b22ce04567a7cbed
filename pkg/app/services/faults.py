"""Seeded manipulators producing subtle corruptions of checker inputs or outputs."""

import logging
from collections import Counter
from typing import Callable, List, Sequence, Tuple

import numpy as np

from app.exceptions import IncompatibleExperiment, ManipulationError
from app.schemas.dataops import INT64_MAX, PAIR_BITS, WORD_BITS, WORD_MASK, KeyValue
from app.schemas.faults import PERM_KINDS, SUM_KINDS, Manipulation, ManipulationKind
from app.utils.rng import FAULT_STREAM, make_rng

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 100

Draw = Tuple[List[int], list]


def _signed(word: int) -> int:
    return word - (1 << WORD_BITS) if word > INT64_MAX else word


def flip_pair_bit(pair: KeyValue, bit: int) -> KeyValue:
    """Flip one bit of the 128-bit little-endian encoding (key = low word, value = high word)."""
    encoded = pair[0] | (pair[1] & WORD_MASK) << WORD_BITS
    encoded ^= 1 << bit
    return KeyValue(encoded & WORD_MASK, _signed(encoded >> WORD_BITS))


def _random_word(rng: np.random.Generator) -> int:
    return int(rng.integers(0, WORD_MASK, dtype=np.uint64, endpoint=True))


def _two_indices(rng: np.random.Generator, n: int) -> Tuple[int, int]:
    i, j = rng.choice(n, size=2, replace=False)
    return int(i), int(j)


def _distinct_key_indices(data: Sequence[KeyValue], count: int, rng: np.random.Generator) -> List[int]:
    if len({key for key, _ in data}) < count:
        raise ManipulationError(f"need {count} elements with distinct keys, instance has fewer")
    chosen: List[int] = []
    seen = set()
    for _ in range(1000 * count + 10 * len(data)):
        i = int(rng.integers(len(data)))
        if data[i][0] not in seen:
            seen.add(data[i][0])
            chosen.append(i)
            if len(chosen) == count:
                return chosen
    raise ManipulationError(f"could not sample {count} elements with distinct keys")


def _draw_sum(data: Sequence[KeyValue], m: Manipulation, rng: np.random.Generator) -> Draw:
    n = len(data)
    if m.kind is ManipulationKind.BITFLIP:
        i = int(rng.integers(n))
        return [i], [flip_pair_bit(data[i], int(rng.integers(PAIR_BITS)))]
    if m.kind is ManipulationKind.RAND_KEY:
        i = int(rng.integers(n))
        return [i], [KeyValue(_random_word(rng), data[i][1])]
    if m.kind is ManipulationKind.SWITCH_VALUES:
        if n < 2:
            raise ManipulationError("switchvalues needs at least two elements")
        i, j = _two_indices(rng, n)
        return [i, j], [KeyValue(data[i][0], data[j][1]), KeyValue(data[j][0], data[i][1])]
    if m.kind is ManipulationKind.INC_KEY:
        i = int(rng.integers(n))
        return [i], [KeyValue((data[i][0] + 1) & WORD_MASK, data[i][1])]
    # IncDec(n): n keys up by one, n other keys down by one
    targets = _distinct_key_indices(data, 2 * m.n, rng)
    step = [1] * m.n + [-1] * m.n
    return targets, [KeyValue((data[i][0] + s) & WORD_MASK, data[i][1]) for i, s in zip(targets, step)]


def _draw_perm(data: Sequence[int], m: Manipulation, rng: np.random.Generator) -> Draw:
    n = len(data)
    if m.kind is ManipulationKind.SET_EQUAL:
        if n < 2:
            raise ManipulationError("setequal needs at least two elements")
        i, j = _two_indices(rng, n)
        return [i], [data[j]]
    i = int(rng.integers(n))
    if m.kind is ManipulationKind.BITFLIP:
        return [i], [data[i] ^ (1 << int(rng.integers(WORD_BITS)))]
    if m.kind is ManipulationKind.INCREMENT:
        return [i], [(data[i] + 1) & WORD_MASK]
    if m.kind is ManipulationKind.RANDOMIZE:
        return [i], [_random_word(rng)]
    return [i], [0]


def _apply(data: Sequence, m: Manipulation, draw: Callable[..., Draw]) -> list:
    if not data:
        raise ManipulationError(f"{m.name}: nothing to manipulate in an empty sequence")
    rng = make_rng(m.seed, FAULT_STREAM)
    for attempt in range(MAX_ATTEMPTS):
        targets, replacements = draw(data, m, rng)
        # a draw that leaves the touched multiset unchanged is no corruption at all
        if Counter(data[i] for i in targets) != Counter(replacements):
            out = list(data)
            for i, new in zip(targets, replacements):
                out[i] = new
            return out
        logger.warning(f"{m.name}: draw {attempt} left the data unchanged, resampling")
    raise ManipulationError(f"{m.name}: no changing draw in {MAX_ATTEMPTS} attempts")


def apply_sum_manipulation(data: Sequence[KeyValue], m: Manipulation) -> List[KeyValue]:
    if m.kind not in SUM_KINDS:
        raise IncompatibleExperiment(f"{m.name} does not apply to key/value data")
    return _apply([KeyValue(*pair) for pair in data], m, _draw_sum)


def apply_perm_manipulation(data: Sequence[int], m: Manipulation) -> List[int]:
    if m.kind not in PERM_KINDS:
        raise IncompatibleExperiment(f"{m.name} does not apply to word sequences")
    return _apply([int(x) for x in data], m, _draw_perm)


def manipulate_slices(slices: Sequence[Sequence], m: Manipulation, pairs: bool) -> List[list]:
    """Manipulate a distributed sequence as one global sequence, keeping per-PE sizes."""
    flat = [x for part in slices for x in part]
    mutated = apply_sum_manipulation(flat, m) if pairs else apply_perm_manipulation(flat, m)
    out, start = [], 0
    for part in slices:
        out.append(mutated[start : start + len(part)])
        start += len(part)
    return out
