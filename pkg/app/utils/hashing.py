import logging
from functools import lru_cache
from typing import Iterable, List

import numpy as np

from app.schemas.hashing import HashFamily, HashSpec, SlicePlan
from app.utils.rng import TABLE_STREAM, derive_seed, make_rng

logger = logging.getLogger(__name__)

CRC32C_POLYNOMIAL = 0x82F63B78  # reflected Castagnoli
MASK32 = 0xFFFFFFFF

# derived-spec stream ids
PAIR_STREAM = 1 << 20
DIGEST_STREAM = (1 << 20) + 1


def ceil_log2(x: int) -> int:
    return max(0, (x - 1).bit_length())


def _crc32c_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint64)
    for i in range(256):
        c = i
        for _ in range(8):
            c = (c >> 1) ^ CRC32C_POLYNOMIAL if c & 1 else c >> 1
        table[i] = c
    return table


CRC32C_TABLE = _crc32c_table()


def crc32c_bytes(data: bytes, init: int = 0) -> int:
    """CRC-32C of a byte string; `init` 0 gives the standard checksum."""
    c = (init ^ MASK32) & MASK32
    for b in data:
        c = int(CRC32C_TABLE[(c ^ b) & 0xFF]) ^ (c >> 8)
    return c ^ MASK32


def as_words(keys: Iterable[int] | np.ndarray) -> np.ndarray:
    if isinstance(keys, np.ndarray):
        if keys.dtype == np.int64:
            return keys.view(np.uint64)
        return keys.astype(np.uint64, copy=False)
    return np.fromiter(keys, dtype=np.uint64)


def as_signed(values: Iterable[int] | np.ndarray) -> np.ndarray:
    if isinstance(values, np.ndarray):
        return values.astype(np.int64, copy=False)
    return np.fromiter(values, dtype=np.int64)


class HashFunction:
    """One seeded member of a hash family, evaluated on 64-bit words.

    Tab32 indexes its four tables with the bytes of the 32-bit fold key ^ (key >> 32),
    Tab64 its eight tables with the key's bytes. CRC-32C runs over the key's 8-byte
    little-endian encoding with the low 32 seed bits as initial value.
    """

    def __init__(self, spec: HashSpec, tables: np.ndarray | None = None):
        self.spec = spec
        self.family = spec.family
        self.width = spec.family.width
        self.init = spec.seed & MASK32
        if self.family is HashFamily.CRC32C:
            self.tables = None
        else:
            self.tables = tables if tables is not None else self._make_tables(spec)

    @staticmethod
    def _make_tables(spec: HashSpec) -> np.ndarray:
        rng = make_rng(spec.seed, TABLE_STREAM)
        if spec.family is HashFamily.TAB32:
            return rng.integers(0, MASK32, size=(4, 256), dtype=np.uint64, endpoint=True)
        return rng.integers(0, 2**64 - 1, size=(8, 256), dtype=np.uint64, endpoint=True)

    def many(self, keys) -> np.ndarray:
        keys = as_words(keys)
        if self.family is HashFamily.CRC32C:
            c = np.full(keys.shape, self.init ^ MASK32, dtype=np.uint64)
            for shift in range(0, 64, 8):
                byte = (keys >> np.uint64(shift)) & np.uint64(0xFF)
                c = CRC32C_TABLE[((c ^ byte) & np.uint64(0xFF)).astype(np.intp)] ^ (c >> np.uint64(8))
            return c ^ np.uint64(MASK32)
        if self.family is HashFamily.TAB32:
            folded = (keys ^ (keys >> np.uint64(32))) & np.uint64(MASK32)
            rounds = 4
        else:
            folded = keys
            rounds = 8
        out = np.zeros(keys.shape, dtype=np.uint64)
        for i in range(rounds):
            byte = ((folded >> np.uint64(8 * i)) & np.uint64(0xFF)).astype(np.intp)
            out ^= self.tables[i][byte]
        return out

    def __call__(self, key: int) -> int:
        return int(self.many(np.array([key], dtype=np.uint64))[0])


@lru_cache(maxsize=256)
def get_hash(spec: HashSpec) -> HashFunction:
    return HashFunction(spec)


def zeroed(family: HashFamily = HashFamily.TAB32) -> HashFunction:
    """Tabulation hash with all-zero tables; maps every key to 0."""
    if family is HashFamily.CRC32C:
        raise ValueError("CRC-32C has no tables to zero")
    rows = 4 if family is HashFamily.TAB32 else 8
    return HashFunction(HashSpec(family=family), tables=np.zeros((rows, 256), dtype=np.uint64))


def eval_hash(spec: HashSpec, key: int) -> int:
    return get_hash(spec)(key)


def index_hash(spec: HashSpec, global_index: int) -> int:
    return get_hash(spec)(global_index)


def derive_spec(spec: HashSpec, stream: int) -> HashSpec:
    return HashSpec(family=spec.family, seed=derive_seed(spec.seed, TABLE_STREAM, stream))


def slice_buckets(hash_value: int, plan: SlicePlan, d: int) -> List[int]:
    if (1 << plan.bits_per_slice) < d:
        raise ValueError(f"{plan.bits_per_slice}-bit slices cannot address {d} buckets")
    mask = (1 << plan.bits_per_slice) - 1
    return [((hash_value >> (i * plan.bits_per_slice)) & mask) % d + 1 for i in range(plan.num_slices)]


def slice_plan(d: int, iterations: int, family: HashFamily) -> SlicePlan:
    """Slices per evaluation for `iterations` instances with d buckets each.

    Non-power-of-two d gets two extra bits per slice to flatten the modulo skew.
    """
    bits = ceil_log2(d) + (0 if d & (d - 1) == 0 else 2)
    bits = max(1, min(bits, family.width))
    return SlicePlan(
        num_slices=max(1, min(iterations, family.width // bits)),
        bits_per_slice=bits,
        source_width=family.width,
    )


def bucket_matrix(keys, spec: HashSpec, d: int, iterations: int) -> np.ndarray:
    """0-based bucket of every key for every iteration, shape (iterations, n).

    One hash evaluation feeds num_slices iterations; further evaluations use derived seeds.
    """
    keys = as_words(keys)
    plan = slice_plan(d, iterations, spec.family)
    mask = np.uint64((1 << plan.bits_per_slice) - 1)
    out = np.empty((iterations, keys.size), dtype=np.intp)
    hashed = None
    for j in range(iterations):
        slot = j % plan.num_slices
        if slot == 0:
            hashed = get_hash(derive_spec(spec, j // plan.num_slices)).many(keys)
        raw = (hashed >> np.uint64(slot * plan.bits_per_slice)) & mask
        out[j] = (raw % np.uint64(d)).astype(np.intp)
    return out


def encode_pairs(keys, values, spec: HashSpec) -> np.ndarray:
    """One 64-bit word per (key, value) pair: key XOR a seeded Tab64 mix of the value."""
    mixer = get_hash(HashSpec(family=HashFamily.TAB64, seed=derive_seed(spec.seed, TABLE_STREAM, PAIR_STREAM)))
    return as_words(keys) ^ mixer.many(as_signed(values).view(np.uint64))


def digest(spec: HashSpec, payload: bytes) -> int:
    """Position-dependent hash of a byte string, used to compare replicas."""
    padded = payload + b"\0" * (-len(payload) % 8)
    words = np.frombuffer(padded, dtype="<u8").astype(np.uint64)
    outer = get_hash(spec)
    inner = get_hash(derive_spec(spec, DIGEST_STREAM))
    positions = inner.many(np.arange(words.size, dtype=np.uint64))
    total = outer.many(words ^ positions).sum(dtype=np.uint64) if words.size else np.uint64(0)
    return int(total) ^ outer(len(payload))
