import numpy as np
import pytest
from pydantic import ValidationError

from app.schemas.hashing import HashFamily, HashSpec, SlicePlan
from app.utils.hashing import (
    bucket_matrix,
    crc32c_bytes,
    encode_pairs,
    eval_hash,
    get_hash,
    index_hash,
    slice_buckets,
    slice_plan,
    zeroed,
)
from helpers import within_sigma


def crc32c_reference(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0x82F63B78 if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


def test_crc32c_check_value():
    assert crc32c_bytes(b"123456789") == 0xE3069283
    assert crc32c_reference(b"123456789") == 0xE3069283


@pytest.mark.parametrize("key", [0, 1, 42, 2**32 + 7, 2**64 - 1, 0x0123456789ABCDEF])
def test_crc_hash_matches_bitwise_reference(key):
    expected = crc32c_reference(key.to_bytes(8, "little"))
    assert eval_hash(HashSpec(family=HashFamily.CRC32C), key) == expected


def test_crc_of_zero_key_ignores_high_seed_bits():
    reference = crc32c_reference(bytes(8))
    assert eval_hash(HashSpec(family=HashFamily.CRC32C, seed=0), 0) == reference
    assert eval_hash(HashSpec(family=HashFamily.CRC32C, seed=1 << 40), 0) == reference


def test_vectorized_crc_agrees_with_scalar():
    keys = np.arange(1000, 1100, dtype=np.uint64)
    spec = HashSpec(family=HashFamily.CRC32C, seed=0xBEEF)
    many = get_hash(spec).many(keys)
    for key, h in zip(keys.tolist(), many.tolist()):
        assert h == crc32c_bytes(key.to_bytes(8, "little"), init=0xBEEF)


@pytest.mark.parametrize("family", [HashFamily.TAB32, HashFamily.TAB64])
def test_zeroed_tables_map_everything_to_zero(family):
    h = zeroed(family)
    assert h(12345) == 0
    assert not h.many(np.arange(500, dtype=np.uint64)).any()


def test_zeroed_rejects_crc():
    with pytest.raises(ValueError):
        zeroed(HashFamily.CRC32C)


def test_tabulation_is_deterministic_and_width_bounded():
    spec = HashSpec(family=HashFamily.TAB32, seed=1)
    assert eval_hash(spec, 42) == eval_hash(HashSpec(family=HashFamily.TAB32, seed=1), 42)
    values = get_hash(spec).many(np.arange(2000, dtype=np.uint64))
    assert int(values.max()) < 2**32
    assert eval_hash(HashSpec(family=HashFamily.TAB32, seed=2), 42) != eval_hash(spec, 42)


def test_tab32_folds_high_word():
    spec = HashSpec(family=HashFamily.TAB32, seed=9)
    # key ^ (key >> 32) is identical for these two keys
    assert eval_hash(spec, (1 << 32) | 1) == eval_hash(spec, 0)


def test_slice_buckets_examples():
    plan = SlicePlan(num_slices=2, bits_per_slice=4, source_width=32)
    assert slice_buckets(0b1111_0000, plan, 16) == [1, 16]
    assert slice_buckets(0, plan, 16) == [1, 1]
    assert slice_buckets(0, SlicePlan(num_slices=5, bits_per_slice=3), 5) == [1] * 5


def test_slice_buckets_needs_enough_bits():
    with pytest.raises(ValueError):
        slice_buckets(7, SlicePlan(num_slices=1, bits_per_slice=2), 8)


def test_slice_plan_rejects_overwide_layout():
    with pytest.raises(ValidationError):
        SlicePlan(num_slices=9, bits_per_slice=8, source_width=64)
    with pytest.raises(ValidationError):
        SlicePlan(num_slices=1, bits_per_slice=8, source_width=48)


def test_slices_reconstruct_low_bits():
    plan = SlicePlan(num_slices=4, bits_per_slice=8, source_width=32)
    h = 0xDEADBEEF
    raw = [b - 1 for b in slice_buckets(h, plan, 256)]
    assert sum(v << (8 * i) for i, v in enumerate(raw)) == h


def test_slice_plan_choices():
    plan = slice_plan(4, 4, HashFamily.CRC32C)
    assert (plan.num_slices, plan.bits_per_slice) == (4, 2)
    # non-power-of-two d gets two spare bits
    plan = slice_plan(37, 3, HashFamily.CRC32C)
    assert (plan.num_slices, plan.bits_per_slice) == (3, 8)
    plan = slice_plan(1170, 4, HashFamily.TAB64)
    assert plan.num_slices * plan.bits_per_slice <= 64


def test_bucket_uniformity():
    n, d = 100_000, 8
    buckets = bucket_matrix(np.arange(n, dtype=np.uint64), HashSpec(family=HashFamily.TAB64, seed=7), d, 1)[0]
    counts = np.bincount(buckets, minlength=d)
    assert counts.sum() == n
    for c in counts.tolist():
        assert within_sigma(c, n, 1 / d)


def test_bucket_matrix_shape_and_range():
    keys = np.arange(300, dtype=np.uint64)
    m = bucket_matrix(keys, HashSpec(family=HashFamily.CRC32C, seed=3), 37, 6)
    assert m.shape == (6, 300)
    assert m.min() >= 0 and m.max() < 37


def test_pairwise_collision_rate_over_seeds():
    trials, d = 4000, 4
    hits = 0
    for seed in range(trials):
        b = bucket_matrix([17, 4242], HashSpec(family=HashFamily.TAB32, seed=seed), d, 1)[0]
        hits += int(b[0] == b[1])
    assert within_sigma(hits, trials, 1 / d)


def test_index_hash_is_position_dependent():
    spec = HashSpec(family=HashFamily.TAB64, seed=11)
    assert index_hash(spec, 5) == index_hash(spec, 5)
    collisions = sum(
        index_hash(HashSpec(family=HashFamily.TAB64, seed=s), 5) == index_hash(HashSpec(family=HashFamily.TAB64, seed=s), 6)
        for s in range(1000)
    )
    assert collisions == 0


def test_encode_pairs_separates_values():
    spec = HashSpec(family=HashFamily.TAB64, seed=5)
    words = encode_pairs([1, 1, 2], [5, 6, 5], spec)
    assert len(set(words.tolist())) == 3
    assert encode_pairs([1], [-3], spec)[0] == encode_pairs([1], [-3], spec)[0]


@pytest.mark.parametrize("seed", [0, 0xBEEF, 2**31 + 5])
def test_crc_increment_difference_ignores_the_seed(seed):
    # CRC is affine in its input: h(e) ^ h(e + 1) depends only on the trailing ones of e
    spec = HashSpec(family=HashFamily.CRC32C, seed=seed)
    for e in (0, 2, 4, 1000):
        assert eval_hash(spec, e) ^ eval_hash(spec, e + 1) == 0x493C7D27
    for e in (1, 5, 1001):
        assert eval_hash(spec, e) ^ eval_hash(spec, e + 1) == 0xDB448769


def test_crc_increment_never_keeps_the_low_nibble():
    spec = HashSpec(family=HashFamily.CRC32C, seed=77)
    for trailing_ones in range(17):
        e = (1 << trailing_ones) - 1
        assert (eval_hash(spec, e) ^ eval_hash(spec, e + 1)) & 0xF


def test_tab_increment_difference_follows_the_seed():
    specs = [HashSpec(family=HashFamily.TAB32, seed=s) for s in range(8)]
    diffs = {eval_hash(spec, 0) ^ eval_hash(spec, 1) for spec in specs}
    assert len(diffs) > 1
