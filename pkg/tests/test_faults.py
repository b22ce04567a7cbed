import logging
from collections import Counter

import pytest
from pydantic import ValidationError

from app.exceptions import IncompatibleExperiment, ManipulationError
from app.schemas.dataops import KeyValue
from app.schemas.faults import Manipulation, ManipulationKind, TargetStream
from app.services.faults import (
    apply_perm_manipulation,
    apply_sum_manipulation,
    flip_pair_bit,
    manipulate_slices,
)


def perm(kind, seed=0):
    return Manipulation(kind=kind, seed=seed)


def test_perm_examples():
    assert apply_perm_manipulation([5], perm(ManipulationKind.RESET)) == [0]
    assert apply_perm_manipulation([5], perm(ManipulationKind.INCREMENT)) == [6]
    assert apply_perm_manipulation([2**64 - 1], perm(ManipulationKind.INCREMENT)) == [0]
    assert apply_perm_manipulation([5, 9], perm(ManipulationKind.SET_EQUAL)) in ([9, 9], [5, 5])


def test_bitflip_changes_one_bit():
    for seed in range(20):
        [out] = apply_perm_manipulation([0xF0F0], perm(ManipulationKind.BITFLIP, seed))
        assert bin(out ^ 0xF0F0).count("1") == 1


def test_switch_values_example():
    data = [KeyValue(1, 5), KeyValue(2, 7)]
    assert apply_sum_manipulation(data, perm(ManipulationKind.SWITCH_VALUES)) == [(1, 7), (2, 5)]


def test_incdec_moves_keys_by_one():
    data = [KeyValue(1, 0), KeyValue(5, 0)]
    out = apply_sum_manipulation(data, Manipulation(kind=ManipulationKind.INC_DEC, n=1, seed=3))
    assert Counter(k for k, _ in out) in (Counter([2, 4]), Counter([0, 6]))


def test_incdec_two_touches_four_distinct_keys():
    data = [KeyValue(k, k) for k in range(0, 100, 10)]
    out = apply_sum_manipulation(data, Manipulation(kind=ManipulationKind.INC_DEC, n=2, seed=8))
    moved = [(a.key, b.key) for a, b in zip(data, out) if a != b]
    assert len(moved) == 4
    assert sorted(b - a for a, b in moved) == [-1, -1, 1, 1]


def test_inckey_and_randkey_keep_values():
    data = [KeyValue(k, 100 + k) for k in range(10)]
    for kind in (ManipulationKind.INC_KEY, ManipulationKind.RAND_KEY):
        out = apply_sum_manipulation(data, perm(kind, 4))
        assert [v for _, v in out] == [v for _, v in data]
        assert out != data


def test_flip_pair_bit_layout():
    assert flip_pair_bit(KeyValue(0, 0), 0) == (1, 0)
    assert flip_pair_bit(KeyValue(0, 0), 64) == (0, 1)
    assert flip_pair_bit(KeyValue(0, 0), 127) == (0, -(2**63))
    assert flip_pair_bit(KeyValue(0, -1), 127) == (0, 2**63 - 1)


def test_manipulation_is_deterministic():
    data = list(range(1000))
    for kind in (ManipulationKind.RANDOMIZE, ManipulationKind.SET_EQUAL, ManipulationKind.BITFLIP):
        assert apply_perm_manipulation(data, perm(kind, 11)) == apply_perm_manipulation(data, perm(kind, 11))
    assert apply_perm_manipulation(data, perm(ManipulationKind.RANDOMIZE, 1)) != apply_perm_manipulation(
        data, perm(ManipulationKind.RANDOMIZE, 2)
    )


def test_unchanging_draws_are_resampled_then_fail(caplog):
    with caplog.at_level(logging.WARNING, logger="app.services.faults"):
        with pytest.raises(ManipulationError):
            apply_perm_manipulation([0], perm(ManipulationKind.RESET))
    assert "resampling" in caplog.text
    with pytest.raises(ManipulationError):
        apply_sum_manipulation([KeyValue(1, 5), KeyValue(2, 5)], perm(ManipulationKind.SWITCH_VALUES))


def test_reset_resamples_past_zero():
    data = [0] * 10 + [7]
    assert Counter(apply_perm_manipulation(data, perm(ManipulationKind.RESET, 1))) == Counter([0] * 11)


def test_manipulation_errors():
    with pytest.raises(ManipulationError):
        apply_perm_manipulation([5], perm(ManipulationKind.SET_EQUAL))
    with pytest.raises(ManipulationError):
        apply_perm_manipulation([], perm(ManipulationKind.RESET))
    with pytest.raises(ManipulationError):
        apply_sum_manipulation([KeyValue(1, 1), KeyValue(1, 2)], Manipulation(kind=ManipulationKind.INC_DEC))
    with pytest.raises(IncompatibleExperiment):
        apply_sum_manipulation([KeyValue(1, 1)], perm(ManipulationKind.RESET))
    with pytest.raises(IncompatibleExperiment):
        apply_perm_manipulation([1], perm(ManipulationKind.SWITCH_VALUES))


def test_manipulation_parse():
    m = Manipulation.parse("IncDec2", seed=4, target=TargetStream.OUTPUT)
    assert (m.kind, m.n, m.seed, m.target) == (ManipulationKind.INC_DEC, 2, 4, TargetStream.OUTPUT)
    assert m.name == "incdec2"
    assert Manipulation.parse("incdec").n == 1
    assert Manipulation.parse("bitflip").kind is ManipulationKind.BITFLIP
    with pytest.raises(ValueError):
        Manipulation.parse("scramble")
    with pytest.raises(ValidationError):
        Manipulation(kind=ManipulationKind.RESET, n=2)


def test_manipulate_slices_keeps_sizes():
    slices = [[1, 2, 3], [], [4, 5]]
    out = manipulate_slices(slices, perm(ManipulationKind.RANDOMIZE, 2), pairs=False)
    assert [len(s) for s in out] == [3, 0, 2]
    assert sum(a != b for a, b in zip(sum(out, []), [1, 2, 3, 4, 5])) == 1
    pair_slices = [[KeyValue(1, 1)], [KeyValue(2, 2)]]
    out = manipulate_slices(pair_slices, perm(ManipulationKind.SWITCH_VALUES), pairs=True)
    assert out == [[(1, 2)], [(2, 1)]]
