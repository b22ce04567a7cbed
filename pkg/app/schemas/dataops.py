from enum import Enum
from fractions import Fraction
from typing import NamedTuple

WORD_BITS = 64
PAIR_BITS = 2 * WORD_BITS
WORD_MASK = (1 << WORD_BITS) - 1
INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


class KeyValue(NamedTuple):
    key: int
    value: int


class AverageEntry(NamedTuple):
    """Per-key average kept as an exact rational, with its element count as certificate."""

    key: int
    average: Fraction
    count: int


class MinCertificateEntry(NamedTuple):
    key: int
    owner_pe: int
    value: int


class MedianPivot(NamedTuple):
    """An input element named by its value and its global input index."""

    value: int
    index: int


class MedianEntry(NamedTuple):
    """Asserted median of one key plus its tie-break certificate.

    lower/upper: the elements at ranks (n-1)//2 and n//2 of the key's group under
    the (value, global index) order; the same element when n is odd.
    Both are None for assertions without a certificate (distinct values).
    """

    key: int
    median: Fraction
    lower: MedianPivot | None = None
    upper: MedianPivot | None = None


class JoinMode(str, Enum):
    HASH = "hash"
    SORT_MERGE = "sortmerge"
