from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.hashing import HashSpec


class RejectReason(str, Enum):
    TABLE_MISMATCH = "table_mismatch"
    PERMUTATION_MISMATCH = "permutation_mismatch"
    FINGERPRINT_MISMATCH = "fingerprint_mismatch"
    LENGTH_MISMATCH = "length_mismatch"
    LOCAL_ORDER = "local_order"
    BOUNDARY_ORDER = "boundary_order"
    BELOW_MINIMUM = "below_minimum"
    ABOVE_MAXIMUM = "above_maximum"
    MISSING_KEY = "missing_key"
    UNCOVERED_KEY = "uncovered_key"
    PHANTOM_CERTIFICATE = "phantom_certificate"
    CERTIFICATE_MISMATCH = "certificate_mismatch"
    NON_INTEGRAL_SUM = "non_integral_sum"
    WRONG_OWNER = "wrong_owner"
    CO_PARTITION = "co_partition"
    REPLICA_MISMATCH = "replica_mismatch"


class VerdictDetail(BaseModel):
    reason: RejectReason
    pe: Optional[int] = None
    iteration: Optional[int] = None
    bucket: Optional[int] = None


class Verdict(BaseModel):
    accepted: bool
    detail: Optional[VerdictDetail] = None

    @model_validator(mode="after")
    def accepted_has_no_detail(self):
        if self.accepted and self.detail is not None:
            raise ValueError("an accepting verdict carries no detail")
        if not self.accepted and self.detail is None:
            raise ValueError("a rejecting verdict needs a reason")
        return self

    @classmethod
    def accept(cls) -> "Verdict":
        return cls(accepted=True)

    @classmethod
    def reject(cls, reason: RejectReason, **detail) -> "Verdict":
        return cls(accepted=False, detail=VerdictDetail(reason=reason, **detail))

    def __bool__(self) -> bool:
        return self.accepted


def residue_width(rhat: int) -> int:
    """Wire bits of one bucket entry when moduli range over (rhat, 2 rhat]: ceil(log2(2 rhat))."""
    return (2 * rhat - 1).bit_length()


class SumCheckConfig(BaseModel):
    """`<its>x<d>m<log2 rhat>` configuration of the sum aggregation checker."""

    model_config = ConfigDict(frozen=True)

    iterations: int = Field(..., ge=1)
    d: int = Field(..., ge=2)
    rhat: int = Field(..., ge=2, le=2**32)
    hash: HashSpec = HashSpec()
    modulus_seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def buckets_within_modulus(self):
        if self.d > self.rhat:
            raise ValueError(f"bucket count d={self.d} exceeds modulus parameter rhat={self.rhat}")
        return self

    @property
    def residue_bits(self) -> int:
        return residue_width(self.rhat)

    @property
    def table_bits(self) -> int:
        return self.d * self.residue_bits

    @property
    def payload_bits(self) -> int:
        return self.iterations * self.table_bits

    @property
    def delta(self) -> float:
        return (1 / self.rhat + 1 / self.d) ** self.iterations


class PermCheckMethod(str, Enum):
    HASH = "hash"
    POLYNOMIAL = "poly"


class PermCheckConfig(BaseModel):
    """Hash-sum (`<hash><bits>`, e.g. `crc12`) or polynomial permutation checker settings."""

    model_config = ConfigDict(frozen=True)

    method: PermCheckMethod = PermCheckMethod.HASH
    hash: HashSpec = HashSpec()
    bits: int = Field(32, ge=1, le=64)
    iterations: int = Field(1, ge=1)
    delta: float = Field(2.0**-32, gt=0, lt=1)
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def bits_within_hash(self):
        if self.method is PermCheckMethod.HASH and self.bits > self.hash.family.width:
            raise ValueError(f"{self.bits} hash bits requested from a {self.hash.family.width}-bit hash")
        return self

    @property
    def expected_delta(self) -> float:
        if self.method is PermCheckMethod.HASH:
            return 2.0 ** (-self.bits * self.iterations)
        return self.delta**self.iterations
