from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from app.schemas.simnet import LedgerReport


class WorkloadKind(str, Enum):
    POWER_LAW = "powerlaw"
    UNIFORM = "uniform"


class Workload(BaseModel):
    kind: WorkloadKind = WorkloadKind.POWER_LAW
    n: int = Field(..., ge=0, description="Element count")
    seed: int = Field(0, ge=0, lt=2**64)
    distinct_keys: int = Field(1_000_000, ge=0, description="N of the power law")
    lo: int = Field(0, ge=0)
    hi: int = Field(10**8 - 1, ge=0)

    @model_validator(mode="after")
    def bounds_ordered(self):
        if self.kind is WorkloadKind.UNIFORM and self.lo > self.hi:
            raise ValueError(f"empty uniform range {self.lo}..{self.hi}")
        return self


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class ExperimentResult(BaseModel):
    checker: str
    config: str
    manipulator: str
    pes: int
    elements: int
    trials: int
    failures: int = Field(..., ge=0, description="False accepts (or false rejects in correct-run mode)")
    observed_rate: float
    expected_delta: float
    ratio: Optional[float] = None
    bottleneck_volume: int = 0
    rounds: int = 0
    ledger: Optional[LedgerReport] = Field(None, description="Per-PE ledger of one checker run, JSON output only")

    @model_validator(mode="after")
    def failures_bounded(self):
        if self.failures > self.trials:
            raise ValueError(f"{self.failures} failures in {self.trials} trials")
        return self


class AccuracyRequest(BaseModel):
    checker: str = "sum"
    config: str = "1x2m31-crc"
    manipulator: Optional[str] = "randkey"
    pes: int = Field(4, ge=1, le=64)
    elements: int = Field(2_000, ge=1, le=200_000)
    trials: int = Field(200, ge=1, le=5_000)
    seed: int = Field(42, ge=0)
    full_ledger: bool = False


class CostRow(BaseModel):
    checker: str
    config: str
    pes: int
    elements: int
    bottleneck_volume: int
    rounds: int
    total_bits: int
    messages: int


class CostRequest(BaseModel):
    checker: str = "sum"
    config: str = "4x4m3-crc"
    sizes: List[int] = Field(default_factory=lambda: [1_000, 10_000])
    pes: int = Field(8, ge=1, le=64)
    seed: int = Field(42, ge=0)


class WorkloadRequest(BaseModel):
    kind: WorkloadKind = WorkloadKind.POWER_LAW
    elements: int = Field(10_000, ge=0, le=1_000_000)
    pes: int = Field(4, ge=1, le=64)
    distinct_keys: int = Field(1_000_000, ge=0)
    lo: int = 0
    hi: int = 10**8 - 1
    seed: int = 42


class WorkloadSummary(BaseModel):
    kind: WorkloadKind
    pe_sizes: List[int]
    distinct: int
    top_keys: List[List[int]]
