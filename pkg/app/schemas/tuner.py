from typing import Optional

from pydantic import BaseModel, Field, model_validator


class TuneResult(BaseModel):
    budget_bits: int
    target_delta: float
    d: int
    rhat: int
    iterations: int
    achieved_delta: float
    payload_bits: int

    @model_validator(mode="after")
    def within_budget(self):
        if self.payload_bits > self.budget_bits:
            raise ValueError(f"payload {self.payload_bits} exceeds budget {self.budget_bits}")
        return self

    @property
    def log2_rhat(self) -> int:
        return self.rhat.bit_length() - 1


class TuneRequest(BaseModel):
    budget_bits: int = Field(..., ge=8)
    delta: float = Field(..., gt=0, lt=1)


class NamedConfig(BaseModel):
    name: str
    iterations: int
    d: int
    log2_rhat: int
    table_bits: int
    delta: float
    purpose: str
    comment: Optional[str] = None


class TableRow(BaseModel):
    budget_bits: int
    delta: float
    result: Optional[TuneResult]
