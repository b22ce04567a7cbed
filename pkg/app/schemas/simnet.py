from typing import List

from pydantic import BaseModel, Field


class ClusterConfig(BaseModel):
    p: int = Field(..., ge=1, description="Number of processing elements")
    alpha: float = Field(1.0, ge=0, description="Startup cost per message")
    beta: float = Field(1.0, ge=0, description="Cost per bit")
    byte_granularity: bool = Field(False, description="Round message sizes up to whole bytes")


class PeCost(BaseModel):
    sent_bits: int
    recv_bits: int
    sent_msgs: int
    recv_msgs: int
    time: float


class LedgerReport(BaseModel):
    pe: List[PeCost]
    bottleneck_volume: int
    rounds: int
