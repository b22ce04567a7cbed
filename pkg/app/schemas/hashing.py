from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class HashFamily(str, Enum):
    CRC32C = "crc"
    TAB32 = "tab"
    TAB64 = "tab64"

    @property
    def width(self) -> int:
        return 64 if self is HashFamily.TAB64 else 32

    @property
    def label(self) -> str:
        return {"crc": "CRC", "tab": "Tab", "tab64": "Tab64"}[self.value]


class HashSpec(BaseModel):
    """A seeded member of a hash family. Equal specs give equal functions everywhere."""

    model_config = ConfigDict(frozen=True)

    family: HashFamily = HashFamily.CRC32C
    seed: int = Field(0, ge=0, lt=2**64)


class SlicePlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_slices: int = Field(..., ge=1)
    bits_per_slice: int = Field(..., ge=1)
    source_width: int = 64

    @model_validator(mode="after")
    def check_fits(self):
        if self.source_width not in (32, 64):
            raise ValueError(f"source width must be 32 or 64, got {self.source_width}")
        if self.num_slices * self.bits_per_slice > self.source_width:
            raise ValueError(
                f"{self.num_slices} slices of {self.bits_per_slice} bits exceed the "
                f"{self.source_width}-bit hash value"
            )
        return self
