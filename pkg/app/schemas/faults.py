from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ManipulationKind(str, Enum):
    BITFLIP = "bitflip"
    RAND_KEY = "randkey"
    SWITCH_VALUES = "switchvalues"
    INC_KEY = "inckey"
    INC_DEC = "incdec"
    INCREMENT = "increment"
    RANDOMIZE = "randomize"
    RESET = "reset"
    SET_EQUAL = "setequal"


# key/value aggregation manipulators and permutation/sort manipulators
SUM_KINDS = frozenset(
    {
        ManipulationKind.BITFLIP,
        ManipulationKind.RAND_KEY,
        ManipulationKind.SWITCH_VALUES,
        ManipulationKind.INC_KEY,
        ManipulationKind.INC_DEC,
    }
)
PERM_KINDS = frozenset(
    {
        ManipulationKind.BITFLIP,
        ManipulationKind.INCREMENT,
        ManipulationKind.RANDOMIZE,
        ManipulationKind.RESET,
        ManipulationKind.SET_EQUAL,
    }
)


class TargetStream(str, Enum):
    INPUT = "input"
    OUTPUT = "output"


class Manipulation(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ManipulationKind
    seed: int = Field(0, ge=0, lt=2**64)
    target: TargetStream = TargetStream.INPUT
    n: int = Field(1, ge=1, description="IncDec pair count")

    @model_validator(mode="after")
    def n_only_for_incdec(self):
        if self.kind is not ManipulationKind.INC_DEC and self.n != 1:
            raise ValueError(f"parameter n only applies to incdec, not {self.kind.value}")
        return self

    @property
    def name(self) -> str:
        if self.kind is ManipulationKind.INC_DEC:
            return f"incdec{self.n}"
        return self.kind.value

    @classmethod
    def parse(cls, name: str, seed: int = 0, target: TargetStream = TargetStream.INPUT) -> "Manipulation":
        """Build a manipulation from its CLI name (`bitflip`, ..., `incdec1`, `incdec2`)."""
        lowered = name.strip().lower()
        if lowered.startswith(ManipulationKind.INC_DEC.value):
            suffix = lowered[len(ManipulationKind.INC_DEC.value):] or "1"
            if not suffix.isdigit():
                raise ValueError(f"Unknown manipulator: {name}")
            return cls(kind=ManipulationKind.INC_DEC, n=int(suffix), seed=seed, target=target)
        try:
            kind = ManipulationKind(lowered)
        except ValueError:
            raise ValueError(f"Unknown manipulator: {name}") from None
        return cls(kind=kind, seed=seed, target=target)
