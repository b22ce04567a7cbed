import logging
import math
from typing import List, NamedTuple, Optional, Tuple

from app.exceptions import InfeasibleConfiguration
from app.schemas.tuner import NamedConfig, TableRow, TuneResult
from app.utils.config_grammar import parse_sum_config

logger = logging.getLogger(__name__)

MAX_LOG2_RHAT = 30


class ReferenceOptimum(NamedTuple):
    budget_bits: int
    delta: float
    d: int
    log2_rhat: int
    iterations: int
    achieved: float


# numerically optimal (d, rhat, iterations) per message budget and failure bound
REFERENCE_OPTIMA: List[ReferenceOptimum] = [
    ReferenceOptimum(1024, 1e-4, 37, 8, 3, 3.0e-5),
    ReferenceOptimum(1024, 1e-6, 25, 7, 5, 2.5e-7),
    ReferenceOptimum(1024, 1e-8, 18, 7, 7, 4.1e-9),
    ReferenceOptimum(1024, 1e-10, 14, 6, 10, 2.5e-11),
    ReferenceOptimum(1024, 1e-20, 6, 4, 32, 3.3e-21),
    ReferenceOptimum(4096, 1e-6, 124, 10, 3, 7.4e-7),
    ReferenceOptimum(4096, 1e-10, 68, 9, 6, 2.1e-11),
    ReferenceOptimum(4096, 1e-20, 32, 8, 14, 4.4e-21),
    ReferenceOptimum(16384, 1e-7, 420, 12, 3, 1.8e-8),
    ReferenceOptimum(16384, 1e-10, 273, 11, 5, 1.2e-12),
    ReferenceOptimum(16384, 1e-20, 148, 10, 10, 7.6e-22),
    ReferenceOptimum(16384, 1e-30, 93, 10, 16, 1.3e-31),
    ReferenceOptimum(65536, 1e-10, 1170, 13, 4, 9.1e-13),
    ReferenceOptimum(65536, 1e-20, 630, 12, 8, 1.3e-22),
    ReferenceOptimum(65536, 1e-30, 420, 12, 12, 1.1e-31),
    ReferenceOptimum(65536, 1e-40, 321, 11, 17, 2.9e-42),
]

# (name, purpose, note)
NAMED_CONFIGS: List[Tuple[str, str, Optional[str]]] = [
    ("1x2m31", "accuracy", None),
    ("1x4m31", "accuracy", None),
    ("4x2m4", "accuracy", None),
    ("4x4m3", "accuracy", None),
    ("4x4m5", "accuracy", None),
    ("4x8m3", "accuracy", None),
    ("4x8m5", "accuracy", None),
    ("4x8m7", "accuracy", None),
    ("5x16m5", "scaling", None),
    ("6x32m9", "scaling", None),
    ("8x16m15", "scaling", None),
    ("16x16m15", "scaling", None),
    ("5x128m11", "scaling", None),
    ("4x256m15", "scaling", None),
    ("8x256m15", "scaling", "published table size 32769 is off by one"),
]


def _validate(d: int, rhat: int) -> None:
    if d < 2:
        raise ValueError(f"bucket count must be at least 2, got {d}")
    if rhat < d:
        raise ValueError(f"rhat={rhat} must be at least d={d}")


def achieved_delta(d: int, rhat: int, iterations: int) -> float:
    """(1/rhat + 1/d)^iterations, the failure bound of `iterations` independent rounds."""
    _validate(d, rhat)
    if iterations < 1:
        raise ValueError(f"iterations must be positive, got {iterations}")
    return (1 / rhat + 1 / d) ** iterations


def iterations_needed(d: int, rhat: int, delta: float) -> int:
    """Smallest t with (1/rhat + 1/d)^t <= delta."""
    _validate(d, rhat)
    base = 1 / rhat + 1 / d
    if base >= 1:
        raise ValueError(f"d={d}, rhat={rhat} give a per-iteration bound of {base}, which never shrinks")
    if delta >= 1:
        return 1
    # start near the logarithmic estimate, then settle on exact powers
    t = max(1, math.ceil(math.log(delta) / math.log(base)) - 1)
    while base**t > delta:
        t += 1
    while t > 1 and base ** (t - 1) <= delta:
        t -= 1
    return t


def optimize(budget_bits: int, delta: float) -> TuneResult:
    """Exhaustive search over power-of-two rhat for the fewest iterations within the budget.

    Ties go to the smaller achieved bound, then to the smaller payload.
    """
    if budget_bits < 8 or not 0 < delta < 1:
        raise ValueError(f"need budget >= 8 bits and 0 < delta < 1, got {budget_bits}, {delta}")
    best = None
    for log2_rhat in range(1, MAX_LOG2_RHAT + 1):
        rhat = 2**log2_rhat
        width = log2_rhat + 1
        t = 1
        while True:
            # the largest table that fits gives the smallest bound for this t
            d = min(rhat, budget_bits // (width * t))
            if d < 2:
                break
            base = 1 / rhat + 1 / d
            if base < 1 and base**t <= delta:
                candidate = (t, base**t, d * width * t, d, rhat)
                if best is None or candidate[:3] < best[:3]:
                    best = candidate
                break
            t += 1
    if best is None:
        raise InfeasibleConfiguration(f"no configuration reaches delta={delta} within {budget_bits} bits")
    iterations, achieved, payload, d, rhat = best
    logger.info(f"b={budget_bits}, delta={delta}: d={d}, rhat=2^{rhat.bit_length() - 1}, its={iterations}")
    return TuneResult(
        budget_bits=budget_bits,
        target_delta=delta,
        d=d,
        rhat=rhat,
        iterations=iterations,
        achieved_delta=achieved,
        payload_bits=payload,
    )


def reference_table() -> List[TableRow]:
    rows = []
    for row in REFERENCE_OPTIMA:
        try:
            result = optimize(row.budget_bits, row.delta)
        except InfeasibleConfiguration:
            result = None
        rows.append(TableRow(budget_bits=row.budget_bits, delta=row.delta, result=result))
    return rows


def named_configs() -> List[NamedConfig]:
    out = []
    for name, purpose, note in NAMED_CONFIGS:
        config = parse_sum_config(name)
        out.append(
            NamedConfig(
                name=name,
                iterations=config.iterations,
                d=config.d,
                log2_rhat=config.rhat.bit_length() - 1,
                table_bits=config.payload_bits,
                delta=config.delta,
                purpose=purpose,
                comment=note,
            )
        )
    return out
