"""Parsing and formatting of checker configuration strings.

Sum-type checkers: `<its>x<d>[m<log2 rhat>][-<hash>]`, e.g. `4x8m5-tab`; m defaults to 31.
Permutation checkers: `[<its>x]<hash><bits>`, e.g. `crc12`, `2xtab8`, or
`[<its>x]poly[<log2 1/delta>]` for the polynomial check (default delta 2^-32).
"""

import math
import re

from app.schemas.checkers import PermCheckConfig, PermCheckMethod, SumCheckConfig
from app.schemas.hashing import HashFamily, HashSpec

DEFAULT_LOG2_RHAT = 31
DEFAULT_POLY_LOG2_DELTA = 32

_SUM_RE = re.compile(r"^(\d+)x(\d+)(?:m(\d+))?(?:-(crc|tab64|tab))?$")
_HASH_PERM_RE = re.compile(r"^(?:(\d+)x)?(crc|tab64|tab)(\d+)$")
_POLY_PERM_RE = re.compile(r"^(?:(\d+)x)?poly(\d+)?$")


def parse_sum_config(
    text: str,
    hash_seed: int = 0,
    modulus_seed: int = 0,
    default_hash: HashFamily = HashFamily.CRC32C,
) -> SumCheckConfig:
    match = _SUM_RE.match(text.strip().lower())
    if not match:
        raise ValueError(f"Invalid sum checker configuration: {text!r} (expected e.g. 4x8m5-tab)")
    its, d, log2_rhat, family = match.groups()
    log2_rhat = int(log2_rhat) if log2_rhat is not None else DEFAULT_LOG2_RHAT
    return SumCheckConfig(
        iterations=int(its),
        d=int(d),
        rhat=2**log2_rhat,
        hash=HashSpec(family=HashFamily(family) if family else default_hash, seed=hash_seed),
        modulus_seed=modulus_seed,
    )


def format_sum_config(config: SumCheckConfig) -> str:
    log2_rhat = config.rhat.bit_length() - 1
    return f"{config.iterations}x{config.d}m{log2_rhat}-{config.hash.family.value}"


def parse_perm_config(text: str, seed: int = 0) -> PermCheckConfig:
    lowered = text.strip().lower()
    match = _HASH_PERM_RE.match(lowered)
    if match:
        its, family, bits = match.groups()
        return PermCheckConfig(
            method=PermCheckMethod.HASH,
            hash=HashSpec(family=HashFamily(family), seed=seed),
            bits=int(bits),
            iterations=int(its) if its else 1,
            seed=seed,
        )
    match = _POLY_PERM_RE.match(lowered)
    if match:
        its, log2_delta = match.groups()
        log2_delta = int(log2_delta) if log2_delta else DEFAULT_POLY_LOG2_DELTA
        return PermCheckConfig(
            method=PermCheckMethod.POLYNOMIAL,
            delta=2.0**-log2_delta,
            iterations=int(its) if its else 1,
            seed=seed,
        )
    raise ValueError(f"Invalid permutation checker configuration: {text!r} (expected e.g. crc12 or poly)")


def format_perm_config(config: PermCheckConfig) -> str:
    prefix = f"{config.iterations}x" if config.iterations > 1 else ""
    if config.method is PermCheckMethod.POLYNOMIAL:
        return f"{prefix}poly{round(-math.log2(config.delta))}"
    return f"{prefix}{config.hash.family.value}{config.bits}"
