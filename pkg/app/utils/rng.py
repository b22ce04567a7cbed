import numpy as np

PRNG_NAME = "MT19937"

# fixed stream ids, one per consumer of a master seed
TABLE_STREAM = 0
MODULUS_STREAM = 1
FAULT_STREAM = 2
POLY_STREAM = 3
WORKLOAD_STREAM = 4
VALUE_STREAM = 5
TRIAL_STREAM = 6
SAMPLE_STREAM = 7


def _entropy(seed: int) -> list[int]:
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return [seed & 0xFFFFFFFF, seed >> 32]


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """MT19937 generator for the stream `stream` under master seed `seed`."""
    seq = np.random.SeedSequence(_entropy(seed), spawn_key=tuple(stream))
    return np.random.Generator(np.random.MT19937(seq))


def derive_seed(seed: int, *stream: int) -> int:
    seq = np.random.SeedSequence(_entropy(seed), spawn_key=tuple(stream))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
