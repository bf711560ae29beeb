# lapinfer/simulate/rng.py
"""
Random streams for the simulation engine.

Every random draw in a study comes from a generator keyed by
``(seed, rung, replicate, stage)``:

    Generator(PCG64(SeedSequence([seed, rung, replicate, stage])))

so the draws of one replicate depend only on that key, never on the order in
which replicates are executed or on the number of worker processes.
"""

from enum import IntEnum
from typing import Union

import numpy as np

from lapinfer.errors import ensure

SeedLike = Union[int, np.random.Generator]


class Stage(IntEnum):
    """Stage tags separating the streams used for different draws."""

    TOPOLOGY = 1
    REWIRE = 2
    SIGMA = 3
    SERIES_1 = 4
    SERIES_2 = 5
    CLT = 6
    COHORT = 7
    EDGES = 8


def stream(seed: int, rung: int = 0, replicate: int = 0, stage: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, rung, replicate, stage) key."""
    for name, value in (("seed", seed), ("rung", rung), ("replicate", replicate), ("stage", stage)):
        ensure(f"{name} must be a non-negative integer, got {value!r}", int(value) == value and value >= 0)
    entropy = [int(seed), int(rung), int(replicate), int(stage)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_generator(seed: SeedLike) -> np.random.Generator:
    """Pass generators through; turn an integer seed into its stage-0 stream."""
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 32-bit integer seed for libraries that take plain integer seeds."""
    return int(rng.integers(0, 2**32 - 1))
