"""Seeded random streams.

Every random draw in the package flows from one 64-bit master seed. Streams
are keyed by integer tuples (stage, substream, ...) through
``numpy.random.SeedSequence`` spawn keys and drive a counter-based Philox
generator, so any stream can be rebuilt independently of the others.
"""
from __future__ import annotations

import numpy as np

# stage indices used by the experiment runner
STAGE_MOMENTS = 1
STAGE_PSI = 2
STAGE_SGD = 3
STAGE_RECOVERY = 4
STAGE_DIAGNOSTICS = 5
STAGE_TRIALS = 6
STAGE_CALIBRATION = 7


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for ``(seed, keys)``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("an explicit seed or Generator is required")
    return substream(int(rng))
