"""Seeded random streams.

Every stream is a NumPy ``Generator`` over the Philox-4x64 counter-based bit
generator. Independent child streams come from ``SeedSequence(seed,
spawn_key=(i,))``, so stream ``i`` of seed ``s`` is the same regardless of
how many other streams were drawn before it.
"""
from __future__ import annotations

import numpy as np

# named child streams used by the training/evaluation pipeline
TRAIN_DATA, TEST_DATA, INIT, SHUFFLE, PROBE = range(5)


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    if stream is None:
        ss = np.random.SeedSequence(int(seed))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(rng) -> np.random.Generator:
    """Pass generators through; turn ints (or None, meaning 0) into Philox streams."""
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(0 if rng is None else rng)
