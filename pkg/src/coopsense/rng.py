"""Seed derivation.

Every random stream in the package comes from a master seed plus an integer
key path, so realizations can be generated in any order (or in parallel)
and still reproduce bit-for-bit.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

# stream tags used in key paths
SCENARIO = 1
GA = 2
SIMULATION = 3
SWEEP = 4


def seed_sequence(seed, *key):
    return np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(k) for k in key))


def make_rng(seed, *key):
    """Generator for ``seed`` (any 64-bit integer, negative allowed) and key path."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def derive_seed(seed, *key):
    """Child integer seed for the substream ``key`` of ``seed``."""
    return int(seed_sequence(seed, *key).generate_state(1, dtype=np.uint64)[0])
