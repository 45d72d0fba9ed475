"""Counter-based splittable randomness.

Every stochastic routine takes an integer seed and derives independent Philox
streams through SeedSequence spawn keys, so sample i sees the same stream no
matter how work is batched or threaded.
"""

import numpy as np


def spawn_rng(seed, *path):
    """Generator for the stream at (seed, path); same inputs, same stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
