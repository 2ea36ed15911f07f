"""Counter-based seed splitting.

Every random draw in the package comes from a generator produced by
:func:`spawn`, so one root seed yields independent, reproducible streams
for each (module, index) pair without any global RNG state.
"""

import numpy as np

# Namespace constants keep child streams from colliding across modules.
NS_RESET = 0
NS_COLLECT = 1
NS_SPLIT = 2
NS_NET = 3
NS_TRAIN = 4
NS_GAMES = 5


def spawn(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path).

    Identical arguments always produce an identical stream; distinct
    paths are statistically independent.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))
