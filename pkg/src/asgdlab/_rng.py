"""Counter-based seed derivation.

Every stochastic path owns its own generator, keyed by ``(master seed, path
index, stream)``.  Results therefore do not depend on how paths are batched or
in which order they are evaluated.
"""
from __future__ import annotations

import numpy as np

NOISE_STREAM = 0
STALENESS_STREAM = 1


def path_generator(seed: int, index: int, stream: int = NOISE_STREAM) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


class PathStreams:
    """Independent per-path generators with batched draws."""

    def __init__(self, seed: int, n_paths: int, stream: int = NOISE_STREAM):
        self.generators = [path_generator(seed, i, stream) for i in range(n_paths)]

    def __len__(self) -> int:
        return len(self.generators)

    def standard_normal(self, shape: tuple[int, ...]) -> np.ndarray:
        """Array of shape ``(n_paths, *shape)``; row ``i`` comes from path ``i`` only."""
        return np.stack([g.standard_normal(shape) for g in self.generators])

    def random(self, shape: tuple[int, ...]) -> np.ndarray:
        return np.stack([g.random(shape) for g in self.generators])


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for a sweep point, a pure function of ``(seed, keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys) + (7,))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
