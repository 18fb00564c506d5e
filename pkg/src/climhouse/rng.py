"""Per-path random streams.

Every path owns a counter-based Philox stream keyed by ``(seed, stream, path)``,
so path ``i`` draws the same numbers no matter how many paths are simulated
or how the work is split.
"""

from __future__ import annotations

import numpy as np

ECONOMY = 0
HOUSING = 1

_MASK64 = (1 << 64) - 1


def path_generator(seed: int, path: int, stream: int = ECONOMY) -> np.random.Generator:
    """Generator for one path; the Philox key packs the seed and the (stream, path) pair."""
    if path < 0 or stream < 0:
        raise ValueError("path and stream indices must be non-negative")
    key = np.array([int(seed) & _MASK64, ((int(stream) << 48) | int(path)) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normals(
    seed: int,
    n_paths: int,
    shape: tuple[int, ...],
    stream: int = ECONOMY,
    first_path: int = 0,
) -> np.ndarray:
    """Array of shape ``(n_paths, *shape)``; row ``i`` comes from path ``first_path + i``."""
    out = np.empty((n_paths, *shape))
    for i in range(n_paths):
        out[i] = path_generator(seed, first_path + i, stream).standard_normal(shape)
    return out
