"""Cached expensive computations shared by several test modules."""

from functools import lru_cache

import numpy as np

from wallenergy.constants import ConstantsConfig, compute_alpha
from wallenergy.profile import Grid, HermiteProfile


@lru_cache(maxsize=None)
def alpha_default():
    return compute_alpha(ConstantsConfig())


def random_profile(seed: int, grid: Grid = Grid(0.0, 1.0, 12), amp: float = 1.0) -> HermiteProfile:
    """Generic smooth profile with P > 0 and C > 0."""
    rng = np.random.default_rng(seed)
    return HermiteProfile(grid, amp * rng.uniform(-1.5, 1.5, grid.n_cells + 1),
                          amp * rng.uniform(-3, 3, grid.n_cells + 1))
