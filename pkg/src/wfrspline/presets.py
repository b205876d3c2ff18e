"""Built-in experiment measures in one and two dimensions."""
from __future__ import annotations

import numpy as np

from .measures import (DiscreteMeasure, Grid, combine, gaussian_bump, grid_1d, grid_2d,
                       indicator_density, subsample_support)

ONE_DIM_SIGMA = 0.06
ONE_DIM_GRID = (-0.2, 1.2, 512)
ONE_DIM_TIMES = ((0.0, 1.0, 2.0, 10.0), (0.0, 10.0 / 3.0, 20.0 / 3.0, 10.0), (0.0, 8.0, 9.0, 10.0))

TWO_DIM_SIGMA = 0.01
TWO_DIM_GRID = (-0.35, 0.35, 96)
TWO_DIM_TIMES = ((0.0, 1.0, 2.0, 3.0),)
#: Default window radius for 2D bumps (absolute units about the bump centre).
TWO_DIM_RADIUS = 2.0
#: Subsampling draws from points whose weight exceeds this fraction of the maximum.
SUBSAMPLE_SUPPORT_TOL = float(np.exp(-2.0))
SUBSAMPLE_COUNT = 400


def one_dim_measures(sigma: float = ONE_DIM_SIGMA, grid: Grid | None = None):
    """Single bump, split bump, doubled split bump, and a flat plateau on [0, 1]."""
    g = grid_1d(*ONE_DIM_GRID) if grid is None else grid

    def bump(c):
        return gaussian_bump([c], sigma, 1.0, g)

    left, right = bump(0.3), bump(0.7)
    return [
        bump(0.5),
        combine(left, right, coefficients=[0.5, 0.5]),
        combine(left, right),
        indicator_density([0.0], [1.0], 0.5, g),
    ]


def two_dim_measures(sigma: float = TWO_DIM_SIGMA, grid: Grid | None = None,
                     radius: float | None = TWO_DIM_RADIUS):
    """Four 2D measures: a wide bump, three bumps, two bumps, a shifted wide bump."""
    g = grid_2d(*TWO_DIM_GRID) if grid is None else grid
    q = np.sqrt(2.0) / 20.0

    def bump(c, s):
        return gaussian_bump(c, s, 1.0, g, radius=radius)

    mu1 = combine(bump([0.0, 0.0], 2 * sigma), coefficients=[0.75])
    mu2 = combine(bump([q, q], sigma), bump([0.0, -q], sigma), bump([q, -q], sigma),
                  coefficients=[0.65, 0.65, 0.65])
    mu3 = combine(bump([0.15, 0.15], sigma), bump([0.15, -0.15], sigma), coefficients=[0.75, 0.75])
    mu4 = bump([0.2, 0.0], 2 * sigma)
    return [mu1, mu2, mu3, mu4]


def subsampled(measures, n: int = SUBSAMPLE_COUNT, seed: int = 0,
               support_tol: float = SUBSAMPLE_SUPPORT_TOL):
    """Replace each measure by ``n`` equal-weight points drawn from its support."""
    return [subsample_support(mu, n, seed + i, support_tol) for i, mu in enumerate(measures)]


PRESETS = ("one-dim", "two-dim-grid", "two-dim-subsample")


def preset(name: str, sigma: float | None = None, resolution: int | None = None,
           seed: int = 0, subsample: int | None = None, radius: float | None = None):
    """Measures and default knot-time sets of a named preset.

    Returns
    -------
    (list of DiscreteMeasure, tuple of tuple of float)
    """
    if name == "one-dim":
        lo, hi, n = ONE_DIM_GRID
        g = grid_1d(lo, hi, resolution or n)
        return one_dim_measures(sigma or ONE_DIM_SIGMA, g), ONE_DIM_TIMES
    if name in ("two-dim-grid", "two-dim-subsample"):
        lo, hi, n = TWO_DIM_GRID
        g = grid_2d(lo, hi, resolution or n)
        r = TWO_DIM_RADIUS if radius is None else radius
        mus = two_dim_measures(sigma or TWO_DIM_SIGMA, g, r)
        if name == "two-dim-subsample":
            mus = subsampled(mus, subsample or SUBSAMPLE_COUNT, seed)
        return mus, TWO_DIM_TIMES
    raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def measure_from_points(points, weights) -> DiscreteMeasure:
    return DiscreteMeasure(np.asarray(points, float), np.asarray(weights, float))
