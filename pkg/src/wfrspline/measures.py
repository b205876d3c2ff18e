"""Discrete nonnegative measures, their cone lifts, and test-measure builders."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, EmptyMeasureError, ScaleError


def _freeze(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i weights[i] * delta(points[i])``.

    No normalization is imposed; total mass is arbitrary.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if pts.ndim == 1:
            pts = pts.reshape(len(w), -1) if len(w) else pts.reshape(0, 1)
        if pts.ndim != 2:
            raise DimensionError(f"points must be an (n, d) array, got shape {pts.shape}")
        if pts.shape[0] != w.shape[0]:
            raise DimensionError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if np.any(~np.isfinite(w)) or np.any(w < 0.0):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(~np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", _freeze(pts))
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.weights.shape[0]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def positive(self):
        """Indices of support points with positive weight."""
        return np.flatnonzero(self.weights > 0.0)

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    def __add__(self, other):
        """Concatenate supports (the sum of the two measures)."""
        if self.dim != other.dim:
            raise DimensionError("cannot add measures of different dimension")
        return DiscreteMeasure(np.vstack([self.points, other.points]),
                               np.concatenate([self.weights, other.weights]))

    def scaled(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, c * self.weights)


def total_mass(mu: DiscreteMeasure) -> float:
    return mu.mass


@dataclass(frozen=True, eq=False)
class LiftedMeasure:
    """Weighted particles on the cone: positions, masses ``r`` and weights."""

    positions: np.ndarray
    radii: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        r = np.array(self.radii, dtype=float).reshape(-1)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if x.ndim != 2 or not (x.shape[0] == r.shape[0] == w.shape[0]):
            raise DimensionError("positions, radii and weights must agree in length")
        if np.any(w < 0.0) or np.any(r < 0.0):
            raise ValueError("radii and weights must be nonnegative")
        x = x.copy()
        x[r == 0.0] = 0.0
        object.__setattr__(self, "positions", _freeze(x))
        object.__setattr__(self, "radii", _freeze(r))
        object.__setattr__(self, "weights", _freeze(w))

    def __len__(self):
        return self.weights.shape[0]


def canonical_lift(mu: DiscreteMeasure) -> LiftedMeasure:
    """Lift with every particle at unit mass coordinate, carrying the point weight."""
    return LiftedMeasure(mu.points, np.ones(len(mu)), mu.weights)


def project_lift(lam: LiftedMeasure) -> DiscreteMeasure:
    """Project to R^d: particle ``(x, r)`` with weight ``w`` contributes ``w r^2`` at ``x``."""
    return DiscreteMeasure(lam.positions, lam.weights * lam.radii**2)


# --- grids and kernel builders -------------------------------------------

@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid: node coordinates and the volume of one cell."""

    points: np.ndarray
    cell_volume: float
    shape: tuple

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def grid_1d(lo: float, hi: float, n: int) -> Grid:
    if n < 2:
        raise ValueError("a grid needs at least 2 nodes per axis")
    x = np.linspace(lo, hi, n)
    return Grid(x[:, None], (hi - lo) / (n - 1), (n,))


def grid_2d(lo: float, hi: float, n: int) -> Grid:
    """Square ``[lo, hi]^2`` grid with ``n`` nodes per axis, row-major in (x1, x2)."""
    if n < 2:
        raise ValueError("a grid needs at least 2 nodes per axis")
    ax = np.linspace(lo, hi, n)
    g1, g2 = np.meshgrid(ax, ax, indexing="ij")
    pts = np.column_stack([g1.ravel(), g2.ravel()])
    h = (hi - lo) / (n - 1)
    return Grid(pts, h * h, (n, n))


def gaussian_bump(center, sigma: float, amplitude: float, grid: Grid, radius=None) -> DiscreteMeasure:
    """Truncated Gaussian kernel sampled on ``grid`` times the cell volume.

    The density is ``amplitude * exp(-|x - center|^2 / (2 sigma^2))`` where
    ``|x - center| <= radius`` and zero elsewhere.  ``radius`` defaults to
    ``2 sigma`` in one dimension and to ``2`` (a ball of radius two about the
    centre, in absolute units) in higher dimensions.
    """
    if not sigma > 0.0:
        raise ScaleError(f"sigma must be positive, got {sigma}")
    if amplitude < 0.0:
        raise ValueError("amplitude must be nonnegative")
    if len(grid.points) == 0:
        raise ValueError("grid is empty")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape[0] != grid.dim:
        raise DimensionError("center and grid dimensions differ")
    if radius is None:
        radius = 2.0 * sigma if grid.dim == 1 else 2.0
    d2 = np.sum((grid.points - center) ** 2, axis=1)
    dens = amplitude * np.exp(-d2 / (2.0 * sigma**2))
    dens = np.where(d2 <= radius**2, dens, 0.0)
    return DiscreteMeasure(grid.points, dens * grid.cell_volume)


def indicator_density(lo, hi, level: float, grid: Grid) -> DiscreteMeasure:
    """Constant density ``level`` on the box ``[lo, hi]`` sampled on ``grid``."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (grid.dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (grid.dim,))
    inside = np.all((grid.points >= lo) & (grid.points <= hi), axis=1)
    return DiscreteMeasure(grid.points, np.where(inside, level * grid.cell_volume, 0.0))


def combine(*measures: DiscreteMeasure, coefficients=None) -> DiscreteMeasure:
    """Pointwise weighted sum of measures sharing one support."""
    base = measures[0].points
    coefficients = [1.0] * len(measures) if coefficients is None else coefficients
    w = np.zeros(len(base))
    for c, mu in zip(coefficients, measures):
        if mu.points.shape != base.shape or not np.array_equal(mu.points, base):
            raise DimensionError("combine needs measures on the same support")
        w = w + c * mu.weights
    return DiscreteMeasure(base, w)


def subsample_support(mu: DiscreteMeasure, n: int, seed: int, support_tol: float = 0.0) -> DiscreteMeasure:
    """Draw ``n`` support points uniformly and give each ``mass / n``.

    Points are drawn without replacement from the support (weights above
    ``support_tol`` times the largest weight), with replacement once ``n``
    exceeds the support size.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    wmax = float(np.max(mu.weights)) if len(mu) else 0.0
    support = np.flatnonzero(mu.weights > support_tol * wmax) if wmax > 0 else np.array([], int)
    if support.size == 0:
        raise EmptyMeasureError("measure has no positive-weight support")
    rng = np.random.default_rng(seed)
    idx = rng.choice(support, size=n, replace=n > support.size)
    return DiscreteMeasure(mu.points[idx], np.full(n, mu.mass / n))


# --- CSV format ----------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def measure_to_csv(mu: DiscreteMeasure) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{k + 1}" for k in range(mu.dim)] + ["mass"])
    for p, w in zip(mu.points, mu.weights):
        writer.writerow([_fmt(v) for v in p] + [_fmt(w)])
    return buf.getvalue()


def write_measure(mu: DiscreteMeasure, path) -> None:
    Path(path).write_text(measure_to_csv(mu), encoding="utf-8")


def parse_measure(text: str, source: str = "<string>") -> DiscreteMeasure:
    """Parse the ``x1,...,xd,mass`` CSV format."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError(f"{source}: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    expected = [f"x{k + 1}" for k in range(d)] + ["mass"]
    if d < 1 or header != expected:
        raise ValueError(f"{source}: header must be {','.join(expected) if d >= 1 else 'x1,...,xd,mass'}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != d + 1:
            raise ValueError(f"{source}:{lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    arr = np.array(data, dtype=float).reshape(-1, d + 1)
    return DiscreteMeasure(arr[:, :d], arr[:, d])


def read_measure(path) -> DiscreteMeasure:
    path = Path(path)
    return parse_measure(path.read_text(encoding="utf-8"), str(path))
