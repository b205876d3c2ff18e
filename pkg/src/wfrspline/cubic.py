"""Natural cubic spline interpolation, used to estimate knot velocities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import OutOfRangeError, TimeOrderError


@dataclass(frozen=True, eq=False)
class KnotSeries:
    """Vector values ``values[i]`` at strictly increasing ``times[i]``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        y = np.asarray(self.values, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape[0] != t.shape[0]:
            raise ValueError(f"{t.shape[0]} times but {y.shape[0]} values")
        if t.shape[0] < 2:
            raise ValueError("at least two knots are needed")
        if np.any(np.diff(t) <= 0.0):
            raise TimeOrderError("knot times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)


@dataclass(frozen=True, eq=False)
class CubicFit:
    """A natural cubic interpolant: knots, velocities and second derivatives (moments)."""

    series: KnotSeries
    velocities: np.ndarray
    moments: np.ndarray


def natural_cubic_fit(series: KnotSeries) -> CubicFit:
    """Fit the natural cubic spline through ``series``.

    Each value component is fitted independently; the tridiagonal moment
    system is shared across components.  With two knots the result is the
    straight line.

    Returns
    -------
    CubicFit
        ``velocities[i]`` is the spline's first derivative at ``times[i]``.
    """
    t, y = series.times, series.values
    n = len(t)
    h = np.diff(t)
    slope = np.diff(y, axis=0) / h[:, None]
    M = np.zeros_like(y)
    if n > 2:
        ab = np.zeros((3, n - 2))
        ab[0, 1:] = h[1:-1]
        ab[1] = 2.0 * (h[:-1] + h[1:])
        ab[2, :-1] = h[1:-1]
        rhs = 6.0 * (slope[1:] - slope[:-1])
        M[1:-1] = solve_banded((1, 1), ab, rhs)
    v = np.empty_like(y)
    v[:-1] = slope - h[:, None] * (2.0 * M[:-1] + M[1:]) / 6.0
    v[-1] = slope[-1] + h[-1] * (M[-2] + 2.0 * M[-1]) / 6.0
    return CubicFit(series, v, M)


def cubic_eval(fit: CubicFit, t) -> np.ndarray:
    """Evaluate the fitted spline at ``t`` (scalar or array), exact at knots."""
    times, y, M = fit.series.times, fit.series.values, fit.moments
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < times[0]) or np.any(tt > times[-1]):
        raise OutOfRangeError(f"t outside [{times[0]}, {times[-1]}]")
    k = np.clip(np.searchsorted(times, tt, side="right") - 1, 0, len(times) - 2)
    h = (times[k + 1] - times[k])[:, None]
    a = (times[k + 1][:, None] - tt[:, None]) / h
    b = 1.0 - a
    out = (a * y[k] + b * y[k + 1]
           + ((a**3 - a) * M[k] + (b**3 - b) * M[k + 1]) * h**2 / 6.0)
    hit = np.searchsorted(times, tt)
    exact = (hit < len(times)) & (times[np.minimum(hit, len(times) - 1)] == tt)
    out[exact] = y[hit[exact]]
    return out[0] if np.ndim(t) == 0 else out
