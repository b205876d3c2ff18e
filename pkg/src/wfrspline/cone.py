"""Geometry of the mass-position cone.

A cone point is a pair ``(x, r)`` of a position in R^d and a nonnegative
mass coordinate.  All points with ``r = 0`` are the same point, the vertex.
The distance, Riemannian metric and geodesics below are exact closed forms;
the covariant acceleration of an arbitrary path is estimated by finite
differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StepError, VertexError

HALF_PI = 0.5 * np.pi
#: Below this angular separation the local-time ratio uses its series limit.
SMALL_ANGLE = 1e-6
DEFAULT_STEP = 1e-4


def _as_position(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError(f"position must be a vector, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class ConePoint:
    """A position-mass pair on the cone.

    Points with ``r == 0`` are canonicalized to the zero position so that
    every representative of the vertex compares and hashes equal.
    """

    x: np.ndarray
    r: float

    def __post_init__(self):
        x = _as_position(self.x)
        r = float(self.r)
        if not r >= 0.0:
            raise ValueError(f"mass coordinate must be nonnegative, got {r}")
        if r == 0.0:
            x = np.zeros_like(x)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", r)

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    @property
    def is_vertex(self) -> bool:
        return self.r == 0.0

    def __eq__(self, other):
        if not isinstance(other, ConePoint):
            return NotImplemented
        if self.is_vertex or other.is_vertex:
            return self.is_vertex and other.is_vertex
        return self.r == other.r and np.array_equal(self.x, other.x)

    def __hash__(self):
        if self.is_vertex:
            return hash(("vertex",))
        return hash((tuple(self.x.tolist()), self.r))

    def __repr__(self):
        return f"ConePoint(x={self.x.tolist()}, r={self.r!r})"


@dataclass(frozen=True)
class ConeTangent:
    """Tangent vector ``(v, p)``: spatial velocity and mass rate."""

    v: np.ndarray
    p: float | np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(p))):
            raise ValueError("tangent components must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "p", float(p) if p.ndim == 0 else p)


def cone_distance(a: ConePoint, b: ConePoint) -> float:
    """Cone distance between two points.

    Uses ``d^2 = (r0 - r1)^2 + 4 r0 r1 sin^2(theta / 2)`` with
    ``theta = |x0 - x1| ^ pi``, which equals the textbook
    ``r0^2 + r1^2 - 2 r0 r1 cos(theta)`` without its cancellation for
    nearby points.  It is evaluated as a ``hypot`` of the two legs so tiny
    masses do not underflow and the distance to the vertex is exactly ``r``.
    """
    return float(cone_distance_arrays(a.x, a.r, b.x, b.r))


def cone_distance_arrays(x0, r0, x1, r1):
    """Vectorized :func:`cone_distance` over leading axes."""
    theta = np.minimum(np.linalg.norm(np.asarray(x0) - np.asarray(x1), axis=-1), np.pi)
    r0, r1 = np.asarray(r0, dtype=float), np.asarray(r1, dtype=float)
    leg = 2.0 * np.sqrt(r0) * np.sqrt(r1) * np.sin(0.5 * theta)
    return np.hypot(r0 - r1, leg)


def cone_inner(base: ConePoint, u: ConeTangent, w: ConeTangent) -> float:
    """Riemannian inner product ``<u.v, w.v> r^2 + u.p w.p`` at ``base``."""
    if base.r <= 0.0:
        raise VertexError("the cone metric degenerates at the vertex")
    return float(np.dot(u.v, w.v) * base.r**2 + u.p * w.p)


def geodesic_arrays(x0, r0, x1, r1, t, *, limit=HALF_PI, error=DomainError):
    """Closed-form cone geodesic, broadcast over leading axes.

    Parameters
    ----------
    x0, x1 : ndarray, shape (..., d)
        Endpoint positions.
    r0, r1 : ndarray, shape (...)
        Endpoint masses.
    t : float or ndarray
        Geodesic times, broadcastable against ``r0``.
    limit : float
        Pairs with ``|x0 - x1| >= limit`` raise ``error``.

    Returns
    -------
    x : ndarray, shape (..., d)
    r : ndarray, shape (...)

    Notes
    -----
    The geodesic is the straight segment between ``r0`` and
    ``r1 exp(i theta)`` in the plane spanned by the two rays, so the local
    time is ``atan2(t r1 sin(theta), (1-t) r0 + t r1 cos(theta)) / theta``,
    the same angle as the arccos form but well conditioned near its ends.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    r1 = np.asarray(r1, dtype=float)
    t = np.asarray(t, dtype=float)

    diff = x1 - x0
    theta = np.linalg.norm(diff, axis=-1)
    if np.any(theta >= limit):
        raise error(
            f"positions {float(np.max(theta)):.6g} apart; geodesics are restricted to < {limit:.6g}"
        )
    moving = theta > 0.0
    if np.any(moving & ((r0 == 0.0) | (r1 == 0.0))):
        raise VertexError("local time is undefined for a vertex endpoint at positive separation")

    shape = np.broadcast_shapes(theta.shape, r0.shape, r1.shape, t.shape)
    theta, r0, r1, t = (np.broadcast_to(a, shape) for a in (theta, r0, r1, t))
    a = (1.0 - t) * r0 + t * r1 * np.cos(theta)
    b = t * r1 * np.sin(theta)
    r = np.hypot(a, b)

    small = theta < SMALL_ANGLE
    safe_theta = np.where(small, 1.0, theta)
    rho = np.arctan2(b, a) / safe_theta
    lin = (1.0 - t) * r0 + t * r1
    series = np.divide(t * r1, lin, out=np.array(t, copy=True), where=lin > 0.0)
    rho = np.where(small, series, rho)

    x = x0 + rho[..., None] * np.broadcast_to(diff, shape + diff.shape[-1:])
    at0 = (t == 0.0)[..., None]
    at1 = (t == 1.0)[..., None]
    x = np.where(at0, np.broadcast_to(x0, x.shape), x)
    x = np.where(at1, np.broadcast_to(x1, x.shape), x)
    r = np.where(t == 0.0, r0, np.where(t == 1.0, r1, r))
    return x, r


def geodesic_eval(z0: ConePoint, z1: ConePoint, t: float) -> ConePoint:
    """Point at time ``t`` on the constant-speed geodesic from ``z0`` to ``z1``.

    Raises
    ------
    DomainError
        If the positions are ``pi/2`` or more apart.
    VertexError
        If an endpoint is the vertex and the positions differ.
    """
    if z0.dim != z1.dim:
        raise ValueError("endpoint dimensions differ")
    x, r = geodesic_arrays(z0.x, z0.r, z1.x, z1.r, float(t))
    return ConePoint(x, float(r))


class ConePath:
    """A curve ``t -> (x(t), r(t))`` on ``[start, stop]``.

    ``func(t, anchor)`` receives float arrays of equal shape ``T`` and returns
    positions of shape ``T + B + (d,)`` and masses of shape ``T + B`` where
    ``B`` is an optional batch shape (a bundle of particles sharing a clock).
    ``anchor`` names the stencil centre; paths built from a discrete grid use
    it so that every sample of one stencil comes from the same local
    polynomial.  ``breaks`` lists interior times where the path is only C^1.
    """

    def __init__(self, func, start=0.0, stop=1.0, breaks=()):
        if not stop > start:
            raise ValueError("path interval must have positive length")
        self._func = func
        self.start = float(start)
        self.stop = float(stop)
        self.breaks = tuple(sorted(float(b) for b in breaks if start < b < stop))

    def evaluate(self, t, anchor=None):
        t = np.asarray(t, dtype=float)
        anchor = t if anchor is None else np.broadcast_to(np.asarray(anchor, dtype=float), t.shape)
        return self._func(t, anchor)

    def __call__(self, t):
        x, r = self.evaluate(t)
        if x.ndim == 1:
            return ConePoint(x, float(r))
        return x, r

    @property
    def pieces(self):
        knots = (self.start, *self.breaks, self.stop)
        return list(zip(knots[:-1], knots[1:]))

    @classmethod
    def from_scalar(cls, fn, start=0.0, stop=1.0, breaks=()):
        """Wrap ``fn(t) -> ConePoint`` (or ``(x, r)``) for scalar ``t``."""

        def func(t, anchor):
            flat = t.reshape(-1)
            xs, rs = [], []
            for s in flat:
                out = fn(float(s))
                if isinstance(out, ConePoint):
                    xs.append(out.x)
                    rs.append(out.r)
                else:
                    xs.append(np.asarray(out[0], dtype=float))
                    rs.append(np.asarray(out[1], dtype=float))
            x = np.stack(xs).reshape(t.shape + np.shape(xs[0]))
            r = np.stack(rs).reshape(t.shape + np.shape(rs[0]))
            return x, r

        return cls(func, start, stop, breaks)


def geodesic_path(z0: ConePoint, z1: ConePoint) -> ConePath:
    """The closed-form geodesic as a :class:`ConePath` on ``[0, 1]``."""
    x0, x1 = z0.x, z1.x
    r0, r1 = z0.r, z1.r
    geodesic_arrays(x0, r0, x1, r1, 0.0)

    def func(t, anchor):
        return geodesic_arrays(x0, r0, x1, r1, t)

    return ConePath(func)


# Four-sample stencils: offsets in units of h and weights for the first and
# second derivative.  Unused slots repeat the centre with zero weight.
_STENCILS = {
    "central": (np.array([-1.0, 0.0, 1.0, 0.0]),
                np.array([-0.5, 0.0, 0.5, 0.0]),
                np.array([1.0, -2.0, 1.0, 0.0])),
    "forward": (np.array([0.0, 1.0, 2.0, 3.0]),
                np.array([-1.5, 2.0, -0.5, 0.0]),
                np.array([2.0, -5.0, 4.0, -1.0])),
    "backward": (np.array([0.0, -1.0, -2.0, -3.0]),
                 np.array([1.5, -2.0, 0.5, 0.0]),
                 np.array([2.0, -5.0, 4.0, -1.0])),
}


def path_derivatives(path: ConePath, ts, h, lo=None, hi=None):
    """Finite-difference position, velocity and acceleration at times ``ts``.

    Central second-order stencils are used where ``t +- h`` stays inside
    ``[lo, hi]``; one-sided second-order stencils otherwise.

    Returns
    -------
    x, xd, xdd : ndarray, shape (k,) + B + (d,)
    r, rd, rdd : ndarray, shape (k,) + B
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    lo = path.start if lo is None else lo
    hi = path.stop if hi is None else hi
    mode = np.where(ts - h < lo, 1, np.where(ts + h > hi, 2, 0))
    if np.any((mode == 1) & (ts + 3 * h > hi)) or np.any((mode == 2) & (ts - 3 * h < lo)):
        raise StepError("interval too short for the finite-difference step")

    names = ("central", "forward", "backward")
    offsets = np.stack([_STENCILS[names[m]][0] for m in mode])
    w1 = np.stack([_STENCILS[names[m]][1] for m in mode]) / h
    w2 = np.stack([_STENCILS[names[m]][2] for m in mode]) / h**2

    anchors = np.repeat(ts[:, None], 4, axis=1)
    x, r = path.evaluate(ts[:, None] + offsets * h, anchors)
    x0, r0 = path.evaluate(ts, ts)

    extra_r = r.ndim - 2
    shape_r = w1.shape + (1,) * extra_r
    shape_x = w1.shape + (1,) * (extra_r + 1)
    rd = np.sum(w1.reshape(shape_r) * r, axis=1)
    rdd = np.sum(w2.reshape(shape_r) * r, axis=1)
    xd = np.sum(w1.reshape(shape_x) * x, axis=1)
    xdd = np.sum(w2.reshape(shape_x) * x, axis=1)
    return x0, xd, xdd, r0, rd, rdd


def _acceleration_from(xd, xdd, r, rd, rdd):
    if np.any(r <= 0.0):
        raise VertexError("covariant acceleration needs r > 0")
    av = xdd + 2.0 * (rd / r)[..., None] * xd
    ap = rdd - r * np.sum(xd * xd, axis=-1)
    return av, ap


def covariant_acceleration(path: ConePath, t: float, h: float = DEFAULT_STEP) -> ConeTangent:
    """Levi-Civita acceleration ``(x'' + 2 (r'/r) x', r'' - r |x'|^2)`` of a cone path.

    Derivatives are central differences with step ``h``; at exactly the
    ends of the path one-sided second-order stencils are used.  The squared
    cone norm of the result is ``|r x'' + 2 r' x'|^2 + (r'' - r |x'|^2)^2``.

    Raises
    ------
    StepError
        If ``t +- h`` leaves the path interval at an interior ``t``.
    VertexError
        If ``r(t) <= 0``.
    """
    t = float(t)
    if not path.start <= t <= path.stop:
        raise StepError(f"t={t} outside [{path.start}, {path.stop}]")
    at_end = t in (path.start, path.stop)
    if not at_end and (t - h < path.start or t + h > path.stop):
        raise StepError(f"t +- h leaves [{path.start}, {path.stop}]")
    _, xd, xdd, r, rd, rdd = path_derivatives(path, [t], h)
    av, ap = _acceleration_from(xd[0], xdd[0], r[0], rd[0], rdd[0])
    return ConeTangent(av, ap)


def acceleration_norm2(path: ConePath, ts, h=DEFAULT_STEP, lo=None, hi=None):
    """Squared cone norm of the covariant acceleration at each of ``ts``."""
    _, xd, xdd, r, rd, rdd = path_derivatives(path, ts, h, lo, hi)
    av, ap = _acceleration_from(xd, xdd, r, rd, rdd)
    return r**2 * np.sum(av * av, axis=-1) + ap**2


def path_curvature_cost(path: ConePath, n_steps: int = 1000, h: float = DEFAULT_STEP):
    """Trapezoidal estimate of the integral of ``|z''|^2`` along ``path``.

    Each C^2 piece between ``path.breaks`` is integrated on its own grid of
    ``n_steps`` intervals, with one-sided stencils at the piece ends.
    Returns a float, or an array over the path's batch shape.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    total = 0.0
    for a, b in path.pieces:
        nodes = np.linspace(a, b, n_steps + 1)
        vals = acceleration_norm2(path, nodes, h, lo=a, hi=b)
        total = total + np.trapezoid(vals, nodes, axis=0)
    return float(total) if np.ndim(total) == 0 else total
