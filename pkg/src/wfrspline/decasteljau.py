"""Cubic curves on the cone by De Casteljau's algorithm.

A segment is fixed by four cone points; evaluating it at ``t`` takes three
levels of geodesic interpolation ``z_a #_t z_b``.  Interior control points
are chosen so the curve leaves and enters its knots with prescribed
position and mass velocities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import HALF_PI, ConePoint, geodesic_arrays, geodesic_eval
from .errors import CascadeDomainError, DomainError, InfeasibleVelocityError, VertexError

#: Relative safety margin on the pi/2 diameter and on the velocity bounds.
DEFAULT_MARGIN = 0.05

geodesic_midop = geodesic_eval


@dataclass(frozen=True)
class KnotVelocity:
    """Velocity of a knot: spatial part ``v`` and mass rate ``s`` (per unit time)."""

    v: np.ndarray
    s: float

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        s = float(self.s)
        if not (np.all(np.isfinite(v)) and np.isfinite(s)):
            raise ValueError("knot velocity must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "s", s)


@dataclass(frozen=True, eq=False)
class ConeSplineSegment:
    """Four cone control points of one cubic segment and its duration ``delta``."""

    z0: ConePoint
    z1: ConePoint
    z2: ConePoint
    z3: ConePoint
    delta: float = 1.0

    def __post_init__(self):
        pts = self.points
        if any(z.r <= 0.0 for z in pts):
            raise VertexError("control points need positive mass")
        for a, b in zip(pts[:-1], pts[1:]):
            if np.linalg.norm(a.x - b.x) >= HALF_PI:
                raise DomainError("consecutive control points must be closer than pi/2")
        if not self.delta > 0.0:
            raise ValueError("segment duration must be positive")

    @property
    def points(self):
        return (self.z0, self.z1, self.z2, self.z3)

    def arrays(self):
        """Control positions ``(4, d)`` and masses ``(4,)``."""
        return (np.stack([z.x for z in self.points]),
                np.array([z.r for z in self.points]))


# --- array kernels ---------------------------------------------------------

def decasteljau_arrays(cx, cr, t):
    """Evaluate De Casteljau cascades for a batch of segments.

    Parameters
    ----------
    cx : ndarray, shape (..., 4, d)
        Control positions.
    cr : ndarray, shape (..., 4)
        Control masses.
    t : float or ndarray
        Local times in ``[0, 1]`` broadcastable against ``cr[..., 0]``.

    Returns
    -------
    x : ndarray, shape (broadcast, d)
    r : ndarray, shape (broadcast)

    Raises
    ------
    CascadeDomainError
        If a pair at any level is ``pi/2`` or more apart.
    """
    t = np.asarray(t, dtype=float)[..., None]
    x, r = np.asarray(cx, dtype=float), np.asarray(cr, dtype=float)
    for _ in range(3):
        x, r = geodesic_arrays(x[..., :-1, :], r[..., :-1], x[..., 1:, :], r[..., 1:], t,
                               error=CascadeDomainError)
    return x[..., 0, :], r[..., 0]


def control_arrays(x0, r0, v0, s0, x3, r3, v3, s3, delta):
    """Vectorized control-point solve.

    All inputs broadcast over leading axes; ``v0``/``v3`` and ``s0``/``s3``
    are physical velocities over a segment of duration ``delta``.  Returns
    ``(cx, cr)`` with shapes ``(..., 4, d)`` and ``(..., 4)``.
    """
    x0, x3 = np.asarray(x0, float), np.asarray(x3, float)
    r0, r3 = np.asarray(r0, float), np.asarray(r3, float)
    v0, v3 = np.asarray(v0, float), np.asarray(v3, float)
    s0, s3 = np.asarray(s0, float), np.asarray(s3, float)
    if np.any(r0 <= 0.0) or np.any(r3 <= 0.0):
        raise VertexError("knot masses must be positive")
    k = 3.0 / delta
    lead = s0 / r0 + k
    trail = k - s3 / r3
    if np.any(~(lead > 0.0)):
        raise InfeasibleVelocityError(
            "start mass rate violates s > -3 r / delta", bound="start")
    if np.any(~(trail > 0.0)):
        raise InfeasibleVelocityError(
            "end mass rate violates s < 3 r / delta", bound="end")

    def side(x, r, v, a):
        speed = np.linalg.norm(v, axis=-1)
        c_angle = np.arctan(speed / a)
        c_mass = np.sqrt(speed**2 + a**2) / k
        unit = np.divide(v, speed[..., None], out=np.zeros_like(v), where=speed[..., None] > 0.0)
        return c_angle[..., None] * unit, c_mass * r

    step0, r1 = side(x0, r0, v0, lead)
    step3, r2 = side(x3, r3, v3, trail)
    x1, x2 = x0 + step0, x3 - step3
    cx = np.stack(np.broadcast_arrays(x0, x1, x2, x3), axis=-2)
    cr = np.stack(np.broadcast_arrays(r0, r1, r2, r3), axis=-1)
    return cx, cr


def endpoint_arrays(cx, cr):
    """Unit-time endpoint velocities ``(v0, s0, v1, s1)`` of batched segments."""
    cx, cr = np.asarray(cx, float), np.asarray(cr, float)
    d01 = cx[..., 1, :] - cx[..., 0, :]
    d23 = cx[..., 3, :] - cx[..., 2, :]
    th0 = np.linalg.norm(d01, axis=-1)
    th2 = np.linalg.norm(d23, axis=-1)
    sinc0 = np.sinc(th0 / np.pi)
    sinc2 = np.sinc(th2 / np.pi)
    v0 = 3.0 * (cr[..., 1] / cr[..., 0] * sinc0)[..., None] * d01
    s0 = 3.0 * (cr[..., 1] * np.cos(th0) - cr[..., 0])
    v1 = 3.0 * (cr[..., 2] / cr[..., 3] * sinc2)[..., None] * d23
    s1 = 3.0 * (cr[..., 3] - cr[..., 2] * np.cos(th2))
    return v0, s0, v1, s1


# --- scalar API ------------------------------------------------------------

def control_points(z_start: ConePoint, z_end: ConePoint, vel_start: KnotVelocity,
                   vel_end: KnotVelocity, delta: float = 1.0) -> ConeSplineSegment:
    """Segment whose ends move with the prescribed knot velocities.

    Parameters
    ----------
    z_start, z_end : ConePoint
        Knots, both with positive mass.
    vel_start, vel_end : KnotVelocity
        Physical velocities at the knots.
    delta : float
        Segment duration; the curve's unit-time endpoint velocities equal
        ``delta`` times the physical ones.

    Raises
    ------
    InfeasibleVelocityError
        If ``vel_start.s <= -3 r_start / delta`` (``bound="start"``) or
        ``vel_end.s >= 3 r_end / delta`` (``bound="end"``).
    """
    if not delta > 0.0:
        raise ValueError("segment duration must be positive")
    cx, cr = control_arrays(z_start.x, z_start.r, vel_start.v, vel_start.s,
                            z_end.x, z_end.r, vel_end.v, vel_end.s, delta)
    pts = [ConePoint(cx[i], cr[i]) for i in range(4)]
    return ConeSplineSegment(*pts, delta=float(delta))


def decasteljau_eval(seg: ConeSplineSegment, t: float) -> ConePoint:
    """Point ``p(t)`` of the segment for local time ``t`` in ``[0, 1]``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"local time {t} outside [0, 1]")
    cx, cr = seg.arrays()
    x, r = decasteljau_arrays(cx, cr, float(t))
    return ConePoint(x, float(r))


def endpoint_velocities(seg: ConeSplineSegment):
    """Closed-form unit-time velocities of ``p`` at ``t = 0`` and ``t = 1``."""
    cx, cr = seg.arrays()
    v0, s0, v1, s1 = endpoint_arrays(cx, cr)
    return KnotVelocity(v0, float(s0)), KnotVelocity(v1, float(s1))


# --- feasibility rescaling -------------------------------------------------

@dataclass(frozen=True, eq=False)
class Rescale:
    """Global geometry change making every segment constructible.

    Positions are multiplied by ``space_scale`` about the origin and all
    velocities are damped by ``time_scale``; masses and knot times are
    unchanged.  ``knots`` holds the transformed knot data when the rescale
    was computed for a single trajectory.
    """

    space_scale: float
    time_scale: float
    margin: float
    knots: tuple = ()

    def to_scaled(self, x):
        return np.asarray(x, float) * self.space_scale

    def from_scaled(self, x):
        return np.asarray(x, float) / self.space_scale

    def __iter__(self):
        return iter((self.space_scale, self.time_scale, self.knots))


def _max_diameter(x):
    """Largest pairwise distance within each trajectory, maximized over trajectories.

    ``x`` has shape ``(P, N, d)``.
    """
    diff = x[:, :, None, :] - x[:, None, :, :]
    return float(np.max(np.linalg.norm(diff, axis=-1), initial=0.0))


def _velocity_time_scale(times, r, s, margin):
    """Smallest power of two damping ``s`` into the margin-shrunk bounds."""
    delta = np.diff(times)
    k = 3.0 / delta
    bound_lo = -(1.0 - margin) * k * r[:, :-1]
    bound_hi = (1.0 - margin) * k * r[:, 1:]
    need = np.concatenate([
        (s[:, :-1] / bound_lo).reshape(-1),
        (s[:, 1:] / bound_hi).reshape(-1),
    ])
    worst = float(np.max(need, initial=0.0))
    tau = 1.0
    while not worst / tau < 1.0:
        tau *= 2.0
    return tau


def rescale_factors(times, x, r, v, s, margin=DEFAULT_MARGIN, space_scale=None,
                    time_scale=None):
    """Shared ``(space_scale, time_scale)`` for a bundle of trajectories.

    Parameters
    ----------
    times : ndarray, shape (N,)
    x, v : ndarray, shape (P, N, d)
    r, s : ndarray, shape (P, N)
    margin : float
    space_scale, time_scale : float, optional
        Fixed values; when given they are used as is.

    Returns
    -------
    (float, float)
        ``time_scale`` is the smallest power of two ``>= 1`` meeting the
        mass-rate bounds; ``space_scale`` is at most ``1`` and is halved until
        the control polygon of every segment fits in a ball of diameter
        ``(pi/2)(1 - margin)``, which contains every cascade pair.
    """
    times = np.asarray(times, float)
    x, r, v, s = (np.asarray(a, float) for a in (x, r, v, s))
    tau = _velocity_time_scale(times, r, s, margin) if time_scale is None else float(time_scale)
    if space_scale is not None:
        return float(space_scale), tau
    limit = HALF_PI * (1.0 - margin)
    diam = _max_diameter(x)
    space = min(1.0, limit / diam) if diam > 0.0 else 1.0
    delta = np.diff(times)
    for _ in range(200):
        cx, _ = control_arrays(x[:, :-1] * space, r[:, :-1], v[:, :-1] * space / tau,
                               s[:, :-1] / tau, x[:, 1:] * space, r[:, 1:],
                               v[:, 1:] * space / tau, s[:, 1:] / tau, delta[None, :])
        if _max_diameter(cx.reshape(-1, 4, cx.shape[-1])) < limit:
            break
        space *= 0.5
    return space, tau


def feasible_rescale(knots, margin: float = DEFAULT_MARGIN) -> Rescale:
    """Rescale one trajectory's knots so every segment is constructible.

    Parameters
    ----------
    knots : sequence of (time, ConePoint, KnotVelocity)
        At least two knots with strictly increasing times.
    margin : float
        Relative safety margin on the diameter and velocity bounds.

    Returns
    -------
    Rescale
        Iterable as ``(space_scale, time_scale, transformed_knots)``.  In the
        transformed knots positions are ``x * space_scale``, spatial
        velocities ``v * space_scale / time_scale`` and mass rates
        ``s / time_scale``; times and masses are unchanged.
    """
    if len(knots) < 2:
        raise ValueError("at least two knots are needed")
    times = np.array([k[0] for k in knots], float)
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("knot times must be strictly increasing")
    x = np.stack([k[1].x for k in knots])[None]
    r = np.array([k[1].r for k in knots])[None]
    v = np.stack([k[2].v for k in knots])[None]
    s = np.array([k[2].s for k in knots])[None]
    space, tau = rescale_factors(times, x, r, v, s, margin)
    out = tuple((t, ConePoint(z.x * space, z.r), KnotVelocity(w.v * space / tau, w.s / tau))
                for t, z, w in knots)
    return Rescale(space, tau, margin, out)
