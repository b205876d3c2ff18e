"""Transport splines: particle tracking through entropic plans, cone splining, sampling.

The procedure is

1. solve the entropic problem between each consecutive pair of measures;
2. follow every source particle through the composed conditional-mean maps,
   assign it a cone mass at each knot from the density ratio, and estimate
   knot velocities with natural cubic splines of positions and masses;
3. build one cone De Casteljau segment per knot interval and particle, in a
   geometry rescaled once for all particles, and sample the pushforward.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .cone import ConePath, ConePoint, path_curvature_cost
from .cubic import KnotSeries, natural_cubic_fit
from .decasteljau import (DEFAULT_MARGIN, ConeSplineSegment, KnotVelocity,
                          control_arrays, decasteljau_arrays, rescale_factors)
from .errors import DimensionError, EmptyMeasureError, TimeOrderError
from .measures import DiscreteMeasure
from .uot import (TransportPlan, map_extend, ratio_at, smoothed_weight, solve_entropic,
                  wfr_distance)

log = logging.getLogger(__name__)

MARGINAL_RULES = ("forward", "backward", "average")
MASS_RULES = ("sigma", "sqrt-mu")


@dataclass(frozen=True)
class SolverConfig:
    """Options for the entropic solves and the spline construction.

    ``interior_marginal`` picks which plan's marginal defines the density
    ratio at interior knots: the plan leaving the knot (``"forward"``), the
    plan arriving at it (``"backward"``), or the mean of the two ratios.
    ``mass_rule`` is ``"sigma"`` (mass from the density ratio) or
    ``"sqrt-mu"`` (unit particle weight, mass from the local density).
    """

    epsilon: float | None = None
    max_iters: int = 10_000
    tol: float = 1e-9
    prune: float = 1e-14
    interior_marginal: str = "forward"
    mass_rule: str = "sigma"
    margin: float = DEFAULT_MARGIN
    space_scale: float | None = None
    time_scale: float | None = None

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.interior_marginal not in MARGINAL_RULES:
            raise ValueError(f"interior_marginal must be one of {MARGINAL_RULES}")
        if self.mass_rule not in MASS_RULES:
            raise ValueError(f"mass_rule must be one of {MASS_RULES}")
        if not 0.0 <= self.margin < 1.0:
            raise ValueError("margin must lie in [0, 1)")
        for name in ("space_scale", "time_scale"):
            val = getattr(self, name)
            if val is not None and not val > 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class ParticleTrajectory:
    """Knot data of one particle: weight, positions, masses, velocities, segments."""

    weight: float
    positions: np.ndarray
    masses: np.ndarray
    velocities: np.ndarray | None = None
    mass_rates: np.ndarray | None = None
    segments: tuple = ()
    source_index: int = -1


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """All particle trajectories of one spline, stored as arrays.

    Shapes: ``weights (P,)``, ``x (P, N+1, d)``, ``r (P, N+1)``; after
    velocity estimation ``v`` and ``s`` match ``x`` and ``r``; after
    assembly ``cx (P, N, 4, d)`` and ``cr (P, N, 4)`` hold the control
    points in the rescaled geometry.  Indexing yields
    :class:`ParticleTrajectory` views.
    """

    times: np.ndarray
    weights: np.ndarray
    x: np.ndarray
    r: np.ndarray
    ids: np.ndarray
    v: np.ndarray | None = None
    s: np.ndarray | None = None
    cx: np.ndarray | None = None
    cr: np.ndarray | None = None
    space_scale: float = 1.0
    time_scale: float = 1.0
    plans: tuple = ()
    input_masses: tuple = ()
    dropped_mass: float = 0.0
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[-1]

    @property
    def n_knots(self) -> int:
        return self.times.shape[0]

    def knot_masses(self) -> np.ndarray:
        """Projected mass ``sum_p w_p r_p(t_i)^2`` at every knot."""
        return self.weights @ self.r**2

    def __getitem__(self, i) -> ParticleTrajectory:
        segs = ()
        if self.cx is not None:
            delta = np.diff(self.times)
            segs = tuple(
                ConeSplineSegment(*(ConePoint(self.cx[i, k, j], self.cr[i, k, j]) for j in range(4)),
                                  delta=float(delta[k]))
                for k in range(self.n_knots - 1))
        return ParticleTrajectory(
            float(self.weights[i]), self.x[i], self.r[i],
            None if self.v is None else self.v[i],
            None if self.s is None else self.s[i], segs, int(self.ids[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_knots(cls, times, x, r, weights=None, v=None, s=None):
        """Build a set directly from knot arrays (``x`` as ``(P, N+1, d)``)."""
        times = np.asarray(times, float)
        x = np.asarray(x, float)
        r = np.asarray(r, float)
        if x.ndim == 2:
            x = x[..., None]
        if np.any(np.diff(times) <= 0.0):
            raise TimeOrderError("knot times must be strictly increasing")
        w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, float)
        return cls(times, w, x, r, np.arange(x.shape[0]),
                   None if v is None else np.asarray(v, float).reshape(x.shape),
                   None if s is None else np.asarray(s, float))


def _validate(measures, times):
    if len(measures) < 2:
        raise ValueError("at least two measures are needed")
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.shape[0] != len(measures):
        raise ValueError(f"{len(measures)} measures but {times.shape[0]} knot times")
    if np.any(np.diff(times) <= 0.0):
        raise TimeOrderError("knot times must be strictly increasing")
    dims = {mu.dim for mu in measures}
    if len(dims) != 1:
        raise DimensionError(f"measures have mixed dimensions {sorted(dims)}")
    for i, mu in enumerate(measures):
        if mu.mass <= 0.0:
            raise EmptyMeasureError(f"measure {i} has zero total mass")
    return times


def solve_plans(measures, config: SolverConfig = SolverConfig()):
    """Entropic plans between consecutive measures."""
    plans = []
    for i, (a, b) in enumerate(zip(measures[:-1], measures[1:])):
        plan = solve_entropic(a, b, config.epsilon, config.max_iters, config.tol, config.prune)
        log.info("segment %d: %d iterations, residual %.3g", i, plan.iterations, plan.residual)
        plans.append(plan)
    return plans


def build_trajectories(measures, times, config: SolverConfig = SolverConfig(),
                       plans=None) -> TrajectorySet:
    """Track the source particles through all knots and assign cone masses.

    Parameters
    ----------
    measures : list of DiscreteMeasure
        At least two measures of equal dimension and positive mass.
    times : array_like
        Strictly increasing knot times, one per measure.
    config : SolverConfig
    plans : list of TransportPlan, optional
        Precomputed plans between consecutive measures (reused across
        different knot-time sets); solved here when omitted.

    Returns
    -------
    TrajectorySet
        One particle per source support point with positive plan row mass
        that keeps a positive mass at every knot.  The mass of the other
        source points is reported in ``dropped_mass``.
    """
    times = _validate(measures, times)
    if plans is None:
        plans = solve_plans(measures, config)
    plans = list(plans)
    if len(plans) != len(measures) - 1:
        raise ValueError("need one plan per consecutive pair of measures")
    unit = [p.normalized() if p.mass > 0.0 else None for p in plans]
    if unit[0] is None:
        raise EmptyMeasureError("the first plan carries no mass")
    mu0 = measures[0]
    n = len(measures)

    eta0 = unit[0].source_marginal
    ids = np.flatnonzero(eta0 > 0.0)
    P = ids.shape[0]
    x = np.empty((P, n, mu0.dim))
    r = np.empty((P, n))
    x[:, 0] = mu0.points[ids]
    alive = np.ones(P, dtype=bool)

    for i in range(1, n):
        plan = plans[i - 1]
        if plan.mass > 0.0:
            xi = map_extend(plan, measures[i], x[:, i - 1], strict=False)
        else:
            xi = np.full_like(x[:, i - 1], np.nan)
        lost = np.any(~np.isfinite(xi), axis=1)
        alive &= ~lost
        xi[lost] = x[lost, i - 1]
        x[:, i] = xi

    if config.mass_rule == "sigma":
        weights = eta0[ids].copy()
        r[:, 0] = np.sqrt(mu0.weights[ids] / weights)
        for i in range(1, n):
            sig = _knot_ratio(unit, i, x[:, i], config.interior_marginal)
            alive &= sig > 0.0
            r[:, i] = np.sqrt(np.where(sig > 0.0, sig, 1.0))
    else:
        weights = np.ones(P)
        r[:, 0] = np.sqrt(mu0.weights[ids])
        for i in range(1, n):
            plan = plans[i] if i < n - 1 else plans[i - 1]
            side = "source" if i < n - 1 else "target"
            dens = smoothed_weight(plan, measures[i], side, x[:, i])
            alive &= dens > 0.0
            r[:, i] = np.sqrt(np.where(dens > 0.0, dens, 1.0))

    kept = mu0.weights[ids][alive].sum()
    dropped = mu0.mass - kept
    if np.count_nonzero(~alive) or dropped > 0.0:
        log.info("dropping %d vanishing particles; source mass deficit %.3g",
                 int(np.count_nonzero(~alive)) + (len(mu0) - P), dropped)
    return TrajectorySet(
        times=times, weights=weights[alive], x=x[alive], r=r[alive], ids=ids[alive],
        plans=tuple(plans), input_masses=tuple(mu.mass for mu in measures),
        dropped_mass=float(dropped),
    )


def _knot_ratio(unit, i, xi, rule):
    n = len(unit) + 1
    if i == n - 1:
        return ratio_at(unit[-1], "target", xi)
    fwd = ratio_at(unit[i], "source", xi) if unit[i] is not None else np.zeros(len(xi))
    back = ratio_at(unit[i - 1], "target", xi)
    if rule == "forward":
        return fwd
    if rule == "backward":
        return back
    return 0.5 * (fwd + back)


def estimate_knot_velocities(trajs: TrajectorySet, times=None) -> TrajectorySet:
    """Knot velocities from natural cubic fits of positions and masses.

    Positions and masses of every particle are fitted independently against
    the knot times; the fitted first derivatives at the knots are stored.
    """
    times = trajs.times if times is None else np.asarray(times, float)
    P, n, d = trajs.x.shape
    values = np.concatenate([trajs.x.transpose(1, 0, 2).reshape(n, P * d), trajs.r.T], axis=1)
    fit = natural_cubic_fit(KnotSeries(times, values))
    vel = fit.velocities
    v = vel[:, :P * d].reshape(n, P, d).transpose(1, 0, 2)
    s = vel[:, P * d:].T
    return replace(trajs, times=times, v=np.ascontiguousarray(v), s=np.ascontiguousarray(s))


def assemble_spline(trajs: TrajectorySet, times=None, config: SolverConfig = SolverConfig()) -> TrajectorySet:
    """Build the cone De Casteljau segments of every trajectory.

    One ``(space_scale, time_scale)`` pair is chosen for all particles (or
    taken from ``config`` overrides).  Control points are computed from
    positions ``x * space_scale``, spatial velocities
    ``v * space_scale / time_scale`` and mass rates ``s / time_scale``.
    """
    if trajs.v is None:
        trajs = estimate_knot_velocities(trajs, times)
    times = trajs.times
    space, tau = rescale_factors(times, trajs.x, trajs.r, trajs.v, trajs.s, config.margin,
                                 config.space_scale, config.time_scale)
    delta = np.diff(times)
    x, v = trajs.x * space, trajs.v * (space / tau)
    s = trajs.s / tau
    cx, cr = control_arrays(x[:, :-1], trajs.r[:, :-1], v[:, :-1], s[:, :-1],
                            x[:, 1:], trajs.r[:, 1:], v[:, 1:], s[:, 1:], delta)
    if space != 1.0 or tau != 1.0:
        log.info("feasibility rescale: space %.6g, time %.6g", space, tau)
    return replace(trajs, cx=cx, cr=cr, space_scale=float(space), time_scale=float(tau))


def _locate(times, t):
    k = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2)
    u = (t - times[k]) / (times[k + 1] - times[k])
    return k, np.clip(u, 0.0, 1.0)


def evaluate_spline(trajs: TrajectorySet, t):
    """Scaled-geometry positions and masses of all particles at global times ``t``.

    Returns arrays of shapes ``t.shape + (P, d)`` and ``t.shape + (P,)``.
    """
    t = np.asarray(t, float)
    k, u = _locate(trajs.times, t.reshape(-1))
    cx = trajs.cx[:, k].transpose(1, 0, 2, 3)
    cr = trajs.cr[:, k].transpose(1, 0, 2)
    x, r = decasteljau_arrays(cx, cr, u[:, None])
    return x.reshape(t.shape + x.shape[1:]), r.reshape(t.shape + r.shape[1:])


@dataclass(frozen=True, eq=False)
class MeasureCurve:
    """Sampled curve of measures with its metadata."""

    times: np.ndarray
    measures: tuple
    metadata: dict = field(default_factory=dict)

    def masses(self) -> np.ndarray:
        return np.array([mu.mass for mu in self.measures])


def sample_times(times, n_samples: int = 40) -> np.ndarray:
    """``n_samples`` equispaced times per knot interval plus the final knot."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    times = np.asarray(times, float)
    parts = [np.linspace(a, b, n_samples, endpoint=False) for a, b in zip(times[:-1], times[1:])]
    return np.concatenate(parts + [times[-1:]])


def sample_curve(trajs: TrajectorySet, times=None, n_samples: int = 40) -> MeasureCurve:
    """Pushforward measures ``sum_p w_p R_t^2 delta(X_t)`` at sample times.

    Positions are mapped back to the input geometry.  At knot times the
    stored knot positions and masses are emitted unchanged.
    """
    if trajs.cx is None:
        raise ValueError("trajectories must be assembled first")
    ts = sample_times(trajs.times if times is None else times, n_samples)
    knot_of = {float(t): i for i, t in enumerate(trajs.times)}
    measures = []
    xs, rs = evaluate_spline(trajs, ts) if len(trajs) else (None, None)
    for j, t in enumerate(ts):
        i = knot_of.get(float(t))
        if len(trajs) == 0:
            measures.append(DiscreteMeasure(np.zeros((0, trajs.dim)), np.zeros(0)))
        elif i is not None:
            measures.append(DiscreteMeasure(trajs.x[:, i], trajs.weights * trajs.r[:, i] ** 2))
        else:
            measures.append(DiscreteMeasure(xs[j] / trajs.space_scale, trajs.weights * rs[j] ** 2))
    meta = {"space_scale": trajs.space_scale, "time_scale": trajs.time_scale,
            "n_particles": len(trajs), "dropped_mass": trajs.dropped_mass}
    return MeasureCurve(ts, tuple(measures), meta)


def spline_path(trajs: TrajectorySet) -> ConePath:
    """The whole spline as a batched :class:`ConePath` in the rescaled geometry.

    Knot times are the path's breaks; the stencil anchor decides which
    segment a sample belongs to, so one-sided stencils at a knot never mix
    two segments.
    """
    times = trajs.times

    def func(t, anchor):
        flat_t, flat_a = t.reshape(-1), anchor.reshape(-1)
        k, _ = _locate(times, flat_a)
        k = np.where((flat_a == times[k]) & (flat_t < flat_a) & (k > 0), k - 1, k)
        u = (flat_t - times[k]) / (times[k + 1] - times[k])
        cx = trajs.cx[:, k].transpose(1, 0, 2, 3)
        cr = trajs.cr[:, k].transpose(1, 0, 2)
        x, r = decasteljau_arrays(cx, cr, u[:, None])
        return x.reshape(t.shape + x.shape[1:]), r.reshape(t.shape + r.shape[1:])

    return ConePath(func, times[0], times[-1], breaks=times[1:-1])


def curve_curvature_report(trajs: TrajectorySet, n_steps: int = 200, h: float = 1e-4) -> dict:
    """Weighted curvature cost ``sum_p w_p int |z''|^2 dt`` of the assembled spline.

    Computed in the rescaled geometry on the knot clock, piece by piece
    with ``n_steps`` trapezoid intervals per knot interval.
    """
    if trajs.cx is None:
        raise ValueError("trajectories must be assembled first")
    if len(trajs) == 0:
        per = np.zeros(0)
    else:
        lengths = np.diff(trajs.times)
        step = min(h, 0.25 * float(lengths.min()) / n_steps)
        per = np.atleast_1d(path_curvature_cost(spline_path(trajs), n_steps, step))
    return {
        "per_trajectory": per,
        "aggregate": float(trajs.weights @ per) if len(per) else 0.0,
        "space_scale": trajs.space_scale,
        "time_scale": trajs.time_scale,
    }


def run_pipeline(measures, times, config: SolverConfig = SolverConfig(), n_samples: int = 40,
                 plans=None, curvature_steps: int = 200):
    """All three steps in one call.

    Returns
    -------
    (TrajectorySet, MeasureCurve, dict)
        The assembled trajectories, the sampled curve and a report with the
        per-segment distances, solver diagnostics, knot mass bookkeeping and
        the curvature cost.
    """
    times = _validate(measures, times)
    if plans is None:
        plans = solve_plans(measures, config)
    trajs = build_trajectories(measures, times, config, plans)
    trajs = estimate_knot_velocities(trajs)
    trajs = assemble_spline(trajs, config=config)
    curve = sample_curve(trajs, n_samples=n_samples)
    curv = curve_curvature_report(trajs, curvature_steps)
    report = {
        "segment_distances": [wfr_distance(p, a, b) for p, a, b in
                              zip(plans, measures[:-1], measures[1:])],
        "solver": [p.diagnostics() for p in plans],
        "input_masses": [mu.mass for mu in measures],
        "knot_masses": trajs.knot_masses().tolist(),
        "dropped_mass": trajs.dropped_mass,
        "n_particles": len(trajs),
        "space_scale": trajs.space_scale,
        "time_scale": trajs.time_scale,
        "curvature": {"aggregate": curv["aggregate"],
                      "max_per_trajectory": float(np.max(curv["per_trajectory"], initial=0.0))},
    }
    return trajs, curve, report
