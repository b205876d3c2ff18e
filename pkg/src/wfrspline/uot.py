"""Entropic scaling solver for the KL-penalized static WFR problem.

The problem solved is

    min_eta  KL(eta_0 | mu_0) + KL(eta_1 | mu_1) + <c, eta> + eps KL(eta | mu_0 x mu_1)

with ``c(x, y) = -2 log cos(|x - y| ^ pi/2)``.  With unit marginal penalties
the proximal scaling update is ``u = (K (b v))^(-1 / (1 + eps))`` and
symmetrically for ``v``; the Gibbs kernel is ``cos(|x - y| ^ pi/2)^(2/eps)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import logsumexp

from .errors import (DanglingSourceError, DimensionError, EmptyMeasureError,
                     ScaleError, ZeroWeightError)
from .measures import DiscreteMeasure

log = logging.getLogger(__name__)

HALF_PI = 0.5 * np.pi
#: Scalings are absorbed into the log potentials once |log u| exceeds this.
ABSORB_LOG = 50.0


def _log_cos(d):
    """``log cos(d)`` for ``0 <= d < pi/2`` without cancellation near 0."""
    s = np.sin(0.5 * d)
    return np.log1p(-2.0 * s * s)


def log_kernel_from_distances(d, epsilon):
    """``-c / eps = (2 / eps) log cos(d)``, exactly ``-inf`` for ``d >= pi/2``."""
    d = np.asarray(d, dtype=float)
    out = np.full(d.shape, -np.inf)
    ok = d < HALF_PI
    out[ok] = (2.0 / epsilon) * _log_cos(d[ok])
    return out


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Pairwise cost ``-2 log cos(|x - y| ^ pi/2)`` (``+inf`` at or beyond pi/2)."""

    values: np.ndarray
    distances: np.ndarray
    source: np.ndarray
    target: np.ndarray

    def log_kernel(self, epsilon: float) -> np.ndarray:
        return log_kernel_from_distances(self.distances, epsilon)


def _pairwise(x, y):
    return cdist(np.asarray(x, float), np.asarray(y, float))


def cost_matrix(source: DiscreteMeasure, target: DiscreteMeasure) -> CostMatrix:
    if source.dim != target.dim:
        raise DimensionError(f"source is {source.dim}-d, target is {target.dim}-d")
    d = _pairwise(source.points, target.points)
    c = np.full(d.shape, np.inf)
    ok = d < HALF_PI
    c[ok] = -2.0 * _log_cos(d[ok])
    return CostMatrix(c, d, source.points, target.points)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Entropic coupling between two discrete measures.

    ``coupling`` is stored on the active supports only (``rows`` index the
    source measure, ``cols`` the target).  ``log_u``/``log_v`` are the total
    log scalings; with them the plan is
    ``eta_ij = a_i b_j exp(log_u_i + log_v_j - c_ij / eps)``.
    ``scale`` records any multiplicative rescaling applied after solving.
    """

    coupling: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    n_source: int
    n_target: int
    source_points: np.ndarray
    target_points: np.ndarray
    source_weights: np.ndarray
    target_weights: np.ndarray
    log_u: np.ndarray
    log_v: np.ndarray
    epsilon: float
    iterations: int
    residual: float
    converged: bool
    objective: float
    scale: float = 1.0
    history: list = field(default_factory=list)

    @property
    def mass(self) -> float:
        return float(np.sum(self.coupling))

    @property
    def source_marginal(self) -> np.ndarray:
        out = np.zeros(self.n_source)
        out[self.rows] = self.coupling.sum(axis=1)
        return out

    @property
    def target_marginal(self) -> np.ndarray:
        out = np.zeros(self.n_target)
        out[self.cols] = self.coupling.sum(axis=0)
        return out

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n_source, self.n_target))
        out[np.ix_(self.rows, self.cols)] = self.coupling
        return out

    def scaled(self, c: float) -> "TransportPlan":
        if not c > 0.0:
            raise ScaleError("plan scale factor must be positive")
        return replace(self, coupling=self.coupling * c, scale=self.scale * c)

    def normalized(self) -> "TransportPlan":
        """The plan rescaled to unit total mass."""
        m = self.mass
        if m <= 0.0:
            raise EmptyMeasureError("plan has zero mass")
        return self.scaled(1.0 / m)

    def diagnostics(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "objective": self.objective,
            "plan_mass": self.mass / self.scale,
        }


def _kl(p, q):
    """Generalized KL ``sum p log(p/q) - p + q`` with ``0 log 0 = 0``."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    pos = p > 0.0
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos])) - p.sum() + q.sum())


def _active_objective(eta, a, b, cost, pruned_mass):
    finite = eta > 0.0
    transport = float(np.sum(eta[finite] * cost[finite]))
    return _kl(eta.sum(axis=1), a) + _kl(eta.sum(axis=0), b) + transport + pruned_mass


def default_epsilon(mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> float:
    """``1e-3`` times the squared diameter of the joint positive support."""
    pts = np.vstack([mu0.points[mu0.positive()], mu1.points[mu1.positive()]])
    if len(pts) > 4000:
        # the diameter is attained on the convex hull
        from scipy.spatial import ConvexHull
        if pts.shape[1] == 1:
            diam = float(np.ptp(pts[:, 0]))
        else:
            hull = pts[ConvexHull(pts).vertices]
            diam = float(pdist(hull).max())
    else:
        diam = float(pdist(pts).max()) if len(pts) > 1 else 0.0
    return 1e-3 * diam**2 if diam > 0.0 else 1e-3


def _translation(log_a_u, log_b_v):
    """Optimal shift ``lam = (log sum a e^-f - log sum b e^-g) / 2`` of the dual potentials."""
    with np.errstate(invalid="ignore"):
        lam = 0.5 * (logsumexp(log_a_u) - logsumexp(log_b_v))
    # With no finite-cost pair both sums can be empty; there is then nothing to shift.
    return lam if np.isfinite(lam) else 0.0


def _active(mu, prune):
    wmax = float(np.max(mu.weights)) if len(mu) else 0.0
    if wmax <= 0.0:
        raise EmptyMeasureError("measure has zero total mass")
    return np.flatnonzero(mu.weights > prune * wmax)


def solve_entropic(mu0: DiscreteMeasure, mu1: DiscreteMeasure, epsilon: float | None = None,
                   max_iters: int = 10_000, tol: float = 1e-9, prune: float = 0.0,
                   record_every: int = 0, translate: bool = True) -> TransportPlan:
    """Solve the entropic KL-penalized WFR problem by alternating scalings.

    Parameters
    ----------
    mu0, mu1 : DiscreteMeasure
        Source and target measures with positive total mass.
    epsilon : float, optional
        Entropic regularization; defaults to :func:`default_epsilon`.
    max_iters : int
        Maximum number of full (u then v) iterations.
    tol : float
        Stop once the sup-norm change of the log scalings in one iteration
        falls below ``tol``.
    prune : float
        Support points with weight at most ``prune * max(weight)`` are left
        out of the solve and receive no plan mass.
    record_every : int
        If positive, the unregularized objective of the current plan is
        appended to ``plan.history`` every ``record_every`` iterations.
    translate : bool
        After each iteration, move the dual potentials along the direction
        ``(f + lam, g - lam)`` to the exact dual optimum in ``lam``.  The
        plan is unchanged by this move; it removes the slowly contracting
        mode of plain unbalanced scaling, whose rate is ``1 / (1 + eps)``.

    Returns
    -------
    TransportPlan
        Nonconvergence is not an error; check ``plan.converged``.
    """
    if mu0.dim != mu1.dim:
        raise DimensionError(f"source is {mu0.dim}-d, target is {mu1.dim}-d")
    if mu0.mass <= 0.0 or mu1.mass <= 0.0:
        raise EmptyMeasureError("both measures need positive total mass")
    eps = default_epsilon(mu0, mu1) if epsilon is None else float(epsilon)
    if not eps > 0.0:
        raise ScaleError(f"epsilon must be positive, got {eps}")

    rows = _active(mu0, prune)
    cols = _active(mu1, prune)
    x, y = mu0.points[rows], mu1.points[cols]
    a, b = mu0.weights[rows], mu1.weights[cols]
    pruned = (mu0.mass - a.sum()) + (mu1.mass - b.sum())
    dist = _pairwise(x, y)
    logK = log_kernel_from_distances(dist, eps)
    cost = np.where(np.isfinite(logK), -eps * logK, np.inf)
    la, lb = np.log(a), np.log(b)
    kap = 1.0 / (1.0 + eps)
    dead_rows = ~np.isfinite(logK).any(axis=1)
    dead_cols = ~np.isfinite(logK).any(axis=0)

    def exact_u(lv):
        out = -kap * logsumexp(logK + (lb + lv)[None, :], axis=1)
        return np.where(dead_rows, 0.0, out)

    def exact_v(lu):
        out = -kap * logsumexp(logK + (la + lu)[:, None], axis=0)
        return np.where(dead_cols, 0.0, out)

    def plan_from(lu, lv):
        return np.exp(logK + (la + lu)[:, None] + (lb + lv)[None, :])

    history = []
    fa = exact_u(np.zeros(len(b)))
    ga = exact_v(fa)

    def kernel(fa, ga):
        return np.exp(np.minimum(logK + fa[:, None] + ga[None, :], 700.0))

    Kt = kernel(fa, ga)
    lsu = np.zeros(len(a))
    lsv = np.zeros(len(b))
    live_r, live_c = ~dead_rows, ~dead_cols
    residual = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        lu_prev, lv_prev = fa + lsu, ga + lsv
        s = Kt @ (b * np.exp(lsv))
        if np.any(s[live_r] <= 0.0) or not np.all(np.isfinite(s)):
            fa, ga = exact_u(ga + lsv), ga + lsv
            lsu = np.zeros(len(a))
            lsv = np.zeros(len(b))
            Kt = kernel(fa, ga)
        else:
            with np.errstate(divide="ignore"):
                lsu = np.where(live_r, -kap * np.log(s) - (1.0 - kap) * fa, 0.0)

        s = (a * np.exp(lsu)) @ Kt
        if np.any(s[live_c] <= 0.0) or not np.all(np.isfinite(s)):
            fa, ga = fa + lsu, exact_v(fa + lsu)
            lsu = np.zeros(len(a))
            lsv = np.zeros(len(b))
            Kt = kernel(fa, ga)
        else:
            with np.errstate(divide="ignore"):
                lsv = np.where(live_c, -kap * np.log(s) - (1.0 - kap) * ga, 0.0)

        if translate:
            shift = _translation(la[live_r] - eps * (fa + lsu)[live_r],
                                 lb[live_c] - eps * (ga + lsv)[live_c]) / eps
            lsu = np.where(live_r, lsu + shift, 0.0)
            lsv = np.where(live_c, lsv - shift, 0.0)

        residual = max(np.max(np.abs(fa + lsu - lu_prev), initial=0.0),
                       np.max(np.abs(ga + lsv - lv_prev), initial=0.0))
        if record_every and it % record_every == 0:
            eta = plan_from(fa + lsu, ga + lsv)
            history.append(_active_objective(eta, a, b, cost, pruned))
        if residual < tol:
            break
        if max(np.max(np.abs(lsu), initial=0.0), np.max(np.abs(lsv), initial=0.0)) > ABSORB_LOG:
            fa, ga = fa + lsu, ga + lsv
            lsu = np.zeros(len(a))
            lsv = np.zeros(len(b))
            Kt = kernel(fa, ga)

    lu, lv = fa + lsu, ga + lsv
    eta = plan_from(lu, lv)
    converged = bool(residual < tol)
    if not converged:
        log.info("scaling solver stopped at max_iters=%d with residual %.3g", max_iters, residual)
    return TransportPlan(
        coupling=eta, rows=rows, cols=cols, n_source=len(mu0), n_target=len(mu1),
        source_points=x, target_points=y, source_weights=a, target_weights=b,
        log_u=lu, log_v=lv, epsilon=eps, iterations=it, residual=float(residual),
        converged=converged, objective=_active_objective(eta, a, b, cost, pruned),
        history=history,
    )


def _check_shapes(plan, mu0=None, mu1=None):
    if mu0 is not None and len(mu0) != plan.n_source:
        raise DimensionError(f"plan has {plan.n_source} source points, measure has {len(mu0)}")
    if mu1 is not None and len(mu1) != plan.n_target:
        raise DimensionError(f"plan has {plan.n_target} target points, measure has {len(mu1)}")


def primal_objective(plan: TransportPlan, mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> float:
    """Unregularized objective ``KL + KL + <c, eta>`` of the (unscaled) plan."""
    _check_shapes(plan, mu0, mu1)
    eta = plan.coupling / plan.scale
    a, b = mu0.weights[plan.rows], mu1.weights[plan.cols]
    pruned = (mu0.mass - a.sum()) + (mu1.mass - b.sum())
    d = _pairwise(plan.source_points, plan.target_points)
    cost = np.full(d.shape, np.inf)
    ok = d < HALF_PI
    cost[ok] = -2.0 * _log_cos(d[ok])
    return _active_objective(eta, a, b, cost, pruned)


def wfr_distance(plan: TransportPlan, mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> float:
    """WFR estimate: square root of the unregularized objective of ``plan``."""
    return float(np.sqrt(max(primal_objective(plan, mu0, mu1), 0.0)))


def barycentric_map(plan: TransportPlan, target: DiscreteMeasure) -> np.ndarray:
    """Conditional mean ``T(x_i) = sum_j eta_ij y_j / sum_j eta_ij`` for every source point.

    Raises
    ------
    DanglingSourceError
        For the first source point whose plan row has zero mass.
    """
    _check_shapes(plan, mu1=target)
    row_mass = plan.source_marginal
    empty = np.flatnonzero(row_mass <= 0.0)
    if empty.size:
        i = int(empty[0])
        raise DanglingSourceError(f"source point {i} has no plan mass", i)
    y = target.points[plan.cols]
    out = np.empty((plan.n_source, target.dim))
    out[plan.rows] = (plan.coupling @ y) / plan.coupling.sum(axis=1)[:, None]
    return out


def _log_kernel_to(plan, points, query):
    d = _pairwise(np.atleast_2d(query), points)
    return log_kernel_from_distances(d, plan.epsilon)


def map_extend(plan: TransportPlan, target: DiscreteMeasure, query, strict: bool = True) -> np.ndarray:
    """Entropic conditional mean of the target at arbitrary query points.

    Weights are ``b_j v_j exp(-c(q, y_j) / eps)``; at a source support point
    this reproduces :func:`barycentric_map`.  ``query`` may be a single
    position ``(d,)`` or a batch ``(q, d)``.  With ``strict=False`` queries
    with no finite-cost target map to NaN instead of raising.
    """
    _check_shapes(plan, mu1=target)
    q = np.asarray(query, dtype=float)
    single = q.ndim == 1
    lw = _log_kernel_to(plan, plan.target_points, q) + (np.log(plan.target_weights) + plan.log_v)[None, :]
    top = np.max(lw, axis=1)
    lost = ~np.isfinite(top)
    if strict and np.any(lost):
        bad = int(np.flatnonzero(lost)[0])
        raise ZeroWeightError(f"query {bad} is at least pi/2 from every target point")
    w = np.exp(lw - np.where(lost, 0.0, top)[:, None])
    y = target.points[plan.cols]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (w @ y) / w.sum(axis=1)[:, None]
    out[lost] = np.nan
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class DensityRatio:
    """Ratio ``d mu / d eta_marginal`` on the measure's support points.

    ``singular`` flags points where the plan marginal vanishes (ratio 0).
    """

    values: np.ndarray
    singular: np.ndarray


def density_ratio(plan: TransportPlan, mu: DiscreteMeasure, side: str) -> DensityRatio:
    """``sigma_k = mu_k / eta_marginal_k`` on one side of the plan (0 where the marginal is 0)."""
    if side == "source":
        _check_shapes(plan, mu0=mu)
        marg = plan.source_marginal
    elif side == "target":
        _check_shapes(plan, mu1=mu)
        marg = plan.target_marginal
    else:
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    pos = marg > 0.0
    vals = np.zeros(len(mu))
    vals[pos] = mu.weights[pos] / marg[pos]
    return DensityRatio(vals, ~pos)


def ratio_at(plan: TransportPlan, side: str, query) -> np.ndarray:
    """Smooth extension of the density ratio to arbitrary positions.

    On the source side the entropic row mass relative to the source weight at
    ``x`` is ``S(x)^(eps/(1+eps))`` with ``S(x) = sum_j K(x, y_j) b_j v_j``, so
    ``sigma(x) = 1 / (scale * S(x)^(eps/(1+eps)))``; the target side is
    symmetric.  Points with no finite-cost partner get ratio 0.
    """
    q = np.atleast_2d(np.asarray(query, dtype=float))
    if side == "source":
        lk = _log_kernel_to(plan, plan.target_points, q)
        ls = logsumexp(lk + (np.log(plan.target_weights) + plan.log_v)[None, :], axis=1)
    elif side == "target":
        lk = _log_kernel_to(plan, plan.source_points, q)
        ls = logsumexp(lk + (np.log(plan.source_weights) + plan.log_u)[None, :], axis=1)
    else:
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    eps = plan.epsilon
    with np.errstate(over="ignore"):
        out = np.exp(-np.log(plan.scale) - (eps / (1.0 + eps)) * ls)
    return np.where(np.isfinite(ls), out, 0.0)


def smoothed_weight(plan: TransportPlan, mu: DiscreteMeasure, side: str, query) -> np.ndarray:
    """Kernel-weighted average of ``mu``'s point weights around each query."""
    q = np.atleast_2d(np.asarray(query, dtype=float))
    idx = plan.rows if side == "source" else plan.cols
    pts = mu.points[idx]
    lk = _log_kernel_to(plan, pts, q)
    top = np.max(lk, axis=1, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    w = np.exp(lk - safe)
    num = w @ mu.weights[idx]
    den = w.sum(axis=1)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)
