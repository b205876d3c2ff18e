"""Numerical checks of the cone geometry behind WFR curves.

A smooth field ``(v, alpha)`` moves particles by ``X' = v(t, X)`` and scales
their cone mass by ``R' = 2 alpha(t, X) R``.  Along such a flow the squared
covariant acceleration of ``(X, R)`` equals ``R^2`` times an expression in
the field and its first derivatives; these checks compare the two sides.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import (ConePath, ConePoint, _acceleration_from, acceleration_norm2, geodesic_path,
                   path_curvature_cost, path_derivatives)
from .decasteljau import control_arrays, decasteljau_arrays, endpoint_arrays
from .errors import BlowUpError, FieldCheckError, GradientMismatchError, VertexError
from .measures import DiscreteMeasure

FD_STEP = 1e-5
SELF_CHECK_TOL = 1e-6


def _field_error(analytic, numeric):
    scale = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / scale))


class SmoothField:
    """Velocity ``v(t, x)`` and growth rate ``alpha(t, x)`` with analytic derivatives.

    Every evaluator takes ``(t, x)`` with ``x`` of shape ``(..., d)`` and ``t``
    broadcastable to ``x.shape[:-1]``.  Shapes of the results:
    ``v, dv_dt, grad_alpha -> (..., d)``, ``jac_v -> (..., d, d)`` with
    ``jac_v[..., i, j] = d v_i / d x_j``, ``alpha, dalpha_dt -> (...)``.

    Parameters
    ----------
    box : (float, float)
        Spatial half-width ``R`` (``|x_i| <= R``) and final time ``T``; the
        field is valid on ``[-R, R]^d x [0, T]``.
    gradient : bool
        Declares ``v = grad alpha``; verified on construction.
    check : bool
        Compare the analytic derivatives with central differences at random
        points of the box and raise :class:`FieldCheckError` on mismatch.
    """

    def __init__(self, dim, v, alpha, dv_dt, jac_v, dalpha_dt, grad_alpha, box=(1.0, 1.0),
                 gradient=False, name="field", check=True, seed=0):
        self.dim = int(dim)
        self.v, self.alpha = v, alpha
        self.dv_dt, self.jac_v = dv_dt, jac_v
        self.dalpha_dt, self.grad_alpha = dalpha_dt, grad_alpha
        self.radius, self.horizon = float(box[0]), float(box[1])
        self.gradient = bool(gradient)
        self.name = name
        if check:
            self.self_check(seed=seed)

    def _evaluate(self, fn, t, x):
        x = np.asarray(x, float)
        t = np.broadcast_to(np.asarray(t, float), x.shape[:-1])
        return np.asarray(fn(t, x), float)

    def sample_points(self, n, seed=0, shrink=0.5):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-shrink * self.radius, shrink * self.radius, size=(n, self.dim))
        t = rng.uniform(0.0, self.horizon, size=n)
        return t, x

    def self_check(self, n=16, seed=0, h=FD_STEP, tol=SELF_CHECK_TOL):
        """Maximum analytic-vs-difference discrepancy; raises above ``tol``."""
        t, x = self.sample_points(n, seed)
        ev = self._evaluate
        eye = np.eye(self.dim) * h
        worst = 0.0
        num_dv = (ev(self.v, t + h, x) - ev(self.v, t - h, x)) / (2 * h)
        worst = max(worst, _field_error(ev(self.dv_dt, t, x), num_dv))
        num_da = (ev(self.alpha, t + h, x) - ev(self.alpha, t - h, x)) / (2 * h)
        worst = max(worst, _field_error(ev(self.dalpha_dt, t, x), num_da))
        jac = np.stack([(ev(self.v, t, x + e) - ev(self.v, t, x - e)) / (2 * h) for e in eye], axis=-1)
        worst = max(worst, _field_error(ev(self.jac_v, t, x), jac))
        grad = np.stack([(ev(self.alpha, t, x + e) - ev(self.alpha, t, x - e)) / (2 * h) for e in eye],
                        axis=-1)
        worst = max(worst, _field_error(ev(self.grad_alpha, t, x), grad))
        if worst > tol:
            raise FieldCheckError(f"{self.name}: analytic derivatives off by {worst:.3g}")
        if self.gradient:
            gap = float(np.max(np.abs(ev(self.v, t, x) - ev(self.grad_alpha, t, x))))
            if gap > 1e-10:
                raise GradientMismatchError(f"{self.name}: |v - grad alpha| = {gap:.3g}")
        return worst


# --- field families ----------------------------------------------------------

def constant_alpha_field(b: float, dim: int = 1, radius: float = 2.0, horizon: float = 1.0):
    """``v = 0``, ``alpha = b``: pure exponential mass growth."""
    zero_v = lambda t, x: np.zeros_like(x)
    return SmoothField(
        dim, zero_v, lambda t, x: np.full(x.shape[:-1], float(b)), zero_v,
        lambda t, x: np.zeros(x.shape + (x.shape[-1],)),
        lambda t, x: np.zeros(x.shape[:-1]), zero_v,
        box=(radius, horizon), gradient=True, name="constant-alpha")


def linear_gradient_field(b, c: float = 0.0, radius: float = 2.0, horizon: float = 1.0):
    """``alpha = (1 + c t) <b, x>``, ``v = grad alpha = (1 + c t) b``."""
    b = np.asarray(b, float)
    dim = b.shape[0]
    return SmoothField(
        dim,
        lambda t, x: (1.0 + c * t)[..., None] * b,
        lambda t, x: (1.0 + c * t) * (x @ b),
        lambda t, x: np.broadcast_to(c * b, x.shape).copy(),
        lambda t, x: np.zeros(x.shape + (dim,)),
        lambda t, x: c * (x @ b),
        lambda t, x: (1.0 + c * t)[..., None] * b,
        box=(radius, horizon), gradient=True, name="linear-alpha")


def quadratic_gradient_field(A, beta=None, radius: float = 2.0, horizon: float = 1.0):
    """``alpha = <x, A x> / 2 + <beta, x>``, ``v = A x + beta`` (``A`` symmetric)."""
    A = np.asarray(A, float)
    A = 0.5 * (A + A.T)
    dim = A.shape[0]
    beta = np.zeros(dim) if beta is None else np.asarray(beta, float)
    return SmoothField(
        dim,
        lambda t, x: x @ A + beta,
        lambda t, x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x) + x @ beta,
        lambda t, x: np.zeros_like(x),
        lambda t, x: np.broadcast_to(A, x.shape + (dim,)).copy(),
        lambda t, x: np.zeros(x.shape[:-1]),
        lambda t, x: x @ A + beta,
        box=(radius, horizon), gradient=True, name="quadratic-alpha")


def translation_field(a, c=None, radius: float = 4.0, horizon: float = 1.0):
    """``v = a`` constant, ``alpha = <c, x>`` (``c = 0`` by default); not a gradient field."""
    a = np.asarray(a, float)
    dim = a.shape[0]
    c = np.zeros(dim) if c is None else np.asarray(c, float)
    return SmoothField(
        dim,
        lambda t, x: np.broadcast_to(a, x.shape).copy(),
        lambda t, x: x @ c,
        lambda t, x: np.zeros_like(x),
        lambda t, x: np.zeros(x.shape + (dim,)),
        lambda t, x: np.zeros(x.shape[:-1]),
        lambda t, x: np.broadcast_to(c, x.shape).copy(),
        box=(radius, horizon), gradient=False, name="translation")


def gradient_families(dim: int = 2, seed: int = 0):
    """The three gradient-field families used by the identity checks."""
    rng = np.random.default_rng(seed)
    b = rng.uniform(-0.5, 0.5, dim)
    M = rng.uniform(-0.3, 0.3, (dim, dim))
    return [
        constant_alpha_field(0.25, dim),
        linear_gradient_field(b, c=0.5),
        quadratic_gradient_field(M + M.T, beta=rng.uniform(-0.3, 0.3, dim)),
    ]


# --- flow integration ----------------------------------------------------------

def _rk4_step(field, t, x, r, dt):
    """One classical RK4 step of ``X' = v``, ``R' = 2 alpha R``; ``dt`` may be an array."""
    ev = field._evaluate
    dtx = np.asarray(dt, float)[..., None]

    def rhs(tt, xx, rr):
        return ev(field.v, tt, xx), 2.0 * ev(field.alpha, tt, xx) * rr

    k1x, k1r = rhs(t, x, r)
    k2x, k2r = rhs(t + dt / 2, x + dtx / 2 * k1x, r + dt / 2 * k1r)
    k3x, k3r = rhs(t + dt / 2, x + dtx / 2 * k2x, r + dt / 2 * k2r)
    k4x, k4r = rhs(t + dt, x + dtx * k3x, r + dt * k3r)
    return (x + dtx * (k1x + 2 * k2x + 2 * k3x + k4x) / 6.0,
            r + dt * (k1r + 2 * k2r + 2 * k3r + k4r) / 6.0)


def _integrate(field, x0, r0, nodes, substeps):
    X = np.empty((len(nodes),) + x0.shape)
    R = np.empty((len(nodes),) + r0.shape)
    X[0], R[0] = x0, r0
    x, r = x0, r0
    for k in range(len(nodes) - 1):
        dt = (nodes[k + 1] - nodes[k]) / substeps
        for j in range(substeps):
            t = nodes[k] + j * dt
            x, r = _rk4_step(field, np.full(r.shape, t), x, r, np.full(r.shape, dt))
        if np.any(np.abs(x) > field.radius) or not np.all(np.isfinite(x)):
            raise BlowUpError(f"trajectory left the box |x| <= {field.radius} before t={nodes[k + 1]}")
        if not np.all(r > 0.0):
            raise BlowUpError("mass factor lost positivity")
        X[k + 1], R[k + 1] = x, r
    return X, R


class FlowPath(ConePath):
    """Flow-map trajectories ``(X_t, R_t)`` on a time grid with dense output.

    Between grid nodes a point is produced by one RK4 step of the required
    length from the node at or below the stencil anchor, so every sample of
    one finite-difference stencil comes from the same smooth local map.
    """

    def __init__(self, field, nodes, X, R, error_estimate, batch):
        self.field = field
        self.nodes = nodes
        self.X, self.R = X, R
        self.error_estimate = error_estimate
        self._batch = batch
        stop = nodes[-1] if len(nodes) > 1 else nodes[0] + 1.0
        super().__init__(self._dense, nodes[0], stop)

    def _dense(self, t, anchor):
        flat_t, flat_a = t.reshape(-1), anchor.reshape(-1)
        k = np.clip(np.searchsorted(self.nodes, flat_a, side="right") - 1, 0, len(self.nodes) - 1)
        x, r = self.X[k], self.R[k]
        dt = np.broadcast_to((flat_t - self.nodes[k])[:, None], r.shape)
        tk = np.broadcast_to(self.nodes[k][:, None], r.shape)
        xs, rs = _rk4_step(self.field, tk, x, r, dt)
        exact = dt == 0.0
        xs = np.where(exact[..., None], x, xs)
        rs = np.where(exact, r, rs)
        if not self._batch:
            xs, rs = xs[:, 0], rs[:, 0]
        return xs.reshape(t.shape + xs.shape[1:]), rs.reshape(t.shape + rs.shape[1:])

    def at_node(self, k):
        if self._batch:
            return self.X[k], self.R[k]
        return ConePoint(self.X[k, 0], float(self.R[k, 0]))


def integrate_flow(field: SmoothField, x0, r0, t_grid, substeps: int = 1,
                   estimate_error: bool = True) -> FlowPath:
    """Integrate the flow map with classical RK4.

    Parameters
    ----------
    field : SmoothField
    x0 : array_like, shape (d,) or (P, d)
        Initial positions (a batch of particles when 2-d).
    r0 : float or array_like, shape (P,)
        Initial cone masses, positive.
    t_grid : array_like
        Increasing output times; one RK4 step (times ``substeps``) per interval.
    estimate_error : bool
        Re-integrate with halved steps and store the largest node difference
        in ``error_estimate``.

    Returns
    -------
    FlowPath
        A :class:`ConePath` whose nodes hold ``(X_t, r0 R_t)``.

    Raises
    ------
    BlowUpError
        If a trajectory leaves the field's box.
    """
    nodes = np.atleast_1d(np.asarray(t_grid, float))
    if np.any(np.diff(nodes) <= 0.0):
        raise ValueError("t_grid must be increasing")
    if nodes[0] < 0.0 or nodes[-1] > field.horizon + 1e-12:
        raise BlowUpError("time grid leaves the field's validity window")
    x0 = np.asarray(x0, float)
    batch = x0.ndim == 2
    x0 = x0 if batch else x0[None]
    r0 = np.broadcast_to(np.asarray(r0, float), x0.shape[:1]).astype(float)
    if np.any(r0 <= 0.0):
        raise VertexError("initial masses must be positive")
    if np.any(np.abs(x0) > field.radius):
        raise BlowUpError("initial positions lie outside the box")
    X, R = _integrate(field, x0, r0, nodes, substeps)
    err = 0.0
    if estimate_error and len(nodes) > 1:
        Xf, Rf = _integrate(field, x0, r0, nodes, 2 * substeps)
        err = float(max(np.max(np.abs(X - Xf)), np.max(np.abs(R - Rf))))
    return FlowPath(field, nodes, X, R, err, batch)


# --- E-cost integrand and the identities ---------------------------------------

FORMS = ("appendix", "tangent", "flow")


def e_cost_integrand(field: SmoothField, x, t, form: str = "appendix"):
    """``|dv/dt + Dv v + 4 alpha v|^2 + 4 (dalpha/dt + m + 2 alpha^2)^2``.

    The middle term ``m`` depends on ``form``: ``"appendix"`` uses
    ``grad(alpha).v / 2``, ``"tangent"`` uses ``|grad alpha|^2 / 2`` and
    ``"flow"`` uses ``grad(alpha).v - |v|^2 / 2``.  The three agree when
    ``v = grad alpha``; only ``"flow"`` matches the covariant acceleration
    of the flow for every field.  ``x`` may be a batch ``(..., d)``.
    """
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}")
    x = np.asarray(x, float)
    ev = field._evaluate
    v, a = ev(field.v, t, x), ev(field.alpha, t, x)
    ga = ev(field.grad_alpha, t, x)
    acc = ev(field.dv_dt, t, x) + np.einsum("...ij,...j->...i", ev(field.jac_v, t, x), v) + 4.0 * a[..., None] * v
    if form == "appendix":
        mid = 0.5 * np.sum(ga * v, axis=-1)
    elif form == "tangent":
        mid = 0.5 * np.sum(ga * ga, axis=-1)
    else:
        mid = np.sum(ga * v, axis=-1) - 0.5 * np.sum(v * v, axis=-1)
    scal = ev(field.dalpha_dt, t, x) + mid + 2.0 * a * a
    out = np.sum(acc * acc, axis=-1) + 4.0 * scal * scal
    return float(out) if np.ndim(out) == 0 else out


def _rel(p, e, atol=1e-12):
    return np.abs(p - e) / np.maximum(np.maximum(np.abs(p), np.abs(e)), atol)


def check_pointwise_identity(field: SmoothField, samples: int = 100, seed: int = 0,
                             form: str = "flow", h: float = 1e-4, dt: float = 0.01) -> float:
    """Max relative gap between ``|z''|^2`` along the flow and ``R^2`` times the integrand.

    Random starts ``x0`` and masses ``r0`` are integrated on a grid of step
    ``dt``; each sample is compared at a random interior grid node, with the
    acceleration from central differences of step ``h``.
    """
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-0.3 * field.radius, 0.3 * field.radius, size=(samples, field.dim))
    r0 = rng.uniform(0.5, 2.0, samples)
    n = int(round(field.horizon / dt))
    nodes = np.linspace(0.0, field.horizon, n + 1)
    path = integrate_flow(field, x0, r0, nodes, estimate_error=False)
    k = rng.integers(1, n, size=samples)
    ts = nodes[k]
    _, xd, xdd, r, rd, rdd = path_derivatives(path, ts, h)
    idx = np.arange(samples)
    xd, xdd, r, rd, rdd = xd[idx, idx], xdd[idx, idx], r[idx, idx], rd[idx, idx], rdd[idx, idx]
    av, ap = _acceleration_from(xd, xdd, r, rd, rdd)
    lhs = r**2 * np.sum(av * av, axis=-1) + ap**2
    X, R = path.X[k, idx], path.R[k, idx]
    rhs = R**2 * e_cost_integrand(field, X, ts, form)
    return float(np.max(_rel(lhs, rhs)))


@dataclass(frozen=True)
class CostComparison:
    e_cost: float
    p_cost: float
    gap: float

    def __iter__(self):
        return iter((self.e_cost, self.p_cost, self.gap))


def check_e_equals_p(field: SmoothField, mu0: DiscreteMeasure, t_steps: int = 1000,
                     h: float = 1e-4, form: str = "appendix") -> CostComparison:
    """Compare the E-cost of the flow's measure curve with the P-cost of its particles.

    Particles start at the support of ``mu0`` with unit cone mass and weight
    ``mu0.weights``.  Both costs use the trapezoid rule on the same grid of
    ``t_steps`` intervals over ``[0, T]``.

    Raises
    ------
    GradientMismatchError
        If the field does not satisfy ``v = grad alpha``.
    """
    if not field.gradient:
        raise GradientMismatchError(f"{field.name} is not declared as a gradient field")
    field.self_check()
    nodes = np.linspace(0.0, field.horizon, t_steps + 1)
    path = integrate_flow(field, mu0.points, np.ones(len(mu0)), nodes, estimate_error=False)
    w = mu0.weights
    integrand = np.stack([(w * path.R[k] ** 2) @ e_cost_integrand(field, path.X[k], nodes[k], form)
                          for k in range(len(nodes))])
    e_cost = float(np.trapezoid(integrand, nodes))
    step = min(h, 0.25 * field.horizon / t_steps)
    p_cost = float(w @ np.atleast_1d(path_curvature_cost(path, t_steps, step)))
    gap = abs(e_cost - p_cost) / max(abs(e_cost), abs(p_cost), 1e-300) if (e_cost or p_cost) else 0.0
    return CostComparison(e_cost, p_cost, float(gap))


def check_wfr_geodesic_hj(z0: ConePoint, z1: ConePoint, samples: int = 50, h: float = 1e-4) -> float:
    """Max cone norm of the covariant acceleration along the geodesic from ``z0`` to ``z1``.

    With ``alpha = r'/(2 r)`` and ``v = x'`` read off each sample, the
    Hamilton-Jacobi residual ``dalpha/dt + |v|^2/2 + 2 alpha^2`` equals the
    mass component of the acceleration divided by ``2 r``, so a vanishing
    acceleration certifies the equation; see :func:`geodesic_hj_residuals`.
    """
    if z0 == z1:
        return 0.0
    path = geodesic_path(z0, z1)
    ts = np.linspace(2 * h, 1.0 - 2 * h, samples)
    return float(np.sqrt(np.max(acceleration_norm2(path, ts, h))))


def geodesic_hj_residuals(z0: ConePoint, z1: ConePoint, samples: int = 50, h: float = 1e-4):
    """Hamilton-Jacobi residual of the particle reading of a geodesic at interior samples."""
    path = geodesic_path(z0, z1)
    ts = np.linspace(2 * h, 1.0 - 2 * h, samples)
    _, xd, xdd, r, rd, rdd = path_derivatives(path, ts, h)
    _, ap = _acceleration_from(xd, xdd, r, rd, rdd)
    return ap / (2.0 * r)


def flow_error(field: SmoothField, x0, r0, exact, n_steps: int) -> float:
    """Final-time error of ``integrate_flow`` against ``exact(T) -> (X, R)``."""
    nodes = np.linspace(0.0, field.horizon, n_steps + 1)
    path = integrate_flow(field, x0, r0, nodes, estimate_error=False)
    X, R = exact(field.horizon)
    return float(max(np.max(np.abs(path.X[-1] - X)), np.max(np.abs(path.R[-1] - R))))


def flow_order_cases():
    """Two flows with closed-form solutions: ``(field, x0, r0, exact)``."""
    b = 1.0
    f1 = constant_alpha_field(b, dim=1)
    x1, r1 = np.array([0.3]), 1.5
    case1 = (f1, x1, r1, lambda T: (x1, r1 * np.exp(2 * b * T)))

    a, c = np.array([0.4, -0.2]), np.array([1.0, 0.5])
    f2 = translation_field(a, c)
    x2, r2 = np.array([0.1, 0.2]), 0.8
    case2 = (f2, x2, r2, lambda T: (x2 + a * T,
                                    r2 * np.exp(2 * (c @ x2 * T + (c @ a) * T**2 / 2))))
    return [case1, case2]


def flow_order_ratios(n_steps: int = 10):
    """Error reduction factor under step halving for each analytic case."""
    out = []
    for field, x0, r0, exact in flow_order_cases():
        coarse = flow_error(field, x0, r0, exact, n_steps)
        fine = flow_error(field, x0, r0, exact, 2 * n_steps)
        out.append(coarse / fine)
    return out


# --- suite ---------------------------------------------------------------------

def _random_segments(rng, n):
    d = 2
    x0 = rng.uniform(-0.5, 0.5, (n, d))
    x3 = x0 + rng.uniform(-0.5, 0.5, (n, d))
    r0, r3 = rng.uniform(0.2, 3.0, n), rng.uniform(0.2, 3.0, n)
    v0, v3 = rng.uniform(-0.5, 0.5, (n, d)), rng.uniform(-0.5, 0.5, (n, d))
    s0 = rng.uniform(-0.5, 0.5, n) * r0
    s3 = rng.uniform(-0.5, 0.5, n) * r3
    return control_arrays(x0, r0, v0, s0, x3, r3, v3, s3, 1.0)


def endpoint_formula_gap(n: int = 200, seed: int = 0, h: float = 1e-5) -> float:
    """Max relative gap between closed-form and Richardson-extrapolated endpoint velocities."""
    rng = np.random.default_rng(seed)
    cx, cr = _random_segments(rng, n)
    v0, s0, v1, s1 = endpoint_arrays(cx, cr)

    def one_sided(t0, sign):
        def diff(step):
            x1, r1 = decasteljau_arrays(cx, cr, t0 + sign * step)
            x0, r0 = decasteljau_arrays(cx, cr, t0)
            return sign * (x1 - x0) / step, sign * (r1 - r0) / step
        # forward differences have O(h) error: extrapolate twice
        (a1, b1), (a2, b2), (a4, b4) = diff(4 * h), diff(2 * h), diff(h)
        ra = (8 * a4 - 6 * a2 + a1) / 3
        rb = (8 * b4 - 6 * b2 + b1) / 3
        return ra, rb

    nv0, ns0 = one_sided(0.0, 1.0)
    nv1, ns1 = one_sided(1.0, -1.0)
    worst = 0.0
    for an, nu in ((v0, nv0), (s0, ns0), (v1, nv1), (s1, ns1)):
        worst = max(worst, float(np.max(np.abs(an - nu) / np.maximum(np.abs(an), 1.0))))
    return worst


CHECKS = {
    "pointwise-identity": (1e-3, "max"),
    "e-equals-p": (1e-3, "max"),
    "e-equals-p-fine": (1e-5, "max"),
    "e-equals-p-analytic": (1e-6, "max"),
    "geodesic-hj": (1e-4, "max"),
    "flow-order": (12.0, "min"),
    "endpoint-velocities": (1e-4, "max"),
}


def _observe(name, seed):
    rng = np.random.default_rng(seed)
    if name == "pointwise-identity":
        return max(check_pointwise_identity(f, 100, seed) for f in gradient_families(2, seed))
    if name in ("e-equals-p", "e-equals-p-fine"):
        steps = 1000 if name == "e-equals-p" else 10_000
        mu0 = DiscreteMeasure(rng.uniform(-0.3, 0.3, (20, 2)), rng.uniform(0.5, 1.5, 20))
        return max(check_e_equals_p(f, mu0, steps).gap for f in gradient_families(2, seed))
    if name == "e-equals-p-analytic":
        b = 0.25
        mu0 = DiscreteMeasure(rng.uniform(-0.3, 0.3, (20, 2)), rng.uniform(0.5, 1.5, 20))
        exact = 16 * b**4 * mu0.mass * (np.exp(4 * b) - 1) / (4 * b)
        e, p, _ = check_e_equals_p(constant_alpha_field(b, 2), mu0, 1000)
        return max(abs(e - exact), abs(p - exact)) / exact
    if name == "geodesic-hj":
        worst = 0.0
        for _ in range(100):
            x0 = rng.uniform(-1, 1, 2)
            step = rng.normal(size=2)
            step *= rng.uniform(0.01, np.pi / 2 - 0.01) / np.linalg.norm(step)
            z0 = ConePoint(x0, rng.uniform(0.2, 3.0))
            z1 = ConePoint(x0 + step, rng.uniform(0.2, 3.0))
            worst = max(worst, check_wfr_geodesic_hj(z0, z1, 20))
        return worst
    if name == "flow-order":
        return min(flow_order_ratios())
    if name == "endpoint-velocities":
        return endpoint_formula_gap(200, seed)
    raise KeyError(name)


def run_checks(names=None, seed: int = 0, thresholds=None):
    """Run the named checks (all by default).

    Returns
    -------
    list of dict
        One record per check with keys ``check``, ``threshold``,
        ``observed`` and ``status`` (``"PASS"`` or ``"FAIL"``).
    """
    thresholds = thresholds or {}
    selected = []
    for pattern in names or list(CHECKS):
        hits = [pattern] if pattern in CHECKS else [c for c in CHECKS if c.startswith(pattern)]
        if not hits:
            raise KeyError(f"unknown check {pattern!r}; choose from {', '.join(CHECKS)}")
        selected.extend(h for h in hits if h not in selected)
    out = []
    for name in selected:
        default, sense = CHECKS[name]
        thr = float(thresholds.get(name, thresholds.get("*", default)))
        obs = float(_observe(name, seed))
        ok = obs <= thr if sense == "max" else obs >= thr
        out.append({"check": name, "threshold": thr, "observed": obs,
                    "status": "PASS" if ok else "FAIL"})
    return out
