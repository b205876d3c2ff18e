import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from wfrspline.errors import (DanglingSourceError, DimensionError, EmptyMeasureError,
                              ScaleError, ZeroWeightError)
from wfrspline.measures import DiscreteMeasure, gaussian_bump, grid_1d
from wfrspline.uot import (barycentric_map, cost_matrix, density_ratio, map_extend,
                           primal_objective, ratio_at, solve_entropic, wfr_distance)


def dirac(x, m):
    return DiscreteMeasure(np.atleast_2d(np.asarray(x, float)), [m])


def two_dirac_oracle(a, b, theta):
    """Exact squared WFR between a*delta_0 and b*delta_theta by 1D minimization."""
    c = np.cos(min(theta, np.pi / 2))
    if c <= 0.0:
        return a + b

    def energy(m):
        return a + b - 2.0 * m * (1.0 + np.log(a * b * c * c / m**2) / 2.0) + 2 * m

    # minimize KL(m|a) + KL(m|b) - 2 m log(cos theta) over the transported mass m
    def obj(m):
        return (m * np.log(m / a) - m + a) + (m * np.log(m / b) - m + b) - 2 * m * np.log(c)

    res = minimize_scalar(obj, bounds=(1e-12, 10 * max(a, b)), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.fun)


def test_oracle_matches_closed_form():
    for a, b, th in [(1.0, 1.0, 0.3), (0.2, 3.0, 1.2), (2.0, 0.5, 2.0)]:
        ref = a + b - 2 * np.sqrt(a * b) * np.cos(min(th, np.pi / 2))
        assert two_dirac_oracle(a, b, th) == pytest.approx(ref, rel=1e-9)


def test_cost_matrix_infinite_beyond_quarter_turn():
    cm = cost_matrix(DiscreteMeasure([[0.0]], [1.0]), DiscreteMeasure([[0.5], [2.0]], [1.0, 1.0]))
    assert cm.values[0, 0] == pytest.approx(-np.log(np.cos(0.5) ** 2))
    assert np.isinf(cm.values[0, 1])


def test_identical_diracs_have_zero_distance():
    mu = dirac([0.2], 1.0)
    plan = solve_entropic(mu, mu, epsilon=1e-3)
    assert plan.converged
    assert wfr_distance(plan, mu, mu) < 1e-3


def test_pure_growth_between_diracs():
    mu0, mu1 = dirac([0.0], 1.0), dirac([0.0], 4.0)
    plan = solve_entropic(mu0, mu1, epsilon=1e-3)
    assert wfr_distance(plan, mu0, mu1) ** 2 == pytest.approx(1.0, rel=1e-2)


def test_far_diracs_are_destroy_and_create():
    mu0, mu1 = dirac([0.0], 1.0), dirac([2.0], 1.0)
    plan = solve_entropic(mu0, mu1, epsilon=1e-3)
    assert plan.mass == 0.0
    assert primal_objective(plan, mu0, mu1) == pytest.approx(2.0)


def test_two_dirac_random(rng):
    for _ in range(20):
        a, b, th = rng.uniform(0.1, 4), rng.uniform(0.1, 4), rng.uniform(0, np.pi)
        mu0, mu1 = dirac([0.0], a), dirac([th], b)
        plan = solve_entropic(mu0, mu1, epsilon=1e-3)
        assert wfr_distance(plan, mu0, mu1) ** 2 == pytest.approx(two_dirac_oracle(a, b, th),
                                                                   rel=2e-2)


def test_input_validation():
    with pytest.raises(DimensionError):
        solve_entropic(dirac([0.0], 1.0), dirac([0.0, 0.0], 1.0))
    with pytest.raises(EmptyMeasureError):
        solve_entropic(DiscreteMeasure([[0.0]], [0.0]), dirac([0.0], 1.0))
    with pytest.raises(ScaleError):
        solve_entropic(dirac([0.0], 1.0), dirac([0.0], 1.0), epsilon=0.0)


def test_nonconvergence_is_reported_not_raised():
    g = grid_1d(0.0, 1.0, 64)
    mu0, mu1 = gaussian_bump([0.3], 0.1, 1.0, g), gaussian_bump([0.7], 0.1, 2.0, g)
    plan = solve_entropic(mu0, mu1, epsilon=1e-3, max_iters=2)
    assert not plan.converged
    assert plan.iterations == 2
    assert set(plan.diagnostics()) >= {"epsilon", "iterations", "residual", "converged"}


def test_objective_history_is_monotone():
    g = grid_1d(0.0, 1.0, 64)
    mu0, mu1 = gaussian_bump([0.3], 0.1, 1.0, g), gaussian_bump([0.6], 0.1, 1.5, g)
    plan = solve_entropic(mu0, mu1, epsilon=1e-2, record_every=1)
    h = np.array(plan.history)
    assert len(h) > 3
    assert np.all(np.diff(h) <= 1e-8)


def test_translation_step_does_not_change_the_answer():
    g = grid_1d(0.0, 1.0, 40)
    mu0, mu1 = gaussian_bump([0.4], 0.1, 1.0, g), gaussian_bump([0.6], 0.1, 1.2, g)
    fast = solve_entropic(mu0, mu1, epsilon=0.05, translate=True, tol=1e-11)
    slow = solve_entropic(mu0, mu1, epsilon=0.05, translate=False, tol=1e-11, max_iters=50_000)
    assert fast.converged and slow.converged
    assert fast.iterations < slow.iterations
    assert np.allclose(fast.dense(), slow.dense(), rtol=1e-6, atol=1e-12)


def test_scaling_invariant_by_rescaled_plan():
    g = grid_1d(0.0, 1.0, 40)
    mu0, mu1 = gaussian_bump([0.4], 0.1, 1.0, g), gaussian_bump([0.6], 0.1, 1.2, g)
    plan = solve_entropic(mu0, mu1, epsilon=0.05)
    half = plan.scaled(0.5)
    assert half.mass == pytest.approx(0.5 * plan.mass)
    assert primal_objective(half, mu0, mu1) == pytest.approx(primal_objective(plan, mu0, mu1))
    assert plan.normalized().mass == pytest.approx(1.0)


def test_barycentric_map_and_extension_agree_on_support():
    g = grid_1d(0.0, 1.0, 30)
    mu0, mu1 = gaussian_bump([0.3], 0.1, 1.0, g), gaussian_bump([0.6], 0.1, 1.0, g)
    plan = solve_entropic(mu0, mu1, epsilon=0.01, prune=1e-14)
    keep = plan.source_marginal > 0
    bary = barycentric_map(plan, mu1) if keep.all() else None
    ext = map_extend(plan, mu1, mu0.points[keep])
    if bary is not None:
        assert np.allclose(bary, ext, atol=1e-10)
    assert np.all(np.diff(ext[:, 0]) >= -1e-12)  # monotone in 1D


def test_barycentric_map_dangling_source():
    mu0 = DiscreteMeasure([[0.0], [3.0]], [1.0, 1.0])
    mu1 = dirac([0.1], 1.0)
    plan = solve_entropic(mu0, mu1, epsilon=1e-2)
    with pytest.raises(DanglingSourceError) as info:
        barycentric_map(plan, mu1)
    assert info.value.index == 1
    with pytest.raises(ZeroWeightError):
        map_extend(plan, mu1, [[3.0]])
    assert np.isnan(map_extend(plan, mu1, [[3.0]], strict=False)).all()


def test_ratio_extension_matches_support_ratio():
    g = grid_1d(0.0, 1.0, 30)
    mu0, mu1 = gaussian_bump([0.3], 0.1, 1.0, g), gaussian_bump([0.6], 0.1, 2.0, g)
    plan = solve_entropic(mu0, mu1, epsilon=0.01, tol=1e-12)
    for side, mu in (("source", mu0), ("target", mu1)):
        dr = density_ratio(plan, mu, side)
        ok = ~dr.singular & (mu.weights > 0)
        ext = ratio_at(plan, side, mu.points[ok])
        assert np.allclose(ext, dr.values[ok], rtol=1e-6)
    with pytest.raises(ValueError):
        density_ratio(plan, mu0, "sideways")
