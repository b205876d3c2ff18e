import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wfrspline.cone import (ConePath, ConePoint, ConeTangent, cone_distance, cone_inner,
                            covariant_acceleration, geodesic_eval, geodesic_path,
                            path_curvature_cost)
from wfrspline.errors import DomainError, StepError, VertexError

coord = st.floats(-10, 10, allow_nan=False)
mass = st.floats(0, 5, allow_nan=False)


def pt(x, r):
    return ConePoint(np.atleast_1d(x), r)


# --- points and distance -------------------------------------------------------

def test_vertex_points_compare_and_hash_equal():
    a, b = pt([1.0, 2.0], 0.0), pt([-3.0, 0.5], 0.0)
    assert a == b
    assert hash(a) == hash(b)
    assert np.array_equal(a.x, [0.0, 0.0])
    assert pt([1.0], 1.0) != pt([1.0], 0.0)


def test_negative_mass_rejected():
    with pytest.raises(ValueError):
        ConePoint([0.0], -1.0)


def test_tangent_must_be_finite():
    with pytest.raises(ValueError):
        ConeTangent([np.inf], 0.0)


@pytest.mark.parametrize("a, b, expected", [
    (((0.0,), 1.0), ((0.0,), 1.0), 0.0),
    (((0.0,), 1.0), ((np.pi / 2,), 1.0), np.sqrt(2.0)),
    (((0.0,), 1.0), ((4.0,), 1.0), 2.0),
    (((0.0,), 1.0), ((0.0,), 4.0), 3.0),
])
def test_distance_examples(a, b, expected):
    assert cone_distance(pt(*a), pt(*b)) == pytest.approx(expected, abs=1e-15)


@given(st.lists(coord, min_size=2, max_size=2), mass, st.lists(coord, min_size=2, max_size=2))
def test_distance_to_vertex_is_mass(x, r, y):
    assert cone_distance(pt(x, r), pt(y, 0.0)) == r


@given(st.lists(coord, min_size=2, max_size=2), mass, st.lists(coord, min_size=2, max_size=2), mass)
def test_distance_symmetric_and_zero_iff_equal(x, r, y, s):
    a, b = pt(x, r), pt(y, s)
    assert cone_distance(a, b) == cone_distance(b, a)
    assert cone_distance(a, a) == 0.0
    if cone_distance(a, b) == 0.0:
        assert a == b or np.linalg.norm(a.x - b.x) < 1e-300 or (r == 0 and s == 0)


def test_distance_matches_cosine_formula(rng):
    x0, x1 = rng.uniform(-2, 2, (500, 2)), rng.uniform(-2, 2, (500, 2))
    r0, r1 = rng.uniform(0, 3, 500), rng.uniform(0, 3, 500)
    for a, ra, b, rb in zip(x0, r0, x1, r1):
        th = min(np.linalg.norm(a - b), np.pi)
        ref = np.sqrt(max(ra**2 + rb**2 - 2 * ra * rb * np.cos(th), 0.0))
        assert cone_distance(pt(a, ra), pt(b, rb)) == pytest.approx(ref, abs=1e-7)


# --- metric --------------------------------------------------------------------

def test_inner_product_examples():
    e1 = np.array([1.0, 0.0])
    assert cone_inner(pt([0, 0], 1.0), ConeTangent(e1, 0.0), ConeTangent(e1, 0.0)) == 1.0
    assert cone_inner(pt([0, 0], 2.0), ConeTangent(e1, 0.0), ConeTangent([0, 0], 3.0)) == 0.0
    assert cone_inner(pt([0, 0], 2.0), ConeTangent(e1, 1.0), ConeTangent(e1, 1.0)) == 5.0


def test_inner_product_at_vertex_fails():
    with pytest.raises(VertexError):
        cone_inner(pt([0.0], 0.0), ConeTangent([1.0], 0.0), ConeTangent([1.0], 0.0))


@given(st.floats(0.1, 3), st.lists(coord, min_size=6, max_size=6))
def test_inner_product_bilinear_symmetric(r, c):
    base = pt([0.0, 0.0], r)
    u, w = ConeTangent(c[:2], c[2]), ConeTangent(c[3:5], c[5])
    assert cone_inner(base, u, w) == pytest.approx(cone_inner(base, w, u))
    two_u = ConeTangent(2 * u.v, 2 * u.p)
    assert cone_inner(base, two_u, w) == pytest.approx(2 * cone_inner(base, u, w), rel=1e-12, abs=1e-9)


# --- geodesics -----------------------------------------------------------------

def test_geodesic_endpoints_exact(rng):
    for _ in range(50):
        x0 = rng.uniform(-1, 1, 3)
        step = rng.normal(size=3)
        step *= rng.uniform(0, 1.5) / np.linalg.norm(step)
        z0, z1 = pt(x0, rng.uniform(0.1, 3)), pt(x0 + step, rng.uniform(0.1, 3))
        assert geodesic_eval(z0, z1, 0.0) == z0
        assert geodesic_eval(z0, z1, 1.0) == z1


def test_geodesic_near_quarter_turn():
    z = geodesic_eval(pt([0.0], 1.0), pt([np.pi / 2 - 1e-9], 1.0), 0.5)
    assert z.x[0] == pytest.approx(np.pi / 4, abs=1e-8)
    assert z.r == pytest.approx(1 / np.sqrt(2), abs=1e-8)


def test_geodesic_matches_arccos_closed_form(rng):
    for _ in range(100):
        th = rng.uniform(1e-3, 1.5)
        r0, r1, t = rng.uniform(0.2, 3), rng.uniform(0.2, 3), rng.uniform(0, 1)
        z = geodesic_eval(pt([0.0], r0), pt([th], r1), t)
        r2 = (1 - t) ** 2 * r0**2 + t**2 * r1**2 + 2 * t * (1 - t) * r0 * r1 * np.cos(th)
        rho = np.arccos(np.clip(((1 - t) * r0 + t * r1 * np.cos(th)) / np.sqrt(r2), -1, 1)) / th
        assert z.r == pytest.approx(np.sqrt(r2), rel=1e-12)
        assert z.x[0] == pytest.approx(rho * th, abs=1e-7)


def test_same_position_geodesic_is_linear_in_mass():
    z = geodesic_eval(pt([0.3, 0.2], 1.0), pt([0.3, 0.2], 3.0), 0.25)
    assert np.array_equal(z.x, [0.3, 0.2])
    assert z.r == pytest.approx(1.5)


def test_tiny_separation_uses_continuous_limit():
    a = geodesic_eval(pt([0.0], 1.0), pt([1e-9], 2.0), 0.5)
    b = geodesic_eval(pt([0.0], 1.0), pt([1e-4], 2.0), 0.5)
    assert a.x[0] / 1e-9 == pytest.approx(b.x[0] / 1e-4, rel=1e-6)


def test_geodesic_errors():
    with pytest.raises(DomainError):
        geodesic_eval(pt([0.0], 1.0), pt([np.pi / 2], 1.0), 0.5)
    with pytest.raises(VertexError):
        geodesic_eval(pt([0.0], 0.0), pt([0.5], 1.0), 0.5)


def test_geodesic_to_vertex_at_same_position():
    z = geodesic_eval(pt([0.0], 2.0), pt([0.0], 0.0), 0.5)
    assert z.r == pytest.approx(1.0)


@given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.0, 1.55),
       st.floats(0, 1), st.floats(0, 1))
def test_constant_speed(r0, r1, th, s, t):
    z0, z1 = pt([0.1, -0.2], r0), pt([0.1 + th, -0.2], r1)
    d = cone_distance(z0, z1)
    gap = cone_distance(geodesic_eval(z0, z1, s), geodesic_eval(z0, z1, t)) - abs(t - s) * d
    assert abs(gap) <= 1e-9


# --- acceleration and curvature cost -------------------------------------------

def test_constant_path_has_zero_acceleration():
    path = ConePath.from_scalar(lambda t: ([0.5, 0.1], 2.0))
    acc = covariant_acceleration(path, 0.5)
    assert np.allclose(acc.v, 0.0) and acc.p == pytest.approx(0.0, abs=1e-6)


def test_exponential_mass_path():
    b = 0.3
    path = ConePath.from_scalar(lambda t: ([0.2], np.exp(2 * b * t)))
    for t in (0.0, 0.4, 1.0):
        acc = covariant_acceleration(path, t)
        assert acc.v[0] == pytest.approx(0.0, abs=1e-9)
        assert acc.p == pytest.approx(4 * b**2 * np.exp(2 * b * t), rel=1e-5)


def test_acceleration_norm_formula():
    path = ConePath.from_scalar(lambda t: ([np.sin(t), t**2], 1.0 + t**2))
    t, h = 0.4, 1e-4
    acc = covariant_acceleration(path, t, h)
    x, xd, xdd = np.array([np.sin(t), t**2]), np.array([np.cos(t), 2 * t]), np.array([-np.sin(t), 2.0])
    r, rd, rdd = 1 + t**2, 2 * t, 2.0
    ref = np.sum((r * xdd + 2 * rd * xd) ** 2) + (rdd - r * xd @ xd) ** 2
    norm2 = r**2 * acc.v @ acc.v + acc.p**2
    assert norm2 == pytest.approx(ref, rel=1e-6)


def test_acceleration_errors():
    path = geodesic_path(pt([0.0], 1.0), pt([0.5], 2.0))
    with pytest.raises(StepError):
        covariant_acceleration(path, 5e-5, 1e-4)
    shrink = ConePath.from_scalar(lambda t: ([0.0], 1.0 - t))
    with pytest.raises(VertexError):
        covariant_acceleration(shrink, 1.0)


def test_geodesics_are_autoparallel(rng):
    for _ in range(100):
        x0 = rng.uniform(-1, 1, 2)
        step = rng.normal(size=2)
        step *= rng.uniform(0.01, np.pi / 2 - 0.01) / np.linalg.norm(step)
        path = geodesic_path(pt(x0, rng.uniform(0.2, 3)), pt(x0 + step, rng.uniform(0.2, 3)))
        t = rng.uniform(0.01, 0.99)
        acc = covariant_acceleration(path, t, 1e-4)
        r = path(t).r
        assert np.sqrt(r**2 * acc.v @ acc.v + acc.p**2) <= 1e-4


def test_curvature_cost_examples():
    b = 0.1
    const = ConePath.from_scalar(lambda t: ([0.0], 1.0))
    assert path_curvature_cost(const, 50) == pytest.approx(0.0, abs=1e-8)
    geo = geodesic_path(pt([0.0, 0.0], 1.0), pt([1.0, 0.3], 2.0))
    assert path_curvature_cost(geo, 200) <= 1e-8
    grow = ConePath(lambda t, a: (np.zeros(t.shape + (1,)), np.exp(2 * b * t)))
    exact = 16 * b**4 * (np.exp(4 * b) - 1) / (4 * b)
    assert path_curvature_cost(grow, 1000) == pytest.approx(exact, rel=1e-6)


def test_curvature_cost_needs_two_steps():
    with pytest.raises(ValueError):
        path_curvature_cost(ConePath.from_scalar(lambda t: ([0.0], 1.0)), 1)
