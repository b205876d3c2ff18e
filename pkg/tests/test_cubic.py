import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wfrspline.cubic import KnotSeries, cubic_eval, natural_cubic_fit
from wfrspline.errors import OutOfRangeError, TimeOrderError


def test_two_knots_is_a_line():
    fit = natural_cubic_fit(KnotSeries([0.0, 2.0], [[1.0], [5.0]]))
    assert np.allclose(fit.velocities, 2.0)
    assert cubic_eval(fit, 0.5)[0] == pytest.approx(2.0)


def test_linear_data_reproduced_exactly():
    t = np.array([0.0, 1.0, 2.0, 10.0])
    fit = natural_cubic_fit(KnotSeries(t, np.stack([3 * t + 1, -t], axis=1)))
    assert np.allclose(fit.velocities, [[3.0, -1.0]] * 4)
    assert np.allclose(fit.moments, 0.0)


def test_natural_end_conditions_and_continuity():
    t = np.array([0.0, 0.5, 2.0, 3.0, 3.5])
    y = np.sin(t)
    fit = natural_cubic_fit(KnotSeries(t, y))
    assert fit.moments[0, 0] == 0.0 and fit.moments[-1, 0] == 0.0
    h = 1e-6
    for k in range(1, len(t) - 1):
        left = (cubic_eval(fit, t[k]) - cubic_eval(fit, t[k] - h)) / h
        right = (cubic_eval(fit, t[k] + h) - cubic_eval(fit, t[k])) / h
        assert left[0] == pytest.approx(fit.velocities[k, 0], abs=1e-5)
        assert right[0] == pytest.approx(fit.velocities[k, 0], abs=1e-5)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=8))
def test_knot_values_returned_exactly(vals):
    t = np.arange(len(vals), dtype=float) ** 1.3
    fit = natural_cubic_fit(KnotSeries(t, vals))
    out = cubic_eval(fit, t)
    assert np.array_equal(out[:, 0], np.asarray(vals, float))


def test_validation():
    with pytest.raises(TimeOrderError):
        KnotSeries([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        KnotSeries([0.0], [1.0])
    fit = natural_cubic_fit(KnotSeries([0.0, 1.0], [0.0, 1.0]))
    with pytest.raises(OutOfRangeError):
        cubic_eval(fit, 1.5)
