import numpy as np
import pytest
from hypothesis import given, strategies as st

from centrisk.potential import DOUBLE_WELL


def test_fixed_values():
    assert DOUBLE_WELL.eval_derivative(1, -1.0) == 0.0
    assert DOUBLE_WELL.eval_derivative(2, 1.0) == 2.0
    assert DOUBLE_WELL.eval_derivative(0, 0.0) == 0.0
    assert DOUBLE_WELL.eval_derivative(2, 0.0) == -1.0
    assert DOUBLE_WELL.eval_derivative(4, 3.7) == 6.0


def test_stable_states_are_critical_points():
    for x in DOUBLE_WELL.stable_states:
        assert DOUBLE_WELL.eval_derivative(1, x) == pytest.approx(0.0, abs=1e-15)
        assert DOUBLE_WELL.eval_derivative(2, x) > 0


@pytest.mark.parametrize("order", [-1, 5, 7])
def test_order_out_of_range(order):
    with pytest.raises(ValueError):
        DOUBLE_WELL.eval_derivative(order, 0.5)


@given(st.floats(-3, 3), st.integers(0, 3))
def test_derivative_matches_finite_difference(x, order):
    step = 1e-4
    fd = (
        DOUBLE_WELL.eval_derivative(order, x + step)
        - DOUBLE_WELL.eval_derivative(order, x - step)
    ) / (2 * step)
    exact = DOUBLE_WELL.eval_derivative(order + 1, x)
    assert fd == pytest.approx(exact, abs=1e-6)


@given(st.floats(-10, 10))
def test_symmetry(x):
    assert DOUBLE_WELL.eval_derivative(0, -x) == pytest.approx(
        DOUBLE_WELL.eval_derivative(0, x), rel=1e-14, abs=1e-14
    )
    assert DOUBLE_WELL.eval_derivative(1, -x) == pytest.approx(
        -DOUBLE_WELL.eval_derivative(1, x), rel=1e-14, abs=1e-14
    )


def test_vectorized():
    x = np.linspace(-2, 2, 7)
    v = DOUBLE_WELL.eval_derivative(0, x)
    assert v.shape == x.shape
    assert np.allclose(v, 0.25 * x**4 - 0.5 * x**2)
