import math

import numpy as np
import pytest

from rk4 import StepUnderflowError, rk4, step_count


def test_step_count_covers_the_interval():
    assert step_count(0.0, 1.0, 0.1) == 10
    assert step_count(0.0, 1.0, 0.3) == 4
    assert step_count(1.0, 0.0, 0.25) == 4
    assert step_count(0.5, 0.5, 0.1) == 0


@pytest.mark.parametrize("step", [0.0, -1e-3, math.inf, math.nan, 1e-20])
def test_bad_steps(step):
    with pytest.raises(StepUnderflowError):
        step_count(0.0, 1.0, step)


def test_exponential_growth():
    y = rk4(lambda t, y: y, 0.0, 1.0, np.array([1.0]), 1e-2)
    assert y[0] == pytest.approx(math.e, abs=1e-9)


def test_backwards_integration():
    y = rk4(lambda t, y: y, 1.0, 0.0, np.array([math.e]), 1e-2)
    assert y[0] == pytest.approx(1.0, abs=1e-9)


def test_fourth_order_convergence():
    def error(step):
        return abs(rk4(lambda t, y: -2 * t * y, 0.0, 2.0, np.array([1.0]), step)[0] - math.exp(-4.0))

    assert error(0.1) / error(0.05) > 12


def test_matrix_state_and_projection():
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    calls = []

    def project(w):
        calls.append(1)
        return w

    P = rk4(lambda t, P: J @ P, 0.0, math.pi, np.eye(2), 1e-2, project)
    np.testing.assert_allclose(P, -np.eye(2), atol=1e-9)
    assert len(calls) == step_count(0.0, math.pi, 1e-2)


def test_zero_span_returns_a_copy():
    y0 = np.array([1.0, 2.0])
    y = rk4(lambda t, y: y, 0.3, 0.3, y0, 0.1)
    y[0] = 5.0
    assert y0[0] == 1.0
