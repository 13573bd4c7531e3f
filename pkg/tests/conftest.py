import math

import numpy as np
import pytest

from path_algebra import Interval, analytic_path, piecewise_path, sampled_path
from transport_core import SamplingPlan


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit():
    return Interval.unit()


@pytest.fixture
def line2():
    return analytic_path("line", Interval.unit(), name="line", start=[0.0, 0.0], velocity=[1.0, 0.5])


@pytest.fixture
def circle2():
    return analytic_path("circle", Interval.unit(), name="circle", center=[0.0, 0.0], radius=1.0)


@pytest.fixture
def plane_paths():
    """Five C1 paths in R^2 with assorted domains and kinds."""
    bend = piecewise_path([
        analytic_path("line", Interval(0.0, 0.5), name="leg1", start=[0.0, 0.0], velocity=[2.0, 0.0]),
        analytic_path("line", Interval(0.5, 1.0), name="leg2", start=[1.0, -0.5], velocity=[0.0, 1.0]),
    ], name="bend")
    return (
        analytic_path("line", Interval.unit(), name="line", start=[0.0, 0.0], velocity=[1.0, 0.5]),
        analytic_path("circle", Interval.unit(), name="circle", center=[0.5, 0.0], radius=0.5),
        analytic_path("quadratic", Interval(-1.0, 1.0), name="parabola",
                      start=[0.2, 0.1], velocity=[0.5, -0.3], accel=[0.1, 0.4]),
        sampled_path([0.0, 0.5, 1.0, 1.5, 2.0], [[0, 0], [0.5, 0.3], [1.0, 0.2], [1.2, 0.8], [1.0, 1.0]],
                     name="spline"),
        bend,
    )


@pytest.fixture
def plan(plane_paths):
    return SamplingPlan(plane_paths, grid_size=5)


@pytest.fixture
def latitude_loop():
    """Latitude circle at colatitude pi/3 in the (theta, phi) chart of S^2."""
    return analytic_path("line", Interval.unit(), name="latitude",
                         start=[math.pi / 3, 0.0], velocity=[0.0, 2 * math.pi])
