import math

import numpy as np
import pytest

from bundle_models import ModelError, vector_bundle
from example_transports import (
    arclength, check_path_independence, constant, default_foliation_transport, domain_length,
    foliation_transport, functional_from_config, group_transport_left, group_transport_right, parametric,
    point_field,
)
from lie_groups import group_model, rotation2, so3_exp
from path_algebra import CompositionError, Interval, affine_reparam, analytic_path
from transport_core import (
    SamplingPlan, check_groupoid, check_reparam, check_restriction, is_parallel_transport_along_paths,
    transport_suite,
)

SO2 = group_model("SO2")
SO3 = group_model("SO3")
U1 = group_model("U1")


def test_constant_functional_gives_identity(line2):
    T = group_transport_left(constant(SO2))
    u = T.fibre(line2, 0.0).element(rotation2(0.4))
    np.testing.assert_allclose(T.at(line2, 0.0, 1.0).apply(u).payload, rotation2(0.4), atol=1e-12)


def test_left_transport_formula(line2):
    f = point_field(SO2, "angle_sum")
    T = group_transport_left(f)
    u = T.fibre(line2, 0.0).element(rotation2(0.2))
    # f(gamma, t) = R(x + y); gamma(0) = (0, 0), gamma(1) = (1, 0.5)
    np.testing.assert_allclose(T.at(line2, 0.0, 1.0).apply(u).payload, rotation2(0.2 - 1.5), atol=1e-12)


def test_right_transport_formula(line2):
    f = parametric(SO2, rate=1.0)
    T = group_transport_right(f)
    u = T.fibre(line2, 0.0).element(rotation2(0.3))
    # g f(s) f(t)^-1 = R(0.3) R(0) R(-1)
    np.testing.assert_allclose(T.at(line2, 0.0, 1.0).apply(u).payload, rotation2(-0.7), atol=1e-12)


@pytest.mark.parametrize("build", [group_transport_left, group_transport_right])
@pytest.mark.parametrize("f", [point_field(SO2, "angle_sum"), constant(SO2, rotation2(0.9))])
def test_pointwise_functionals_give_parallel_transports(build, f, plan):
    assert is_parallel_transport_along_paths(build(f), plan).passed


def test_so3_field_transport(plane_paths):
    T = group_transport_left(point_field(SO3, "euler_zx"))
    assert is_parallel_transport_along_paths(T, SamplingPlan(plane_paths[:2], grid_size=4)).passed


@pytest.mark.parametrize("build", [group_transport_left, group_transport_right])
def test_parametric_functional_breaks_reparametrization(build, plan):
    T = build(parametric(SO2, rate=1.0))
    assert transport_suite(T, plan).passed
    report = is_parallel_transport_along_paths(T, plan)
    assert report.failed_laws() == ["reparametrization"]
    assert report.by_law("reparametrization").witnesses


def test_domain_length_breaks_restriction(line2):
    T = group_transport_left(domain_length(SO2, rate=1.0))
    grid = [0.25, 0.5, 0.75]
    assert check_groupoid(T, line2, grid).passed
    assert not check_restriction(T, line2, Interval(0.25, 0.75), grid).passed


def test_arclength_survives_restriction_and_domain_change(line2):
    T = group_transport_left(arclength(SO2, rate=1.0))
    assert check_restriction(T, line2, Interval(0.25, 0.75), [0.25, 0.5, 0.75], tol=1e-8).passed
    chi = affine_reparam(Interval(0.0, 2.0), Interval.unit())
    assert check_reparam(T, line2, chi, [0.0, 1.0, 2.0], tol=1e-8).passed


def test_functional_from_config():
    assert functional_from_config({"kind": "parametric", "rate": 2.0}, SO2).dependency == "parametric"
    assert functional_from_config({"kind": "field", "name": "euler_zx"}, SO3).dependency == "pointwise"
    assert functional_from_config({}, SO2).name == "constant"
    with pytest.raises(ModelError):
        functional_from_config({"kind": "random"}, SO2)
    with pytest.raises(ModelError):
        point_field(SO3, "angle_sum")


def test_foliation_transport_slides_along_leaves():
    T = default_foliation_transport()
    gamma = analytic_path("line", Interval.unit(), start=[0.0], velocity=[1.0])
    u = T.fibre(gamma, 0.0).element([2.0])
    # leaf through (0, 2) is {(x, x + 2)}
    np.testing.assert_allclose(T.at(gamma, 0.0, 1.0).apply(u).payload, [3.0])


@pytest.mark.parametrize("section", ["identity", "zero", "sine"])
def test_foliation_transport_is_parallel(section):
    T = default_foliation_transport(1, 1, section)
    paths = (
        analytic_path("line", Interval.unit(), name="line", start=[0.0], velocity=[1.0]),
        analytic_path("quadratic", Interval(0.0, 2.0), name="quad", start=[0.5], velocity=[1.0], accel=[-1.0]),
    )
    assert is_parallel_transport_along_paths(T, SamplingPlan(paths, grid_size=5)).passed


def test_foliation_transport_is_path_independent():
    T = default_foliation_transport(1, 1, "sine")
    straight = analytic_path("line", Interval.unit(), name="straight", start=[0.0], velocity=[1.0])
    detour = analytic_path("quadratic", Interval.unit(), name="detour", start=[0.0], velocity=[2.0], accel=[-1.0])
    assert check_path_independence(T, straight, detour).passed
    with pytest.raises(CompositionError):
        check_path_independence(T, straight, analytic_path("line", Interval.unit(), start=[0.0], velocity=[2.0]))


def test_parametric_transport_depends_on_the_path():
    T = group_transport_left(parametric(SO2, rate=1.0))
    short = analytic_path("line", Interval.unit(), name="short", start=[0.0, 0.0], velocity=[1.0, 0.0])
    long = analytic_path("line", Interval(0.0, 2.0), name="long", start=[0.0, 0.0], velocity=[0.5, 0.0])
    assert not check_path_independence(T, short, long).passed


def test_foliation_needs_leaf_fibre():
    with pytest.raises(ModelError):
        foliation_transport(vector_bundle(1, 1))


def test_transport_of_rotation_field_is_holonomy_free(circle2):
    T = group_transport_left(point_field(SO2, "angle_sum"))
    u = T.fibre(circle2, 0.0).element(rotation2(math.pi / 5))
    np.testing.assert_allclose(T.at(circle2, 0.0, 1.0).apply(u).payload, rotation2(math.pi / 5), atol=1e-12)


def _left_right_gap(f, g, paths):
    left, right = group_transport_left(f), group_transport_right(f)
    gap = 0.0
    for gamma in paths:
        lo, hi = gamma.domain.lo, gamma.domain.hi
        u = left.fibre(gamma, lo).element(g)
        gap = max(gap, float(np.linalg.norm(left.at(gamma, lo, hi).apply(u).payload
                                            - right.at(gamma, lo, hi).apply(u).payload)))
    return gap


def test_abelian_left_and_right_transports_agree(plane_paths):
    assert _left_right_gap(point_field(U1, "angle_sum"), rotation2(0.7), plane_paths) < 1e-12


def test_non_abelian_left_and_right_transports_differ(plane_paths):
    # both are law-abiding, but f(t) and the fibre element no longer commute
    assert _left_right_gap(point_field(SO3, "euler_zx"), so3_exp([0.3, -0.2, 0.5]), plane_paths) > 0.1
