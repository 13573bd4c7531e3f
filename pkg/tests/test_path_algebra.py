import math

import hypothesis
import hypothesis.strategies as strat
import numpy as np
import pytest

from path_algebra import (
    CompositionError, DomainError, Interval, Reparam, affine_reparam, analytic_path, arc_length,
    canonical_inverse, canonical_product, compose_reparams, derivative_residual, path_from_config,
    paths_equal, piecewise_linear_reparam, piecewise_path, point_path, power_reparam, reparametrize, restrict,
    sampled_path,
    to_unit_interval, uniform_grid,
)

coords = strat.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
points = strat.lists(coords, min_size=2, max_size=2)


def test_interval_rejects_reversed_ends():
    with pytest.raises(DomainError):
        Interval(1.0, 0.0)


def test_uniform_grid_needs_a_sample():
    with pytest.raises(DomainError):
        uniform_grid(Interval.unit(), 0)
    assert uniform_grid(Interval(2.0, 2.0), 7).tolist() == [2.0]


def test_restrict_to_full_domain_is_identity(line2):
    assert restrict(line2, Interval.unit()) is line2


def test_restrict_keeps_evaluation():
    p = analytic_path("line", Interval(0.0, 2.0), start=[0.0, 0.0], velocity=[1.0, 0.0])
    q = restrict(p, Interval(0.5, 1.5))
    assert q.domain == Interval(0.5, 1.5)
    np.testing.assert_allclose(q.eval(1.0), [1.0, 0.0])


def test_restrict_outside_domain(line2):
    with pytest.raises(DomainError):
        restrict(line2, Interval(0.5, 1.5))


def test_restrict_across_breakpoint(plane_paths):
    bend = plane_paths[-1]
    q = restrict(bend, Interval(0.25, 0.75))
    np.testing.assert_allclose(q.eval(0.5), bend.eval(0.5))
    assert q.breakpoints == (0.5,)


def test_reparametrize_identity(line2):
    q = reparametrize(line2, affine_reparam(Interval.unit(), Interval.unit()))
    assert paths_equal(q, line2)


def test_reparametrize_halving(line2):
    chi = affine_reparam(Interval(0.0, 2.0), Interval.unit())
    q = reparametrize(line2, chi)
    assert q.domain == Interval(0.0, 2.0)
    np.testing.assert_allclose(q.eval(1.0), line2.eval(0.5))


def test_reparametrize_interval_mismatch(line2):
    with pytest.raises(DomainError):
        reparametrize(line2, affine_reparam(Interval.unit(), Interval(0.0, 2.0)))


def test_reparametrized_derivative_follows_chain_rule(circle2):
    q = reparametrize(circle2, power_reparam(2.0))
    assert derivative_residual(q) < 1e-6


def test_reparam_must_be_monotone():
    with pytest.raises(DomainError):
        Reparam(Interval.unit(), Interval.unit(), lambda t: t - 0.5 * math.sin(2 * math.pi * t), lambda y: y)


def test_compose_reparams_domains():
    outer = affine_reparam(Interval(0.0, 2.0), Interval.unit())
    inner = affine_reparam(Interval(0.0, 4.0), Interval(0.0, 2.0))
    chi = compose_reparams(outer, inner)
    assert chi.source == Interval(0.0, 4.0)
    assert chi(4.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        compose_reparams(inner, outer)


def test_canonical_inverse(circle2):
    inv = canonical_inverse(circle2)
    for t in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(inv.eval(t), circle2.eval(1.0 - t), atol=1e-12)


def test_canonical_inverse_needs_unit_domain():
    p = analytic_path("line", Interval(0.0, 2.0), start=[0.0, 0.0], velocity=[1.0, 0.0])
    with pytest.raises(DomainError):
        canonical_inverse(p)
    assert paths_equal(canonical_inverse(to_unit_interval(p)), reparametrize(
        p, affine_reparam(Interval.unit(), Interval(0.0, 2.0), "reversing")))


@hypothesis.given(points, points)
def test_double_inverse_is_identity(start, velocity):
    p = analytic_path("line", Interval.unit(), start=start, velocity=velocity)
    assert paths_equal(canonical_inverse(canonical_inverse(p)), p)


def test_canonical_product(line2):
    back = analytic_path("line", Interval.unit(), start=line2.end, velocity=[0.0, -1.0])
    joined = canonical_product(line2, back)
    np.testing.assert_allclose(joined.eval(0.25), line2.eval(0.5))
    np.testing.assert_allclose(joined.eval(0.75), back.eval(0.5))
    np.testing.assert_allclose(joined.end, back.end)
    assert joined.breakpoints == (0.5,)


def test_canonical_product_needs_matching_endpoints(line2, circle2):
    with pytest.raises(CompositionError):
        canonical_product(line2, circle2)


def test_point_path():
    p = point_path(0.3, [1.0, 2.0])
    assert p.domain.is_point
    np.testing.assert_allclose(p.eval(0.3), [1.0, 2.0])
    with pytest.raises(DomainError):
        p.eval(0.4)


def test_piecewise_pieces_must_agree():
    a = analytic_path("line", Interval(0.0, 0.5), start=[0.0, 0.0], velocity=[1.0, 0.0])
    b = analytic_path("line", Interval(0.5, 1.0), start=[0.0, 0.0], velocity=[1.0, 0.0])
    c = analytic_path("line", Interval(0.6, 1.0), start=[0.0, 0.0], velocity=[1.0, 0.0])
    assert piecewise_path([a, b]).is_c1
    with pytest.raises(CompositionError):
        piecewise_path([a, c])
    with pytest.raises(CompositionError):
        piecewise_path([a, analytic_path("line", Interval(0.5, 1.0), start=[1.0, 0.0], velocity=[1.0, 0.0])])


def test_cubic_sampled_path_reproduces_a_line():
    knots = np.linspace(0.0, 1.0, 6)
    values = [[2 * t, 1 - t] for t in knots]
    p = sampled_path(knots, values)
    np.testing.assert_allclose(p.eval(0.37), [0.74, 0.63], atol=1e-9)
    np.testing.assert_allclose(p.deriv(0.37), [2.0, -1.0], atol=1e-8)


def test_sampled_path_rejects_bad_knots():
    with pytest.raises(DomainError):
        sampled_path([0.0, 1.0, 0.5, 2.0], [[0, 0]] * 4, order=1)
    with pytest.raises(DomainError):
        sampled_path([0.0, 1.0], [[0, 0], [1, 1]], order=3)


def test_config_round_trip(plane_paths):
    for p in plane_paths:
        q = path_from_config(p.to_config())
        assert q.domain.matches(p.domain)
        assert paths_equal(p, q)


def test_unknown_formula():
    with pytest.raises(DomainError):
        analytic_path("spiral", Interval.unit())


def test_circle_arc_length(circle2):
    assert arc_length(circle2) == pytest.approx(2 * math.pi, rel=1e-8)
    assert arc_length(circle2, 0.5, 0.25) == pytest.approx(-math.pi / 2, rel=1e-8)


def test_reparam_kinks_become_path_breakpoints(line2):
    chi = piecewise_linear_reparam([0.0, 0.3, 1.0], [0.0, 0.6, 1.0])
    assert reparametrize(line2, chi).breakpoints == (0.3,)
    stretched = compose_reparams(chi, affine_reparam(Interval(0.0, 2.0), Interval.unit()))
    assert stretched.breakpoints == pytest.approx((0.6,))


def test_reversed_power_reparam():
    chi = power_reparam(2.0, reverse=True)
    assert chi(0.5) == pytest.approx(0.75)
    assert chi.deriv(0.0) == pytest.approx(2.0)
    assert chi.inverse_map(0.75) == pytest.approx(0.5)


@hypothesis.settings(max_examples=25, deadline=None)
@hypothesis.given(points, points, points, points)
def test_canonical_product_is_associative_up_to_reparametrization(start, v1, v2, accel):
    p = np.asarray(start)
    g1 = analytic_path("line", Interval.unit(), name="g1", start=p, velocity=v1)
    g2 = analytic_path("line", Interval.unit(), name="g2", start=g1.end, velocity=v2)
    g3 = analytic_path("quadratic", Interval.unit(), name="g3", start=g2.end, velocity=v1, accel=accel)
    left = canonical_product(canonical_product(g1, g2), g3)
    right = canonical_product(g1, canonical_product(g2, g3))
    # left runs g1, g2, g3 on quarters [0, 1/4, 1/2, 1]; right on [0, 1/2, 3/4, 1]
    chi = piecewise_linear_reparam([0.0, 0.25, 0.5, 1.0], [0.0, 0.5, 0.75, 1.0])
    assert paths_equal(left, reparametrize(right, chi), tol=1e-9)


def test_canonical_product_is_not_strictly_associative():
    g1 = analytic_path("line", Interval.unit(), name="g1", start=[0.0, 0.0], velocity=[1.0, 0.0])
    g2 = analytic_path("line", Interval.unit(), name="g2", start=[1.0, 0.0], velocity=[0.0, 1.0])
    g3 = analytic_path("line", Interval.unit(), name="g3", start=[1.0, 1.0], velocity=[-1.0, 0.0])
    left = canonical_product(canonical_product(g1, g2), g3)
    right = canonical_product(g1, canonical_product(g2, g3))
    np.testing.assert_allclose(left.end, right.end, atol=1e-12)
    assert not paths_equal(left, right)
