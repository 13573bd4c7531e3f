import numpy as np
import pytest

from bundle_models import finite_bundle, foliated_bundle, vector_bundle
from connection_engine import Probe, line_probe, principal_connection, sphere_connection, transport_from_connection
from example_transports import foliation_transport, group_transport_left, group_transport_right, parametric, point_field
from factorization import factorized_transport
from law_reports import AXIOM_IDS
from lie_groups import group_model, rotation2
from parallel_bridge import (
    check_axioms, check_case_split, continuity_smoke, parallel_lift_conditions, round_trip_T, round_trip_psi,
    to_parallel, to_transport,
)
from path_algebra import Interval, analytic_path
from transport_core import SamplingPlan, identity_transport, transport_suite

SO2 = group_model("SO2")
SO3 = group_model("SO3")


@pytest.fixture
def field_transport():
    return group_transport_left(point_field(SO2, "angle_sum"))


def test_to_parallel_uses_the_whole_domain(field_transport, line2):
    psi = to_parallel(field_transport)
    u = field_transport.fibre(line2, 0.0).element(np.eye(2))
    np.testing.assert_allclose(psi.at(line2).apply(u).payload, rotation2(-1.5), atol=1e-12)
    assert psi.precondition is None


@pytest.mark.parametrize("build", [group_transport_left, group_transport_right])
@pytest.mark.parametrize("group, field", [(SO2, "angle_sum"), (SO3, "euler_zx")])
def test_law_abiding_transport_satisfies_axioms(build, group, field, plan):
    T = build(point_field(group, field))
    psi = to_parallel(T, plan)
    assert psi.precondition.passed
    report = check_axioms(psi, plan)
    assert report.passed, report.failed_laws()
    assert report.laws == sorted(AXIOM_IDS)


def test_parametric_transport_breaks_reparam_invariance(plan):
    T = group_transport_left(parametric(SO2, rate=1.0))
    assert transport_suite(T, plan).passed
    psi = to_parallel(T, plan)
    assert not psi.precondition.passed
    report = check_axioms(psi, plan)
    assert not report.passed
    assert report.axiom("reparam-invariance").witnesses
    assert report.axiom("point-path").passed


def test_round_trips(field_transport, plan):
    assert round_trip_T(field_transport, plan).passed
    assert round_trip_psi(to_parallel(field_transport), plan).passed


def test_to_transport_case_split(field_transport, plane_paths):
    P = to_transport(to_parallel(field_transport))
    for gamma in plane_paths:
        grid = list(np.linspace(gamma.domain.lo, gamma.domain.hi, 4))
        assert check_case_split(P, gamma, grid).passed


def test_to_transport_is_a_parallel_transport(plan):
    P = to_transport(to_parallel(identity_transport(vector_bundle(2, 3))))
    assert transport_suite(P, plan).passed


def test_finite_bridge(rng):
    E = finite_bundle(1, 4)
    gamma = analytic_path("line", Interval.unit(), name="line1", start=[0.0], velocity=[1.0])
    psi = to_parallel(identity_transport(E))
    plan = SamplingPlan((gamma,), grid_size=3)
    assert check_axioms(psi, plan, tol=0.5).passed
    assert round_trip_psi(psi, plan, tol=0.5).passed
    assert continuity_smoke(psi, gamma).skipped


def test_continuity_smoke(field_transport, circle2):
    report = continuity_smoke(to_parallel(field_transport), circle2)
    assert report.passed
    assert report.max_residual < 1e-5


def test_composable_pairs_are_checked(field_transport, plan, line2):
    back = analytic_path("line", Interval.unit(), name="back", start=line2.end, velocity=[-1.0, 0.0])
    report = check_axioms(to_parallel(field_transport), plan, pairs=[(line2, back)])
    assert report.axiom("concatenation").passed


def test_lift_conditions_through_the_bridge():
    c = principal_connection("SO2", "uniform", omega=1.5)
    psi = to_parallel(transport_from_connection(c, 1e-3))
    x = np.array([0.2, 0.3])
    p = c.bundle.element(x, rotation2(0.4))
    curved = analytic_path("quadratic", Interval(-0.1, 0.1), name="curved",
                           start=x, velocity=[0.6, 0.8], accel=[0.5, -0.3])
    probes = [line_probe(x, [0.6, 0.8]), Probe(curved, 0.0), line_probe(x, [-0.3, 1.0])]
    report = parallel_lift_conditions(psi, p, probes, coeffs=(2.0, -0.5), lift_samples=201)
    assert report.passed, report.failed_laws()
    assert report.laws == ["c1-smoothness", "initial-uniqueness", "linearization"]


def _sphere_plan(latitude_loop):
    segment = analytic_path("line", Interval.unit(), name="segment", start=[1.0, 0.2], velocity=[0.5, 1.0])
    return SamplingPlan((latitude_loop, segment), grid_size=4)


@pytest.fixture(params=["foliation", "factorized", "sphere"])
def backend(request, plan, latitude_loop):
    if request.param == "foliation":
        return foliation_transport(foliated_bundle(2, 1, "sine")), plan
    if request.param == "factorized":
        return factorized_transport(group_transport_left(point_field(SO3, "euler_zx")), anchor_frac=0.5), plan
    return transport_from_connection(sphere_connection(), 1e-3), _sphere_plan(latitude_loop)


def test_bridge_on_other_backends(backend):
    T, plan = backend
    psi = to_parallel(T, plan)
    assert psi.precondition.passed, psi.precondition.failed_laws()
    report = check_axioms(psi, plan)
    assert report.passed, report.failed_laws()
    assert round_trip_T(T, plan).passed
    assert round_trip_psi(psi, plan).passed
