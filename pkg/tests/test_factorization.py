import numpy as np
import pytest

from bundle_models import finite_bundle, vector_bundle
from example_transports import group_transport_left, point_field
from factorization import (
    anchor_sweep, factorization_from_tables, factorize, factorized_transport, finite_round_trip, gauge_map,
    gauge_recovery, permutation_tables, reconstruct, reconstruct_residual, regauge, verify_gauge,
)
from lie_groups import group_model, rotation2
from path_algebra import DomainError, Interval, analytic_path
from transport_core import SamplingPlan, is_parallel_transport_along_paths, right_multiplication

SO2 = group_model("SO2")
GRID = [0.0, 0.25, 0.5, 1.0]


@pytest.fixture
def field_transport():
    return group_transport_left(point_field(SO2, "angle_sum"))


@pytest.fixture
def line1():
    return analytic_path("line", Interval.unit(), name="line1", start=[0.0], velocity=[1.0])


def test_reconstruct_recovers_transport(field_transport, line2):
    fac = factorize(field_transport, line2, 0.5)
    assert fac.model.same_fibre(field_transport.fibre(line2, 0.5))
    assert reconstruct_residual(fac, field_transport, GRID).passed


def test_factorize_anchor_outside_domain(field_transport, line2):
    with pytest.raises(DomainError):
        factorize(field_transport, line2, 1.5)


def test_reconstructed_transport_is_tied_to_its_path(field_transport, line2, circle2):
    T = reconstruct(factorize(field_transport, line2, 0.0))
    with pytest.raises(DomainError):
        T.at(circle2, 0.0, 1.0)


def test_regauge_is_recovered_by_gauge_map(field_transport, line2):
    fac = factorize(field_transport, line2, 0.0)
    h = rotation2(0.7)
    moved = regauge(fac, right_multiplication(fac.model, fac.model, h, "D"))
    G = gauge_map(moved, fac, GRID)
    assert G.independence.passed
    q = fac.model.element(rotation2(0.2))
    np.testing.assert_allclose(G.D.apply(q).payload, rotation2(0.9), atol=1e-12)
    assert verify_gauge(G, moved, fac, GRID).passed


def test_regauge_needs_a_map_out_of_the_model(field_transport, line2):
    fac = factorize(field_transport, line2, 0.0)
    elsewhere = fac.bundle.fiber_at([5.0, 5.0])
    with pytest.raises(DomainError):
        regauge(fac, right_multiplication(elsewhere, elsewhere, rotation2(0.1)))


def test_anchor_sweep(field_transport, line2):
    report = anchor_sweep(field_transport, line2, [0.0, 0.5, 1.0], GRID)
    assert report.passed
    assert report.laws == ["gauge", "gauge-independence"]


def test_factorized_transport_is_parallel(field_transport, plane_paths):
    T = factorized_transport(field_transport, 0.5)
    assert is_parallel_transport_along_paths(T, SamplingPlan(plane_paths[:3], grid_size=4)).passed


def test_factorized_transport_anchor_fraction(field_transport):
    with pytest.raises(DomainError):
        factorized_transport(field_transport, 1.5)


@pytest.mark.parametrize("size", [1, 2, 5])
def test_finite_round_trip(size, line1, rng):
    report = finite_round_trip(finite_bundle(1, size), line1, [0.0, 0.25, 0.5, 0.75, 1.0], rng)
    assert report.passed, report.failed_laws()
    assert "round-trip" in report.laws


def test_gauge_recovery(line1, rng):
    report = gauge_recovery(finite_bundle(1, 6), line1, [0.0, 0.5, 1.0], rng)
    assert report.passed, report.failed_laws()


def test_permutation_tables(line1):
    E = finite_bundle(1, 3)
    fac = factorization_from_tables(E, line1, {0.0: [0, 1, 2], 1.0: [2, 0, 1]})
    frame = permutation_tables(fac, [0.0, 1.0])
    assert list(frame.columns) == ["s", "element", "image"]
    assert len(frame) == 6
    assert frame[frame["s"] == 1.0]["image"].tolist() == [2, 0, 1]
    T = reconstruct(fac)
    # F_1^-1 o F_0 sends 0 -> 1
    assert T.at(line1, 0.0, 1.0).table == (1, 2, 0)


def test_tables_are_only_defined_where_tabulated(line1):
    fac = factorization_from_tables(finite_bundle(1, 2), line1, {0.0: [1, 0]})
    with pytest.raises(DomainError):
        fac.F(0.5)


def test_tables_need_a_finite_fibre(line2):
    with pytest.raises(DomainError):
        factorization_from_tables(vector_bundle(2, 2), line2, {0.0: [0, 1]})
