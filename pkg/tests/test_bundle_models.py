import math

import numpy as np
import pytest

from bundle_models import (
    FiberError, ModelError, SingularChartError, bundle_from_config, element_from_config, finite_bundle,
    foliated_bundle, principal_bundle, sphere_christoffel, sphere_surface, sphere_tangent_bundle, vector_bundle,
)
from lie_groups import rotation2
from path_algebra import DomainError


def test_vector_fibre_accepts_payload():
    E = vector_bundle(2, 2)
    u = E.element([0.0, 1.0], [1.0, -2.0])
    np.testing.assert_allclose(u.payload, [1.0, -2.0])
    assert E.total_dim == 4
    with pytest.raises(FiberError):
        E.element([0.0, 1.0], [1.0, 2.0, 3.0])


def test_base_point_dimension_is_checked():
    with pytest.raises(DomainError):
        vector_bundle(2, 1).fiber_at([0.0, 1.0, 2.0])


def test_group_fibre_rejects_non_members():
    E = principal_bundle(2, "SO2")
    E.element([0.0, 0.0], rotation2(0.7))
    with pytest.raises(FiberError):
        E.element([0.0, 0.0], np.diag([2.0, 0.5]))


def test_finite_fibre_indices():
    E = finite_bundle(1, 3)
    assert E.element([0.0], 2).payload == 2
    assert E.element([0.0], 1.0).payload == 1
    with pytest.raises(FiberError):
        E.element([0.0], 3)
    # every element, every time
    assert [u.payload for u in E.sample_elements([0.0], np.random.default_rng(0))] == [0, 1, 2]


def test_distance_adds_base_gap():
    E = vector_bundle(1, 1)
    u, v = E.element([0.0], [1.0]), E.element([2.0], [1.0])
    assert E.distance(u, u) == 0.0
    assert E.distance(u, v) == pytest.approx(2.0)


def test_fibre_membership():
    E = vector_bundle(2, 1)
    fibre = E.fiber_at([1.0, 1.0])
    assert fibre.contains(fibre.element([3.0]))
    with pytest.raises(FiberError):
        fibre.require(E.element([1.0, 2.0], [3.0]))


def test_sphere_poles_are_singular():
    with pytest.raises(SingularChartError):
        sphere_tangent_bundle().fiber_at([0.0, 1.0])
    with pytest.raises(SingularChartError):
        sphere_christoffel(math.pi)


def test_sphere_chart_wraps_longitude():
    S = sphere_surface()
    assert S.same_point([math.pi / 3, 0.0], [math.pi / 3, 2 * math.pi])
    assert not S.same_point([math.pi / 3, 0.0], [math.pi / 4, 0.0])


def test_sphere_christoffel_matches_metric(rng):
    report = sphere_surface().verify(rng, samples=20)
    assert report["passed"], report


def test_sphere_christoffel_values():
    gamma = sphere_christoffel(math.pi / 4)
    assert gamma[0, 1, 1] == pytest.approx(-0.5)
    assert gamma[1, 0, 1] == pytest.approx(1.0)
    assert gamma[1, 1, 0] == gamma[1, 0, 1]


def test_foliation_leaf_invariants(rng):
    E = foliated_bundle(1, 1)
    fol = E.fiber.foliation
    assert fol.verify(rng)["passed"]
    # K_c = {(x, x + c)}
    np.testing.assert_allclose(fol.leaf_point([0.5], [2.0]), [2.5])
    np.testing.assert_allclose(fol.classify([2.0], [2.5]), [0.5])


def test_unknown_section():
    with pytest.raises(ModelError):
        foliated_bundle(1, 1, "spiral")


def test_vertical_basis_of_group_fibre():
    E = principal_bundle(2, "SO2")
    u = E.element([0.0, 0.0], rotation2(0.2))
    V = E.vertical_basis(u)
    assert V.shape == (6, 1)
    np.testing.assert_allclose(V[:2], 0.0)


def test_total_coords_round_trip():
    E = vector_bundle(2, 3)
    u = E.element([1.0, 2.0], [3.0, 4.0, 5.0])
    v = E.from_total_coords(E.total_coords(u))
    assert E.distance(u, v) == 0.0


@pytest.mark.parametrize("mapping, kind", [
    ({"base": {"kind": "Rn", "dim": 2}, "fiber": {"kind": "vector", "rank": 2}}, "vector"),
    ({"base": {"kind": "sphere"}, "fiber": {"kind": "vector", "rank": 2}}, "vector"),
    ({"base": {"kind": "Rn", "dim": 2}, "fiber": {"kind": "group", "group": "SO3"}}, "group"),
    ({"base": {"kind": "Rn", "dim": 1}, "fiber": {"kind": "foliation", "rank": 1}}, "leaf"),
    ({"base": {"kind": "Rn", "dim": 1}, "fiber": {"kind": "finite", "size": 4}}, "finite"),
])
def test_bundle_from_config(mapping, kind):
    assert bundle_from_config(mapping).fiber_kind == kind


@pytest.mark.parametrize("mapping", [
    {"base": {"kind": "torus"}, "fiber": {"kind": "vector", "rank": 1}},
    {"base": {"kind": "Rn", "dim": 1}, "fiber": {"kind": "spinor"}},
    {"base": {"kind": "Rn", "dim": 1}, "fiber": {"kind": "group", "group": "GLn"}},
    {"base": {"kind": "sphere"}, "fiber": {"kind": "foliation"}},
])
def test_bad_bundle_configs(mapping):
    with pytest.raises(ModelError):
        bundle_from_config(mapping)


def test_element_from_config():
    E = bundle_from_config({"base": {"kind": "Rn", "dim": 1}, "fiber": {"kind": "finite", "size": 4}})
    assert element_from_config(E, {"base": [0.5], "payload": 3}).payload == 3


def test_foliation_disjointness_sees_collapsed_labels(rng, monkeypatch):
    fol = foliated_bundle(2, 1, "sine").fiber.foliation
    report = fol.verify(rng)
    assert report["passed"]
    assert set(report) == {"section", "disjointness", "cover", "passed"}
    # a classifier that puts every point on one leaf merges distinct leaves
    monkeypatch.setattr(type(fol), "classify", lambda self, x, y: np.zeros(self.rank))
    broken = fol.verify(rng)
    assert broken["disjointness"] > 0.1
    assert not broken["passed"]


@pytest.mark.parametrize("mapping, base, payload", [
    ({"base": {"kind": "Rn", "dim": 2}, "fiber": {"kind": "vector", "rank": 3}}, [0.5, -1.0], [1.0, 2.0, 3.0]),
    ({"base": {"kind": "Rn", "dim": 2}, "fiber": {"kind": "group", "group": "SO2"}}, [0.0, 1.0], rotation2(0.3).tolist()),
    ({"base": {"kind": "sphere"}, "fiber": {"kind": "vector", "rank": 2}}, [1.0, 0.5], [0.0, 1.0]),
])
def test_element_from_config_round_trip(mapping, base, payload):
    E = bundle_from_config(mapping)
    u = element_from_config(E, {"base": base, "payload": payload})
    v = element_from_config(E, u.to_config())
    assert E.distance(u, v) == 0.0
    np.testing.assert_allclose(u.payload, payload)
