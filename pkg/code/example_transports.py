"""
example_transports.py
---------------------------
Two explicit families of transports along paths.

Foliation transport: in a foliated product bundle, move u along the leaf
through u until it meets the fibre over gamma(t). The result depends on the
endpoints gamma(s), gamma(t) only.

Group transport on B x G, for a path functional f(gamma, s) in G:

    left   (gamma(s), g) -> (gamma(t), f(gamma, t)^-1 f(gamma, s) g)
    right  (gamma(s), g) -> (gamma(t), g f(gamma, s) f(gamma, t)^-1)

Both satisfy the groupoid laws for any f. Whether they also survive
restriction and reparametrization depends on what f looks at:

| combinator      | dependency | restriction | reparametrization |
|-----------------|------------|-------------|-------------------|
| `constant`      | pointwise  | yes         | yes               |
| `field`         | pointwise  | yes         | yes               |
| `arclength`     | global     | yes         | yes               |
| `parametric`    | parametric | yes         | no                |
| `domain_length` | global     | no          | no                |
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

import config
from bundle_models import BundleModel, ModelError, foliated_bundle, principal_bundle
from law_reports import LawAccumulator, LawReport
from lie_groups import GroupModel, rotation2
from path_algebra import CompositionError, PathSpec, arc_length
from transport_core import FiberMap, TransportFamily, linear_map, right_multiplication

logger = logging.getLogger(__name__)

Dependency = Literal["pointwise", "parametric", "global"]


@dataclass(frozen=True, eq=False)
class PathFunctional:
    fn: Callable[[PathSpec, float], np.ndarray] = field(repr=False)
    dependency: Dependency
    group: GroupModel
    name: str
    recipe: dict = field(default_factory=dict)

    def __call__(self, gamma: PathSpec, s: float) -> np.ndarray:
        g = self.group.renormalize(np.asarray(self.fn(gamma, s), dtype=float))
        residual = self.group.constraint_residual(g)
        if residual >= 1e-10:
            raise ModelError(f"functional {self.name} left {self.group.id} (residual {residual:.3g})")
        return g

    def to_config(self) -> dict:
        return dict(self.recipe)


# ───────────────────────────────────────────────
# Combinators
# ───────────────────────────────────────────────

def constant(group: GroupModel, value=None) -> PathFunctional:
    g = group.identity if value is None else np.asarray(value, dtype=float)
    return PathFunctional(lambda gamma, s: g, "pointwise", group, "constant", {"kind": "constant"})


def _angle_sum(x, group):
    return rotation2(float(np.sum(x)))


def _euler_zx(x, group):
    x = np.pad(np.asarray(x, dtype=float), (0, max(0, 2 - len(x))))
    return group.exp(x[0] * group.lie_basis[2]) @ group.exp(x[1] * group.lie_basis[0])


FIELDS: dict[str, tuple[tuple[str, ...], Callable]] = {
    "angle_sum": (("SO2", "U1"), _angle_sum),
    "euler_zx": (("SO3",), _euler_zx),
}


def point_field(group: GroupModel, name: str) -> PathFunctional:
    """f(gamma, s) = h(gamma(s)) for a named rotation field h."""
    if name not in FIELDS:
        raise ModelError(f"unknown field {name!r}; known: {sorted(FIELDS)}")
    groups, h = FIELDS[name]
    if group.id not in groups:
        raise ModelError(f"field {name!r} is defined for {groups}, not {group.id}")
    return PathFunctional(lambda gamma, s: h(gamma.eval(s), group), "pointwise", group,
                          f"field({name})", {"kind": "field", "name": name})


def parametric(group: GroupModel, rate: float, axis: int = 0) -> PathFunctional:
    """f(gamma, s) = exp(rate * s * X_axis): sees the raw parameter."""
    x = group.lie_basis[axis]
    return PathFunctional(lambda gamma, s: group.exp(rate * s * x), "parametric", group,
                          f"parametric({rate:g})", {"kind": "parametric", "rate": rate, "axis": axis})


def arclength(group: GroupModel, rate: float, axis: int = 0) -> PathFunctional:
    """f(gamma, s) = exp(rate * L(gamma|[lo, s]) * X_axis)."""
    x = group.lie_basis[axis]
    return PathFunctional(lambda gamma, s: group.exp(rate * arc_length(gamma, gamma.domain.lo, s) * x),
                          "global", group, f"arclength({rate:g})",
                          {"kind": "arclength", "rate": rate, "axis": axis})


def domain_length(group: GroupModel, rate: float, axis: int = 0) -> PathFunctional:
    """f(gamma, s) = exp(rate * s * |J| * X_axis) with J = gamma.domain."""
    x = group.lie_basis[axis]
    return PathFunctional(lambda gamma, s: group.exp(rate * s * gamma.domain.length * x),
                          "global", group, f"domain_length({rate:g})",
                          {"kind": "domain_length", "rate": rate, "axis": axis})


def functional_from_config(mapping: dict, group: GroupModel) -> PathFunctional:
    kind = mapping.get("kind", "constant")
    axis = int(mapping.get("axis", 0))
    if kind == "constant":
        return constant(group, mapping.get("value"))
    if kind == "field":
        return point_field(group, mapping["name"])
    if kind == "parametric":
        return parametric(group, float(mapping["rate"]), axis)
    if kind == "arclength":
        return arclength(group, float(mapping["rate"]), axis)
    if kind == "domain_length":
        return domain_length(group, float(mapping["rate"]), axis)
    raise ModelError(f"unknown path functional {kind!r}")


# ───────────────────────────────────────────────
# Transports
# ───────────────────────────────────────────────

def group_transport_left(f: PathFunctional, G: GroupModel | None = None, base_dim: int = 2,
                         bundle: BundleModel | None = None) -> TransportFamily:
    G = G or f.group
    bundle = bundle or principal_bundle(base_dim, G)

    def at(gamma, s, t):
        h = G.multiply(G.invert(f(gamma, t)), f(gamma, s))
        return linear_map(bundle.fiber_at(gamma.eval(s)), bundle.fiber_at(gamma.eval(t)), h, f"left[{s:g}->{t:g}]")

    return TransportFamily(bundle, at, "group-left", config.ALGEBRAIC_TOLERANCE, f"group-left({f.name})")


def group_transport_right(f: PathFunctional, G: GroupModel | None = None, base_dim: int = 2,
                          bundle: BundleModel | None = None) -> TransportFamily:
    G = G or f.group
    bundle = bundle or principal_bundle(base_dim, G)

    def at(gamma, s, t):
        h = G.multiply(f(gamma, s), G.invert(f(gamma, t)))
        return right_multiplication(bundle.fiber_at(gamma.eval(s)), bundle.fiber_at(gamma.eval(t)), h,
                                    f"right[{s:g}->{t:g}]")

    return TransportFamily(bundle, at, "group-right", config.ALGEBRAIC_TOLERANCE, f"group-right({f.name})")


def foliation_transport(bundle: BundleModel) -> TransportFamily:
    """Slide along the leaf through u to the fibre over gamma(t)."""
    if bundle.fiber_kind != "leaf":
        raise ModelError(f"foliation transport needs a foliated bundle, got fibre kind {bundle.fiber_kind!r}")
    fol = bundle.fiber.foliation

    def at(gamma, s, t):
        xs, xt = gamma.eval(s), gamma.eval(t)
        return FiberMap(
            bundle.fiber_at(xs), bundle.fiber_at(xt),
            lambda y: fol.leaf_point(fol.classify(xs, y), xt),
            lambda y: fol.leaf_point(fol.classify(xt, y), xs),
            f"leaf[{s:g}->{t:g}]",
        )

    return TransportFamily(bundle, at, "foliation", config.ALGEBRAIC_TOLERANCE, f"foliation({fol.section_id})")


def default_foliation_transport(base_dim: int = 1, rank: int = 1, section_id: str = "identity") -> TransportFamily:
    return foliation_transport(foliated_bundle(base_dim, rank, section_id))


def check_path_independence(T: TransportFamily, gamma1: PathSpec, gamma2: PathSpec,
                            seed: int = config.DEFAULT_SEED, tol: float | None = None) -> LawReport:
    """Endpoint maps of two paths with common endpoints, compared on fibre samples."""
    base = T.bundle.base
    if not (base.same_point(gamma1.start, gamma2.start) and base.same_point(gamma1.end, gamma2.end)):
        raise CompositionError(f"paths {gamma1.name!r} and {gamma2.name!r} do not share endpoints")
    m1 = T.at(gamma1, gamma1.domain.lo, gamma1.domain.hi)
    m2 = T.at(gamma2, gamma2.domain.lo, gamma2.domain.hi)
    acc = LawAccumulator("path-independence", T.tolerance if tol is None else tol)
    fibre = T.bundle.fiber_at(gamma1.start)
    for k, u in enumerate(fibre.samples(np.random.default_rng(seed), config.FIBER_SAMPLES)):
        # m2 starts over gamma2.start, which may differ from gamma1.start in the chart
        u2 = m2.source.element(u.payload)
        acc.add(T.bundle.fiber.distance(m1.apply(u).payload, m2.apply(u2).payload),
                paths=f"{gamma1.name}|{gamma2.name}", element=k)
    return acc.report()
