"""
transport_core.py
---------------------------
Transports along paths: families I^gamma_{s->t} of invertible fibre maps, and
executable checkers for the laws such a family must satisfy.

    groupoid-composition  I_{s->t} o I_{r->s} = I_{r->t}
    identity              I_{s->s} = id
    inverse               I_{t->s} o I_{s->t} = id
    restriction           I^{gamma|J}_{s->t} = I^gamma_{s->t}
    reparametrization     I^{gamma o chi}_{s->t} = I^gamma_{chi(s)->chi(t)}

The first three make a transport along paths; all five make a parallel
transport along paths. Fibre maps are compared by evaluation on sampled
fibre elements (every element of a finite fibre, `config.FIBER_SAMPLES`
seeded random elements otherwise).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal, Optional, Sequence

import numpy as np

import config
from bundle_models import BundleModel, FiberDescriptor, FiberElement, FiberError
from law_reports import LawAccumulator, LawReport, SuiteReport
from path_algebra import (
    DomainError, Interval, PathSpec, Reparam, affine_reparam, compose_reparams,
    piecewise_linear_reparam, power_reparam, reparametrize, restrict, uniform_grid,
)

logger = logging.getLogger(__name__)

Backend = Literal[
    "foliation", "group-left", "group-right", "connection", "factorized",
    "adversarial", "identity", "parallel",
]
Payload = object


# ───────────────────────────────────────────────
# Fibre maps
# ───────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FiberMap:
    source: FiberDescriptor
    target: FiberDescriptor
    forward: Callable[[Payload], Payload]
    backward: Callable[[Payload], Payload]
    name: str = "map"
    # optional closed forms: payload matrix (acting on the left) or permutation table
    matrix: Optional[np.ndarray] = field(default=None, repr=False)
    table: Optional[tuple[int, ...]] = None

    def apply(self, u: FiberElement) -> FiberElement:
        self.source.require(u)
        return self.target.element(self.forward(u.payload))

    __call__ = apply

    @cached_property
    def inverse(self) -> "FiberMap":
        matrix = None if self.matrix is None else np.linalg.inv(self.matrix)
        table = None if self.table is None else tuple(int(i) for i in np.argsort(self.table))
        return FiberMap(self.target, self.source, self.backward, self.forward, f"{self.name}^-1", matrix, table)

    def then(self, other: "FiberMap") -> "FiberMap":
        """other o self: apply self first."""
        if not self.target.same_fibre(other.source):
            raise FiberError(f"cannot compose {self.name} with {other.name}: fibres differ")
        matrix = None
        if self.matrix is not None and other.matrix is not None:
            matrix = other.matrix @ self.matrix
        table = None
        if self.table is not None and other.table is not None:
            table = tuple(other.table[i] for i in self.table)
        return FiberMap(
            self.source, other.target,
            lambda p: other.forward(self.forward(p)),
            lambda p: self.backward(other.backward(p)),
            f"{other.name}.{self.name}", matrix, table,
        )

    def inverse_residual(self, elements: Sequence[FiberElement]) -> float:
        bundle = self.source.bundle
        return max((bundle.distance(self.inverse.apply(self.apply(u)), u) for u in elements), default=0.0)


def identity_map(fibre: FiberDescriptor, target: FiberDescriptor | None = None) -> FiberMap:
    """Payload-preserving map; with a target, carries payloads unchanged to another fibre of a trivial bundle."""
    target = target or fibre
    table = None
    if fibre.bundle.fiber_kind == "finite":
        table = tuple(range(fibre.bundle.fiber.size))
    matrix = None
    if fibre.bundle.fiber_kind in ("vector", "leaf"):
        matrix = np.eye(fibre.bundle.fiber.coord_dim)
    return FiberMap(fibre, target, lambda p: p, lambda p: p, "id", matrix, table)


def linear_map(source: FiberDescriptor, target: FiberDescriptor, m: np.ndarray, name: str = "linear") -> FiberMap:
    """Payload v -> m v (vector payloads) or g -> m g (group payloads)."""
    m = np.asarray(m, dtype=float)
    m_inv = np.linalg.inv(m)
    return FiberMap(source, target, lambda p: m @ p, lambda p: m_inv @ p, name, m)


def right_multiplication(source: FiberDescriptor, target: FiberDescriptor, h: np.ndarray,
                         name: str = "right") -> FiberMap:
    h = np.asarray(h, dtype=float)
    group = source.bundle.fiber.group
    h_inv = group.invert(h)
    return FiberMap(source, target, lambda g: group.multiply(g, h), lambda g: group.multiply(g, h_inv), name)


def permutation_map(source: FiberDescriptor, target: FiberDescriptor, table: Sequence[int],
                    name: str = "perm") -> FiberMap:
    table = tuple(int(i) for i in table)
    if sorted(table) != list(range(len(table))):
        raise FiberError(f"{table} is not a permutation")
    inv = tuple(int(i) for i in np.argsort(table))
    return FiberMap(source, target, lambda i: table[i], lambda i: inv[i], name, None, table)


def compare_maps(a: FiberMap, b: FiberMap, elements: Sequence[FiberElement]) -> float:
    """Max distance between a(u) and b(u) over the given elements."""
    bundle = a.source.bundle
    return max((bundle.distance(a.apply(u), b.apply(u)) for u in elements), default=0.0)


# ───────────────────────────────────────────────
# Transport families
# ───────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class TransportFamily:
    bundle: BundleModel
    at_fn: Callable[[PathSpec, float, float], FiberMap] = field(repr=False)
    backend: Backend
    tolerance: float = config.ALGEBRAIC_TOLERANCE
    name: str = ""

    def at(self, gamma: PathSpec, s: float, t: float) -> FiberMap:
        for param in (s, t):
            if not gamma.domain.contains(param):
                raise DomainError(f"parameter {param} outside domain {gamma.domain} of path {gamma.name!r}")
        return self.at_fn(gamma, float(s), float(t))

    def fibre(self, gamma: PathSpec, s: float) -> FiberDescriptor:
        return self.bundle.fiber_at(gamma.eval(s))

    def __str__(self):
        return self.name or self.backend


def apply_transport(T: TransportFamily, gamma: PathSpec, s: float, t: float, u: FiberElement) -> FiberElement:
    return T.at(gamma, s, t).apply(u)


def identity_transport(bundle: BundleModel) -> TransportFamily:
    """Payloads carried unchanged between fibres of a trivial bundle."""

    def at(gamma, s, t):
        return identity_map(bundle.fiber_at(gamma.eval(s)), bundle.fiber_at(gamma.eval(t)))

    return TransportFamily(bundle, at, "identity", config.ALGEBRAIC_TOLERANCE, "identity")


def adversarial_transport(T: TransportFamily, defect: float = 0.1) -> TransportFamily:
    """Wraps T with a distortion of size defect*(t-s)^2 that breaks the composition law."""
    bundle = T.bundle
    kind = bundle.fiber_kind

    def at(gamma, s, t):
        m = T.at(gamma, s, t)
        k = defect * (t - s) ** 2
        if kind in ("vector", "leaf"):
            fwd, back = (lambda p: (1.0 + k) * m.forward(p)), (lambda p: m.backward(p / (1.0 + k)))
        elif kind == "group":
            group = bundle.fiber.group
            twist = group.exp(k * group.lie_basis[0])
            untwist = group.invert(twist)
            fwd = lambda p: group.multiply(twist, m.forward(p))  # noqa: E731
            back = lambda p: m.backward(group.multiply(untwist, p))  # noqa: E731
        else:
            size = bundle.fiber.size
            shift = 0 if t == s else (1 if t > s else -1)
            fwd = lambda i: (m.forward(i) + shift) % size  # noqa: E731
            back = lambda i: m.backward((i - shift) % size)  # noqa: E731
        return FiberMap(m.source, m.target, fwd, back, f"adv({m.name})")

    return TransportFamily(bundle, at, "adversarial", T.tolerance, f"adversarial({T})")


# ───────────────────────────────────────────────
# Law checks
# ───────────────────────────────────────────────

def _tolerance(T: TransportFamily, tol: Optional[float]) -> float:
    return T.tolerance if tol is None else tol


def _check_grid(gamma: PathSpec, grid: Sequence[float], within: Interval | None = None) -> list[float]:
    within = within or gamma.domain
    grid = [float(t) for t in grid]
    if not grid:
        raise DomainError("law checks need a nonempty parameter grid")
    bad = [t for t in grid if not within.contains(t)]
    if bad:
        raise DomainError(f"grid points {bad[:3]} lie outside {within}")
    return grid


class _ElementCache:
    """Seeded fibre samples per grid parameter, so every check of a run sees the same elements."""

    def __init__(self, T: TransportFamily, gamma: PathSpec, seed: int):
        self.T = T
        self.gamma = gamma
        self.seed = seed
        self._cache: dict[float, list[FiberElement]] = {}

    def at(self, s: float) -> list[FiberElement]:
        if s not in self._cache:
            rng = np.random.default_rng([self.seed, abs(hash(round(s, 12))) % (2 ** 32)])
            self._cache[s] = self.T.fibre(self.gamma, s).samples(rng, config.FIBER_SAMPLES)
        return self._cache[s]


def _map_table(T: TransportFamily, gamma: PathSpec, grid: Sequence[float]) -> dict[tuple[float, float], FiberMap]:
    return {(s, t): T.at(gamma, s, t) for s in grid for t in grid}


def check_identity(T: TransportFamily, gamma: PathSpec, grid: Sequence[float],
                   seed: int = config.DEFAULT_SEED, tol: Optional[float] = None) -> LawReport:
    grid = _check_grid(gamma, grid)
    elements = _ElementCache(T, gamma, seed)
    acc = LawAccumulator("identity", _tolerance(T, tol))
    for s in grid:
        m = T.at(gamma, s, s)
        for k, u in enumerate(elements.at(s)):
            acc.add(T.bundle.distance(m.apply(u), u), path=gamma.name, s=s, element=k)
    return acc.report()


def check_groupoid(T: TransportFamily, gamma: PathSpec, grid: Sequence[float],
                   seed: int = config.DEFAULT_SEED, tol: Optional[float] = None) -> LawReport:
    """Composition over all grid triples, plus the identity law at each grid point."""
    grid = _check_grid(gamma, grid)
    elements = _ElementCache(T, gamma, seed)
    maps = _map_table(T, gamma, grid)
    bundle = T.bundle
    acc = LawAccumulator("groupoid-composition", _tolerance(T, tol))
    for r in grid:
        for k, u in enumerate(elements.at(r)):
            images = {s: maps[(r, s)].apply(u) for s in grid}
            for s in grid:
                for t in grid:
                    composed = maps[(s, t)].apply(images[s])
                    acc.add(bundle.distance(composed, images[t]), path=gamma.name, r=r, s=s, t=t, element=k)
    for s in grid:
        for k, u in enumerate(elements.at(s)):
            acc.add(bundle.distance(maps[(s, s)].apply(u), u), path=gamma.name, r=s, s=s, t=s, element=k)
    logger.debug(f"groupoid check on {gamma.name!r}: {len(grid)}-point grid, backend {T.backend}")
    return acc.report()


def check_inverse(T: TransportFamily, gamma: PathSpec, grid: Sequence[float],
                  seed: int = config.DEFAULT_SEED, tol: Optional[float] = None) -> LawReport:
    """I_{t->s} o I_{s->t} against the identity, and I_{t->s} against the map's own inverse."""
    grid = _check_grid(gamma, grid)
    elements = _ElementCache(T, gamma, seed)
    maps = _map_table(T, gamma, grid)
    bundle = T.bundle
    acc = LawAccumulator("inverse", _tolerance(T, tol))
    for s in grid:
        for t in grid:
            forth, back = maps[(s, t)], maps[(t, s)]
            for k, u in enumerate(elements.at(s)):
                v = forth.apply(u)
                residual = max(bundle.distance(back.apply(v), u), bundle.distance(forth.inverse.apply(v), back.apply(v)))
                acc.add(residual, path=gamma.name, s=s, t=t, element=k)
    return acc.report()


def check_restriction(T: TransportFamily, gamma: PathSpec, sub: Interval, grid: Sequence[float],
                      seed: int = config.DEFAULT_SEED, tol: Optional[float] = None) -> LawReport:
    restricted = restrict(gamma, sub)
    grid = _check_grid(gamma, grid, within=sub)
    elements = _ElementCache(T, gamma, seed)
    acc = LawAccumulator("restriction", _tolerance(T, tol))
    for s in grid:
        for t in grid:
            full, part = T.at(gamma, s, t), T.at(restricted, s, t)
            for k, u in enumerate(elements.at(s)):
                acc.add(T.bundle.distance(part.apply(u), full.apply(u)),
                        path=gamma.name, sub=str(sub), s=s, t=t, element=k)
    return acc.report()


def check_reparam(T: TransportFamily, gamma: PathSpec, chi: Reparam, grid: Sequence[float],
                  seed: int = config.DEFAULT_SEED, tol: Optional[float] = None) -> LawReport:
    moved = reparametrize(gamma, chi)
    grid = _check_grid(moved, grid, within=chi.source)
    elements = _ElementCache(T, moved, seed)
    acc = LawAccumulator("reparametrization", _tolerance(T, tol))
    for s in grid:
        for t in grid:
            lhs = T.at(moved, s, t)
            rhs = T.at(gamma, chi(s), chi(t))
            for k, u in enumerate(elements.at(s)):
                acc.add(T.bundle.distance(lhs.apply(u), rhs.apply(u)),
                        path=gamma.name, reparam=chi.name, s=s, t=t, element=k)
    return acc.report()


def compare_transports(A: TransportFamily, B: TransportFamily, gamma: PathSpec, grid: Sequence[float],
                       law: str = "round-trip", seed: int = config.DEFAULT_SEED,
                       tol: Optional[float] = None) -> LawReport:
    """A^gamma_{s->t}(u) against B^gamma_{s->t}(u) over grid pairs and sampled u."""
    grid = _check_grid(gamma, grid)
    elements = _ElementCache(A, gamma, seed)
    acc = LawAccumulator(law, _tolerance(A, tol) if tol is None else tol)
    for s in grid:
        for t in grid:
            a, b = A.at(gamma, s, t), B.at(gamma, s, t)
            for k, u in enumerate(elements.at(s)):
                acc.add(A.bundle.distance(a.apply(u), b.apply(u)), path=gamma.name, s=s, t=t, element=k)
    return acc.report()


# ───────────────────────────────────────────────
# Sampling plans and the full suite
# ───────────────────────────────────────────────

def default_reparams() -> tuple[Reparam, ...]:
    """Orientation-preserving reparametrizations of [0, 1]."""
    return (
        power_reparam(2.0),
        power_reparam(2.0, reverse=True),
        piecewise_linear_reparam([0.0, 0.3, 1.0], [0.0, 0.6, 1.0]),
    )


def conjugate_reparam(chi: Reparam, domain: Interval) -> Reparam:
    """Move a reparametrization of [0, 1] onto `domain` by affine conjugation."""
    unit = Interval.unit()
    if domain.matches(unit):
        return chi
    to_domain = affine_reparam(unit, domain)
    to_unit = affine_reparam(domain, unit)
    return compose_reparams(to_domain, compose_reparams(chi, to_unit))


@dataclass(frozen=True)
class SamplingPlan:
    paths: tuple[PathSpec, ...]
    grid_size: int = 11
    # subintervals as fractions of each path's domain
    subintervals: tuple[tuple[float, float], ...] = ((0.25, 0.75), (0.0, 0.5))
    reparams: tuple[Reparam, ...] = field(default_factory=default_reparams)
    # source intervals of extra affine reparametrizations that change the parameter domain
    domain_changes: tuple[Interval, ...] = (Interval(0.0, 2.0),)
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        if not self.paths:
            raise DomainError("sampling plan needs at least one path")
        if self.grid_size < 1:
            raise DomainError(f"grid size must be positive, got {self.grid_size}")

    def grid(self, interval: Interval) -> list[float]:
        return [float(t) for t in uniform_grid(interval, self.grid_size)]

    def subinterval(self, gamma: PathSpec, frac: tuple[float, float]) -> Interval:
        lo, hi = gamma.domain.lo, gamma.domain.hi
        return Interval(lo + frac[0] * (hi - lo), lo + frac[1] * (hi - lo))

    def reparams_for(self, gamma: PathSpec) -> list[Reparam]:
        if gamma.domain.is_point:
            return []
        moved = [conjugate_reparam(chi, gamma.domain) for chi in self.reparams]
        moved += [affine_reparam(source, gamma.domain) for source in self.domain_changes
                  if not source.matches(gamma.domain)]
        return moved


def transport_suite(T: TransportFamily, plan: SamplingPlan, tol: Optional[float] = None) -> SuiteReport:
    """Groupoid, identity and inverse laws on every path of the plan."""
    reports: list[LawReport] = []
    for gamma in plan.paths:
        grid = plan.grid(gamma.domain)
        reports.append(check_groupoid(T, gamma, grid, plan.seed, tol))
        reports.append(check_identity(T, gamma, grid, plan.seed, tol))
        reports.append(check_inverse(T, gamma, grid, plan.seed, tol))
    return SuiteReport(f"transport-along-paths:{T}", tuple(reports))


def is_parallel_transport_along_paths(T: TransportFamily, plan: SamplingPlan,
                                      tol: Optional[float] = None) -> SuiteReport:
    suite = transport_suite(T, plan, tol)
    extra: list[LawReport] = []
    for gamma in plan.paths:
        for frac in plan.subintervals:
            sub = plan.subinterval(gamma, frac)
            extra.append(check_restriction(T, gamma, sub, plan.grid(sub), plan.seed, tol))
        for chi in plan.reparams_for(gamma):
            extra.append(check_reparam(T, gamma, chi, plan.grid(chi.source), plan.seed, tol))
    report = SuiteReport(f"parallel-along-paths:{T}", suite.reports + tuple(extra))
    if report.passed:
        logger.info(f"{T}: parallel-along-paths suite passed ({len(report.reports)} checks)")
    else:
        logger.warning(f"{T}: parallel-along-paths suite failed on {report.failed_laws()}")
    return report
