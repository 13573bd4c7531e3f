"""
parallel_bridge.py
---------------------------
Axiomatic parallel transports: one fibre map Psi^gamma per path, from the
fibre over gamma(lo) to the fibre over gamma(hi), subject to

    reparam-invariance   Psi^{gamma o chi} = Psi^gamma            (chi orientation preserving)
    canonical-inverse    Psi^{gamma^-1} = (Psi^gamma)^-1
    concatenation        Psi^{gamma1 . gamma2} = Psi^gamma2 o Psi^gamma1
    point-path           Psi^{point} = id

and the two-way bridge to parallel transports along paths:

    to_parallel(T):   Psi^gamma      = T^gamma_{lo->hi}
    to_transport(Psi): P^beta_{s->t} = Psi^{beta|[s,t]}          (s <= t)
                                     = (Psi^{beta|[t,s]})^-1     (s >= t)
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

import config
from bundle_models import BundleModel, FiberElement
from connection_engine import (
    Probe, check_c1_smoothness, check_initial_uniqueness, check_linearization, lift_via_transport,
)
from law_reports import AxiomReport, LawAccumulator, LawReport, SuiteReport, skipped_report
from path_algebra import (
    Interval, PathSpec, canonical_inverse, canonical_product, point_path, reparametrize, restrict,
    to_unit_interval,
)
from transport_core import (
    FiberMap, SamplingPlan, TransportFamily, compare_transports, is_parallel_transport_along_paths,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ParallelTransport:
    bundle: BundleModel
    at_fn: Callable[[PathSpec], FiberMap] = field(repr=False)
    name: str = "parallel"
    tolerance: float = config.ALGEBRAIC_TOLERANCE
    # suite the source transport was checked against, when it was
    precondition: Optional[SuiteReport] = None

    def at(self, gamma: PathSpec) -> FiberMap:
        return self.at_fn(gamma)

    def __str__(self):
        return self.name


def to_parallel(T: TransportFamily, plan: SamplingPlan | None = None) -> ParallelTransport:
    """Psi^gamma = T^gamma_{lo->hi}. With a plan, T's parallel-along-paths suite is run and attached."""
    report = None
    if plan is not None:
        report = is_parallel_transport_along_paths(T, plan)
        if not report.passed:
            logger.warning(f"{T} is not a parallel transport along paths "
                           f"(failed: {report.failed_laws()}); its axioms may fail too")

    def at(gamma):
        return T.at(gamma, gamma.domain.lo, gamma.domain.hi)

    return ParallelTransport(T.bundle, at, f"parallel({T})", T.tolerance, report)


def to_transport(psi: ParallelTransport) -> TransportFamily:
    restrictions: dict = {}
    lock = threading.Lock()

    def piece(beta, a, b):
        # one restricted path object per (beta, a, b) keeps downstream caches warm
        key = (beta, round(a, 12), round(b, 12))
        with lock:
            if key not in restrictions:
                restrictions[key] = restrict(beta, Interval(a, b))
            return restrictions[key]

    def at(beta, s, t):
        if s <= t:
            return psi.at(piece(beta, s, t))
        return psi.at(piece(beta, t, s)).inverse

    return TransportFamily(psi.bundle, at, "parallel", psi.tolerance, f"transport({psi})")


def _elements(psi: ParallelTransport, x, seed: int) -> list[FiberElement]:
    return psi.bundle.fiber_at(x).samples(np.random.default_rng(seed), config.FIBER_SAMPLES)


def _split(gamma: PathSpec) -> tuple[PathSpec, PathSpec]:
    lo, hi = gamma.domain.lo, gamma.domain.hi
    mid = (lo + hi) / 2
    return to_unit_interval(restrict(gamma, Interval(lo, mid))), to_unit_interval(restrict(gamma, Interval(mid, hi)))


def check_axioms(psi: ParallelTransport, plan: SamplingPlan,
                 pairs: Sequence[tuple[PathSpec, PathSpec]] = (), tol: float | None = None) -> AxiomReport:
    """All four axioms over the plan's paths; paths are moved onto [0, 1] before inverting or composing."""
    tol = psi.tolerance if tol is None else tol
    bundle = psi.bundle
    reparam = LawAccumulator("reparam-invariance", tol)
    inverse = LawAccumulator("canonical-inverse", tol)
    concat = LawAccumulator("concatenation", tol)
    point = LawAccumulator("point-path", tol)

    composable = list(pairs)
    for gamma in plan.paths:
        if gamma.domain.is_point:
            continue
        start = _elements(psi, gamma.start, plan.seed)
        base_map = psi.at(gamma)
        for chi in plan.reparams_for(gamma):
            moved = psi.at(reparametrize(gamma, chi))
            for k, u in enumerate(start):
                reparam.add(bundle.distance(moved.apply(u), base_map.apply(u)),
                            path=gamma.name, reparam=chi.name, element=k)

        unit = to_unit_interval(gamma)
        forth, back = psi.at(unit), psi.at(canonical_inverse(unit))
        for k, u in enumerate(start):
            inverse.add(bundle.distance(back.apply(forth.apply(u)), u), path=gamma.name, element=k)

        composable.append(_split(gamma))
        for r in plan.grid(gamma.domain):
            x = gamma.eval(r)
            ident = psi.at(point_path(r, x))
            for k, u in enumerate(_elements(psi, x, plan.seed)):
                point.add(bundle.distance(ident.apply(u), u), path=gamma.name, r=r, element=k)

    for first, second in composable:
        first, second = to_unit_interval(first), to_unit_interval(second)
        joined = psi.at(canonical_product(first, second))
        m1, m2 = psi.at(first), psi.at(second)
        for k, u in enumerate(_elements(psi, first.start, plan.seed)):
            concat.add(bundle.distance(joined.apply(u), m2.apply(m1.apply(u))),
                       paths=f"{first.name}.{second.name}", element=k)

    report = AxiomReport(f"axioms:{psi}", (reparam.report(), inverse.report(), concat.report(), point.report()))
    if not report.passed:
        logger.warning(f"{psi}: axioms failed: {report.failed_laws()}")
    return report


def check_case_split(P: TransportFamily, gamma: PathSpec, grid: Sequence[float],
                     seed: int = config.DEFAULT_SEED, tol: float | None = None) -> LawReport:
    """P_{s->t} against (P_{t->s})^-1, for both orders of every grid pair."""
    acc = LawAccumulator("case-split", P.tolerance if tol is None else tol)
    for s in grid:
        elements = P.bundle.fiber_at(gamma.eval(s)).samples(np.random.default_rng(seed), config.FIBER_SAMPLES)
        for t in grid:
            direct, flipped = P.at(gamma, s, t), P.at(gamma, t, s).inverse
            for k, u in enumerate(elements):
                acc.add(P.bundle.distance(direct.apply(u), flipped.apply(u)), path=gamma.name, s=s, t=t, element=k)
    return acc.report()


def round_trip_psi(psi: ParallelTransport, plan: SamplingPlan, tol: float | None = None) -> LawReport:
    """to_parallel(to_transport(Psi)) against Psi on every plan path."""
    again = to_parallel(to_transport(psi))
    acc = LawAccumulator("round-trip", psi.tolerance if tol is None else tol)
    for gamma in plan.paths:
        a, b = psi.at(gamma), again.at(gamma)
        for k, u in enumerate(_elements(psi, gamma.start, plan.seed)):
            acc.add(psi.bundle.distance(a.apply(u), b.apply(u)), path=gamma.name, element=k)
    return acc.report()


def round_trip_T(T: TransportFamily, plan: SamplingPlan, tol: float | None = None) -> LawReport:
    """to_transport(to_parallel(T)) against T over every grid pair of every plan path."""
    again = to_transport(to_parallel(T))
    reports = [compare_transports(T, again, gamma, plan.grid(gamma.domain), "round-trip", plan.seed, tol)
               for gamma in plan.paths]
    return SuiteReport("round-trip", tuple(reports)).by_law("round-trip")


def continuity_smoke(psi: ParallelTransport, gamma: PathSpec, perturbation: float = 1e-6,
                     bound: float = 1e-3, seed: int = config.DEFAULT_SEED) -> LawReport:
    """Perturbing the input element by `perturbation` moves the output by less than `bound`."""
    if psi.bundle.fiber_kind == "finite":
        return skipped_report("continuity", bound, "finite fibres are discrete")
    rng = np.random.default_rng(seed)
    fibre = psi.bundle.fiber_at(gamma.start)
    m = psi.at(gamma)
    fiber = psi.bundle.fiber
    acc = LawAccumulator("continuity", bound)
    for k, u in enumerate(fibre.samples(rng, config.FIBER_SAMPLES)):
        coords = fiber.coords(u.payload)
        # move along the fibre so group payloads stay on the group to first order
        basis = fiber.vertical(u.payload)
        nudge = basis @ rng.normal(size=basis.shape[1])
        nudge *= perturbation / np.linalg.norm(nudge)
        v = fibre.element(fiber.from_coords(coords + nudge))
        acc.add(psi.bundle.distance(m.apply(u), m.apply(v)), path=gamma.name, element=k)
    return acc.report()


def parallel_lift_conditions(psi: ParallelTransport, p: FiberElement, probes: Sequence[Probe],
                             coeffs: tuple[float, float] = (1.0, 1.0), lift_path: PathSpec | None = None,
                             lift_samples: int = 1001) -> SuiteReport:
    """Smoothness, initial-uniqueness and linearization for an axiomatic transport, via to_transport.

    `probes[0]` and `probes[1]` must share position and velocity (initial
    uniqueness); `probes[0]` and `probes[2]` are combined for linearization.
    """
    T = to_transport(psi)
    reports = [
        check_initial_uniqueness(T, p, probes[0], probes[1]),
        check_linearization(T, p, probes[0], probes[2], *coeffs),
    ]
    gamma = lift_path or probes[0].path
    anchor = probes[0].anchor if lift_path is None else gamma.domain.lo
    reports.append(check_c1_smoothness(lift_via_transport(T, gamma, anchor, p, lift_samples)))
    return SuiteReport(f"lift-conditions:{psi}", tuple(reports))
