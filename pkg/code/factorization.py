"""
factorization.py
---------------------------
Every transport along a path factors through a model set Q:

    I^gamma_{s->t} = F_t^-1 o F_s,     F_s : pi^-1(gamma(s)) -> Q

and two factorizations of the same transport differ by one bijection D with
F_s = D o F'_s for every s. `factorize` builds the constructive choice
Q = fibre over gamma(s0), F_s = I_{s->s0}; `reconstruct` goes back.

Finite fibres are handled exhaustively: F_s are permutation tables and every
check enumerates all elements.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

import config
from bundle_models import BundleModel, FiberDescriptor
from law_reports import LawAccumulator, LawReport, SuiteReport
from path_algebra import DomainError, PathSpec
from transport_core import (
    FiberMap, TransportFamily, check_groupoid, check_identity, check_inverse, compare_transports,
    permutation_map,
)

logger = logging.getLogger(__name__)


def _key(s: float) -> float:
    return round(float(s), 12)


@dataclass(frozen=True, eq=False)
class Factorization:
    gamma: PathSpec
    anchor: float
    model: FiberDescriptor  # Q, a tagged copy of the fibre over gamma(anchor)
    F_fn: Callable[[float], FiberMap] = field(repr=False)
    tag: str = "Q"
    # parameters F is defined at (table families); None means all of gamma.domain
    params: Optional[tuple[float, ...]] = None
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def bundle(self) -> BundleModel:
        return self.model.bundle

    def F(self, s: float) -> FiberMap:
        key = _key(s)
        if self.params is not None and key not in self.params:
            raise DomainError(f"factorization {self.tag} is only tabulated at {list(self.params)}")
        if not self.gamma.domain.contains(s):
            raise DomainError(f"parameter {s} outside {self.gamma.domain}")
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        m = self.F_fn(s)
        with self._lock:
            return self._cache.setdefault(key, m)

    def default_param(self) -> float:
        if self.params is None or _key(self.anchor) in self.params:
            return self.anchor
        return self.params[0]


@dataclass(frozen=True, eq=False)
class GaugeMap:
    D: FiberMap
    s_star: float
    independence: LawReport

    @property
    def table(self) -> Optional[tuple[int, ...]]:
        return self.D.table


def factorize(T: TransportFamily, gamma: PathSpec, s0: float) -> Factorization:
    """Q = fibre over gamma(s0), F_s = T_{s->s0}. No law validation here; see reconstruct_residual."""
    if not gamma.domain.contains(s0):
        raise DomainError(f"anchor {s0} outside {gamma.domain}")
    model = T.bundle.fiber_at(gamma.eval(s0))
    logger.debug(f"Factorizing {T} along {gamma.name!r} at anchor {s0}")
    return Factorization(gamma, float(s0), model, lambda s: T.at(gamma, s, s0), f"Q@{s0:g}")


def reconstruct(fac: Factorization) -> TransportFamily:
    """I_{s->t} = F_t^-1 o F_s, defined on fac.gamma only."""

    def at(gamma, s, t):
        if gamma is not fac.gamma:
            raise DomainError(f"factorized transport is defined on {fac.gamma.name!r} only, got {gamma.name!r}")
        return fac.F(s).then(fac.F(t).inverse)

    tol = config.ALGEBRAIC_TOLERANCE
    return TransportFamily(fac.bundle, at, "factorized", tol, f"factorized({fac.tag})")


def factorized_transport(T: TransportFamily, anchor_frac: float = 0.0) -> TransportFamily:
    """T rebuilt path by path: each path is factorized at lo + anchor_frac*|J| on first use."""
    if not 0.0 <= anchor_frac <= 1.0:
        raise DomainError(f"anchor fraction must lie in [0, 1], got {anchor_frac}")
    facs: dict[PathSpec, Factorization] = {}
    lock = threading.Lock()

    def at(gamma, s, t):
        with lock:
            fac = facs.get(gamma)
            if fac is None:
                s0 = gamma.domain.lo + anchor_frac * gamma.domain.length
                fac = facs[gamma] = factorize(T, gamma, s0)
        return fac.F(s).then(fac.F(t).inverse)

    return TransportFamily(T.bundle, at, "factorized", T.tolerance, f"factorized({T})")


def regauge(fac: Factorization, D: FiberMap, tag: str | None = None) -> Factorization:
    """F'_s = D o F_s for a bijection D out of Q."""
    if not D.source.same_fibre(fac.model):
        raise DomainError("gauge map must start on the factorization's model fibre")
    return Factorization(fac.gamma, fac.anchor, D.target, lambda s: fac.F(s).then(D),
                         tag or f"{fac.tag}'", fac.params)


def reconstruct_residual(fac: Factorization, T: TransportFamily, grid: Sequence[float],
                         tol: float | None = None) -> LawReport:
    return compare_transports(reconstruct(fac), T, fac.gamma, grid, "round-trip",
                              tol=T.tolerance if tol is None else tol)


# ───────────────────────────────────────────────
# Gauge freedom
# ───────────────────────────────────────────────

def _model_elements(fibre: FiberDescriptor, seed: int):
    return fibre.samples(np.random.default_rng(seed), config.FIBER_SAMPLES)


def gauge_map(fac1: Factorization, fac2: Factorization, grid: Sequence[float] | None = None,
              s_star: float | None = None, tol: float = config.ALGEBRAIC_TOLERANCE,
              seed: int = config.DEFAULT_SEED) -> GaugeMap:
    """D = F1(s*) o F2(s*)^-1, with its independence of s* measured over the grid."""
    s_star = fac1.default_param() if s_star is None else s_star
    D = fac2.F(s_star).inverse.then(fac1.F(s_star))
    grid = list(grid) if grid is not None else [s_star]
    acc = LawAccumulator("gauge-independence", tol)
    elements = _model_elements(fac2.model, seed)
    bundle = fac1.bundle
    for s in grid:
        Ds = fac2.F(s).inverse.then(fac1.F(s))
        for k, q in enumerate(elements):
            acc.add(bundle.distance(Ds.apply(q), D.apply(q)), s=s, s_star=s_star, element=k)
    return GaugeMap(D, float(s_star), acc.report())


def verify_gauge(G: GaugeMap, fac1: Factorization, fac2: Factorization, grid: Sequence[float],
                 tol: float = config.ALGEBRAIC_TOLERANCE, seed: int = config.DEFAULT_SEED) -> LawReport:
    """F1(s)(u) against D(F2(s)(u)) over grid parameters and fibre samples."""
    acc = LawAccumulator("gauge", tol)
    bundle = fac1.bundle
    for s in grid:
        fibre = bundle.fiber_at(fac1.gamma.eval(s))
        rng = np.random.default_rng([seed, abs(hash(_key(s))) % (2 ** 32)])
        F1, F2 = fac1.F(s), fac2.F(s)
        for k, u in enumerate(fibre.samples(rng, config.FIBER_SAMPLES)):
            acc.add(bundle.distance(F1.apply(u), G.D.apply(F2.apply(u))), s=s, element=k)
    return acc.report()


def anchor_sweep(T: TransportFamily, gamma: PathSpec, anchors: Sequence[float], grid: Sequence[float],
                 tol: float | None = None) -> SuiteReport:
    """Factorize at every anchor and relate each to the first by a verified gauge map."""
    tol = T.tolerance if tol is None else tol
    facs = [factorize(T, gamma, a) for a in anchors]
    reports = []
    for fac in facs[1:]:
        G = gauge_map(facs[0], fac, grid, tol=tol)
        reports.append(G.independence)
        reports.append(verify_gauge(G, facs[0], fac, grid, tol=tol))
    logger.info(f"Anchor sweep over {len(anchors)} anchors on {gamma.name!r}")
    return SuiteReport(f"anchor-sweep:{T}", tuple(reports))


# ───────────────────────────────────────────────
# Finite mode
# ───────────────────────────────────────────────

def factorization_from_tables(bundle: BundleModel, gamma: PathSpec, tables: dict[float, Sequence[int]],
                              anchor: float | None = None, tag: str = "Q") -> Factorization:
    """Permutation tables F_s: fibre(s) -> Q, one per tabulated parameter."""
    if bundle.fiber_kind != "finite":
        raise DomainError("table factorizations need a finite fibre")
    keyed = {_key(s): tuple(int(i) for i in table) for s, table in tables.items()}
    anchor = min(keyed) if anchor is None else anchor
    model = bundle.fiber_at(gamma.eval(anchor))

    def F(s):
        return permutation_map(bundle.fiber_at(gamma.eval(s)), model, keyed[_key(s)], f"F{s:g}")

    return Factorization(gamma, float(anchor), model, F, tag, tuple(sorted(keyed)))


def random_bijection_family(bundle: BundleModel, gamma: PathSpec, grid: Sequence[float],
                            rng: np.random.Generator) -> Factorization:
    size = bundle.fiber.size
    tables = {float(s): rng.permutation(size).tolist() for s in grid}
    return factorization_from_tables(bundle, gamma, tables, tag="random")


def permutation_tables(fac: Factorization, grid: Sequence[float]) -> pd.DataFrame:
    """Long-form table (s, element, image) of F_s for a finite-fibre factorization."""
    if fac.bundle.fiber_kind != "finite":
        raise DomainError("permutation tables exist for finite fibres only")
    rows = []
    for s in grid:
        m = fac.F(s)
        table = m.table if m.table is not None else tuple(m.forward(i) for i in range(fac.bundle.fiber.size))
        rows.extend({"s": float(s), "element": i, "image": int(j)} for i, j in enumerate(table))
    return pd.DataFrame(rows, columns=["s", "element", "image"])


def finite_round_trip(bundle: BundleModel, gamma: PathSpec, grid: Sequence[float],
                      rng: np.random.Generator) -> SuiteReport:
    """Random table family -> reconstruct -> laws on every grid pair and element -> factorize again.

    The refactorized family must rebuild the same transport, and it differs
    from the original tables by one gauge map.
    """
    grid = [float(s) for s in grid]
    fac = random_bijection_family(bundle, gamma, grid, rng)
    T = reconstruct(fac)
    tol = 0.5  # finite distances are 0 or 1
    again = factorize(T, gamma, fac.anchor)
    G = gauge_map(fac, again, grid, tol=tol)
    reports = (
        check_groupoid(T, gamma, grid, tol=tol),
        check_identity(T, gamma, grid, tol=tol),
        check_inverse(T, gamma, grid, tol=tol),
        compare_transports(reconstruct(again), T, gamma, grid, "round-trip", tol=tol),
        G.independence,
        verify_gauge(G, fac, again, grid, tol=tol),
    )
    return SuiteReport(f"finite:{bundle.fiber.size}x{len(grid)}", reports)


def gauge_recovery(bundle: BundleModel, gamma: PathSpec, grid: Sequence[float],
                   rng: np.random.Generator) -> SuiteReport:
    """Regauge a random table family by a random permutation D and recover D with gauge_map."""
    grid = [float(s) for s in grid]
    fac = random_bijection_family(bundle, gamma, grid, rng)
    D = permutation_map(fac.model, fac.model, rng.permutation(bundle.fiber.size).tolist(), "D")
    moved = regauge(fac, D)
    G = gauge_map(moved, fac, grid, tol=0.5)
    acc = LawAccumulator("gauge", 0.5)
    acc.add(0.0 if G.table == D.table else 1.0, expected=list(D.table), recovered=list(G.table or ()))
    reports = (acc.report(), G.independence, verify_gauge(G, moved, fac, grid, tol=0.5))
    return SuiteReport(f"gauge:{bundle.fiber.size}x{len(grid)}", reports)
