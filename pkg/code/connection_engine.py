"""
connection_engine.py
---------------------------
Connections and the transports they generate, and the way back: recovering
the horizontal distribution from a transport.

Forward direction. A connection is given through its lift equation on fibre
coordinates,

    christoffel   v'^i = -Gamma^i_{jk}(gamma) gamma'^j v^k      (vector fibres)
    principal     g'   = -A(gamma)(gamma') g                      (group fibres)

both of the form y' = K(gamma(t), gamma'(t)) y. The fundamental matrix of that
linear ODE (`propagator`) is integrated with fixed-step RK4 and is the
transport map I^gamma_{s->t}.

Reverse direction. For any transport T and point p, lifting short probe
paths through pi(p) and differentiating the lifts at the anchor gives tangent
vectors in the total space; their span is the horizontal space T defines at
p. `check_complementarity` checks it is a direct complement of the vertical
space, and the `check_*` helpers test the smoothness conditions a transport
needs for that span to be a connection.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import orth, subspace_angles, svdvals

import config
from bundle_models import (
    BundleModel, FiberElement, ModelError, SurfaceModel, principal_bundle, sphere_tangent_bundle,
    vector_bundle,
)
from law_reports import LawAccumulator, LawReport, skipped_report
from lie_groups import GroupModel, group_model
from path_algebra import DomainError, Interval, PathSpec, analytic_path, uniform_grid
from rk4 import rk4
from transport_core import FiberMap, TransportFamily, linear_map

logger = logging.getLogger(__name__)

ConnectionKind = Literal["christoffel", "principal"]

# half-width of the parameter window of default probe lines
PROBE_HALF_WIDTH = 0.1


class DegenerateEstimateError(ValueError):
    """Probe tangents span less than a base_dim-dimensional space."""


class _PropagatorCache:
    """Thread-safe memo of propagator matrices keyed by (path identity, s, t, step)."""

    def __init__(self, limit: int = 50_000):
        self.limit = limit
        self._data: dict = {}
        self._lock = threading.Lock()

    def get(self, key, compute: Callable[[], np.ndarray]) -> np.ndarray:
        with self._lock:
            if key in self._data:
                return self._data[key]
        value = compute()
        with self._lock:
            if len(self._data) >= self.limit:
                self._data.clear()
            return self._data.setdefault(key, value)

    def clear(self):
        with self._lock:
            self._data.clear()


@dataclass(frozen=True, eq=False)
class ConnectionModel:
    kind: ConnectionKind
    bundle: BundleModel
    name: str
    christoffel: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    form: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(default=None, repr=False)
    group: Optional[GroupModel] = None
    recipe: dict = field(default_factory=dict)
    cache: _PropagatorCache = field(default_factory=_PropagatorCache, repr=False)

    def generator(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """K(x, v) with fibre-coordinate velocity = K(x, v) @ payload."""
        if self.kind == "christoffel":
            return -np.einsum("ijk,j->ik", self.christoffel(x), v)
        return -self.form(x, v)

    def project(self, P: np.ndarray) -> np.ndarray:
        return self.group.renormalize(P) if self.kind == "principal" else P

    def linearity_residual(self, rng: np.random.Generator, samples: int = 20) -> float:
        worst = 0.0
        for _ in range(samples):
            x = self.bundle.base.sample(rng)
            v1, v2 = rng.normal(size=(2, self.bundle.base_dim))
            a, b = rng.normal(size=2)
            lhs = self.generator(x, a * v1 + b * v2)
            rhs = a * self.generator(x, v1) + b * self.generator(x, v2)
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        return worst

    def metric(self, x: np.ndarray) -> np.ndarray:
        base = self.bundle.base
        if isinstance(base, SurfaceModel) and self.bundle.fiber.coord_dim == base.dim:
            return base.metric(x)
        return np.eye(self.bundle.fiber.coord_dim)


# ───────────────────────────────────────────────
# Registries
# ───────────────────────────────────────────────

def flat_connection(dim: int = 2, rank: int | None = None) -> ConnectionModel:
    rank = dim if rank is None else rank
    zero = np.zeros((rank, dim, rank))
    return ConnectionModel("christoffel", vector_bundle(dim, rank), f"flat({dim})",
                           christoffel=lambda x: zero, recipe={"christoffel": "flat", "dim": dim, "rank": rank})


def sphere_connection() -> ConnectionModel:
    bundle = sphere_tangent_bundle()
    return ConnectionModel("christoffel", bundle, "levi-civita(S2)",
                           christoffel=bundle.base.christoffel, recipe={"christoffel": "sphere"})


def _uniform_form(group, omega=1.0, axis=0, generator=0):
    X = group.lie_basis[generator]
    return lambda x, v: omega * v[axis] * X


def _area_form(group, scale=0.5, generator=0):
    X = group.lie_basis[generator]
    return lambda x, v: scale * (x[0] * v[1] - x[1] * v[0]) * X


def _constant_form(group, generators):
    mats = [group.hat(g) for g in generators]
    return lambda x, v: sum(vj * m for vj, m in zip(v, mats))


PRINCIPAL_FORMS: dict[str, Callable] = {
    "uniform": _uniform_form,
    "area": _area_form,
    "constant": _constant_form,
}


def principal_connection(group: GroupModel | str, form_id: str, base_dim: int = 2, **params) -> ConnectionModel:
    G = group_model(group) if isinstance(group, str) else group
    if form_id not in PRINCIPAL_FORMS:
        raise ModelError(f"unknown connection form {form_id!r}; known: {sorted(PRINCIPAL_FORMS)}")
    if form_id == "area" and base_dim < 2:
        raise ModelError("the area form needs a base of dimension >= 2")
    form = PRINCIPAL_FORMS[form_id](G, **params)
    recipe = {"principal": {"group": G.id, "form": form_id, "params": params, "base_dim": base_dim}}
    return ConnectionModel("principal", principal_bundle(base_dim, G), f"{form_id}({G.id})",
                           form=form, group=G, recipe=recipe)


def connection_from_config(mapping: dict) -> ConnectionModel:
    """{"christoffel": "flat" | "sphere", ...} or {"principal": {group, form, params, base_dim}}."""
    if "christoffel" in mapping:
        which = mapping["christoffel"]
        if which == "flat":
            c = flat_connection(int(mapping.get("dim", 2)), mapping.get("rank"))
        elif which == "sphere":
            c = sphere_connection()
        else:
            raise ModelError(f"unknown christoffel connection {which!r}; use 'flat' or 'sphere'")
    elif "principal" in mapping:
        spec = mapping["principal"]
        try:
            G = group_model(spec["group"], spec.get("n"))
        except ValueError as e:
            raise ModelError(str(e)) from e
        c = principal_connection(G, spec["form"], int(spec.get("base_dim", 2)), **spec.get("params", {}))
        residual = c.linearity_residual(np.random.default_rng(config.DEFAULT_SEED))
        if residual >= 1e-10:
            raise ModelError(f"connection form {spec['form']!r} is not linear in the tangent (residual {residual:.3g})")
    else:
        raise ModelError("connection descriptor needs a 'christoffel' or 'principal' key")
    return c


# ───────────────────────────────────────────────
# Lifts and transports
# ───────────────────────────────────────────────

def default_step(gamma: PathSpec) -> float:
    return max(gamma.domain.length, 1e-12) / config.ODE_STEPS_PER_DOMAIN


def _fibre_size(c: ConnectionModel) -> int:
    return c.bundle.fiber.group.n if c.kind == "principal" else c.bundle.fiber.coord_dim


def _segment_rhs(c: ConnectionModel, gamma: PathSpec, u: float, w: float):
    lo, hi = min(u, w), max(u, w)
    pad = 1e-12 * max(1.0, hi - lo)

    def fn(t, P):
        # stay on the open segment so piecewise paths use the piece being integrated
        tc = (lo + hi) / 2 if hi - lo <= 2 * pad else min(max(t, lo + pad), hi - pad)
        return c.generator(gamma.eval(tc), gamma.deriv(tc)) @ P

    return fn


def _integrate(c: ConnectionModel, gamma: PathSpec, a: float, b: float, step: float,
               P0: np.ndarray | None = None) -> np.ndarray:
    """Propagate P0 from a to b, one RK4 run per smooth piece of gamma."""
    if not gamma.is_c1:
        raise DomainError(f"horizontal lifts need a C1 path; {gamma.name!r} has no derivative")
    P = np.eye(_fibre_size(c)) if P0 is None else P0
    lo, hi = min(a, b), max(a, b)
    cuts = [lo] + [x for x in gamma.breakpoints if lo < x < hi] + [hi]
    if b < a:
        cuts.reverse()
    for u, w in zip(cuts[:-1], cuts[1:]):
        P = rk4(_segment_rhs(c, gamma, u, w), u, w, P, step, c.project)
    return P


def propagator(c: ConnectionModel, gamma: PathSpec, s: float, t: float, step: float | None = None) -> np.ndarray:
    """Fundamental matrix P with payload(t) = P @ payload(s) along the horizontal lift."""
    step = default_step(gamma) if step is None else step
    if s == t:
        return np.eye(_fibre_size(c))
    key = (gamma, round(s, 12), round(t, 12), step)
    return c.cache.get(key, lambda: _integrate(c, gamma, s, t, step))


def transport_from_connection(c: ConnectionModel, step: float | None = None) -> TransportFamily:
    """Transport by horizontal lift.

    Without a step each path gets |J| / ODE_STEPS_PER_DOMAIN for its own
    domain J; pass an absolute step to integrate restrictions and
    reparametrizations on the same step size.
    """

    def at(gamma, s, t):
        P = propagator(c, gamma, s, t, step)
        return linear_map(c.bundle.fiber_at(gamma.eval(s)), c.bundle.fiber_at(gamma.eval(t)), P,
                          f"lift[{s:g}->{t:g}]")

    return TransportFamily(c.bundle, at, "connection", config.ODE_TOLERANCE, f"connection({c.name})")


def holonomy(c: ConnectionModel, loop: PathSpec, step: float | None = None) -> FiberMap:
    base = c.bundle.base
    if not base.same_point(loop.start, loop.end):
        raise DomainError(f"path {loop.name!r} is not closed: {loop.start.tolist()} -> {loop.end.tolist()}")
    fibre = c.bundle.fiber_at(loop.start)
    P = propagator(c, loop, loop.domain.lo, loop.domain.hi, step)
    return linear_map(fibre, fibre, P, f"hol({loop.name})")


@dataclass(frozen=True, eq=False)
class LiftedPath:
    gamma: PathSpec
    s0: float
    start: FiberElement
    bundle: BundleModel
    params: np.ndarray
    elements: tuple[FiberElement, ...]
    # d/dt of total-space coords at each sample (central differences inside, one-sided at the ends)
    derivatives: np.ndarray

    def total_coords(self) -> np.ndarray:
        return np.array([self.bundle.total_coords(u) for u in self.elements])

    def projection_residual(self) -> float:
        base = self.bundle.base
        return max(float(np.linalg.norm(base.embed(u.base) - base.embed(self.gamma.eval(t))))
                   for t, u in zip(self.params, self.elements))

    def at(self, t: float) -> FiberElement:
        i = int(np.argmin(np.abs(self.params - t)))
        if abs(self.params[i] - t) > 1e-12:
            raise DomainError(f"lift has no sample at {t}")
        return self.elements[i]

    def to_frame(self) -> pd.DataFrame:
        coords = self.total_coords()
        b = self.bundle.base_dim
        cols = [f"x{i}" for i in range(b)] + [f"p{i}" for i in range(coords.shape[1] - b)]
        df = pd.DataFrame(coords, columns=cols)
        df.insert(0, "t", self.params)
        return df


def _lift_grid(gamma: PathSpec, s0: float, samples: int) -> np.ndarray:
    grid = uniform_grid(gamma.domain, samples)
    grid[np.abs(grid - s0) < 1e-12] = s0
    return np.unique(np.append(grid, s0))


def _finish_lift(gamma, s0, p, bundle, ts, elements) -> LiftedPath:
    coords = np.array([bundle.total_coords(u) for u in elements])
    if len(ts) > 1:
        derivatives = np.gradient(coords, ts, axis=0)
    else:
        derivatives = np.zeros_like(coords)
    return LiftedPath(gamma, float(s0), p, bundle, np.asarray(ts, dtype=float), tuple(elements), derivatives)


def horizontal_lift(c: ConnectionModel, gamma: PathSpec, s0: float, p: FiberElement,
                    samples: int = config.PATH_GRID_SAMPLES, step: float | None = None) -> LiftedPath:
    """Integrate the lift ODE from (s0, p) to both ends of gamma.domain."""
    bundle = c.bundle
    bundle.fiber_at(gamma.eval(s0)).require(p)
    step = default_step(gamma) if step is None else step
    ts = _lift_grid(gamma, s0, samples)
    i0 = int(np.searchsorted(ts, s0))
    props: dict[int, np.ndarray] = {i0: np.eye(_fibre_size(c))}
    for i in range(i0 + 1, len(ts)):
        props[i] = _integrate(c, gamma, ts[i - 1], ts[i], step, props[i - 1])
    for i in range(i0 - 1, -1, -1):
        props[i] = _integrate(c, gamma, ts[i + 1], ts[i], step, props[i + 1])
    elements = [p if i == i0 else bundle.element(gamma.eval(t), props[i] @ p.payload) for i, t in enumerate(ts)]
    logger.debug(f"Lifted {gamma.name!r} from s0={s0:g}: {len(ts)} samples, step {step:.3g}")
    return _finish_lift(gamma, s0, p, bundle, ts, elements)


def lift_via_transport(T: TransportFamily, gamma: PathSpec, s0: float, p: FiberElement,
                       samples: int = config.PATH_GRID_SAMPLES) -> LiftedPath:
    """t -> T_{s0->t}(p) sampled on a uniform grid."""
    ts = _lift_grid(gamma, s0, samples)
    elements = [T.at(gamma, s0, t).apply(p) for t in ts]
    return _finish_lift(gamma, s0, p, T.bundle, ts, elements)


# ───────────────────────────────────────────────
# Reconstructing horizontal spaces
# ───────────────────────────────────────────────

@dataclass(frozen=True)
class Probe:
    path: PathSpec
    anchor: float = 0.0

    def velocity(self) -> np.ndarray:
        if self.path.is_c1:
            return self.path.deriv(self.anchor)
        h = config.FD_STEP
        return (self.path.eval(self.anchor + h) - self.path.eval(self.anchor - h)) / (2 * h)


def line_probe(x, direction, half_width: float = PROBE_HALF_WIDTH) -> Probe:
    path = analytic_path("line", Interval(-half_width, half_width), name="probe", start=x, velocity=direction)
    return Probe(path, 0.0)


def default_probes(bundle: BundleModel, x, rng: np.random.Generator) -> list[Probe]:
    """+-e_i coordinate lines through x plus base_dim random unit directions."""
    n = bundle.base_dim
    directions = [sign * e for e in np.eye(n) for sign in (1.0, -1.0)]
    for _ in range(n):
        d = rng.normal(size=n)
        directions.append(d / np.linalg.norm(d))
    return [line_probe(x, d) for d in directions]


def lift_tangent(T: TransportFamily, probe: Probe, p: FiberElement, h: float = config.FD_STEP) -> np.ndarray:
    """Central-difference tangent of t -> T_{anchor->t}(p) at the anchor, in total-space coords."""
    gamma, s0 = probe.path, probe.anchor
    if not T.bundle.base.same_point(gamma.eval(s0), p.base):
        raise DomainError(f"probe {gamma.name!r} does not pass through the base point of p at its anchor")
    plus = T.bundle.total_coords(T.at(gamma, s0, s0 + h).apply(p))
    minus = T.bundle.total_coords(T.at(gamma, s0, s0 - h).apply(p))
    return (plus - minus) / (2 * h)


@dataclass(frozen=True)
class SubspaceEstimate:
    point: FiberElement
    spanning: np.ndarray  # columns, total-space coords
    dim: int
    singular_values: tuple[float, ...] = ()


def horizontal_space_from_transport(T: TransportFamily, p: FiberElement, probes: Sequence[Probe] | None = None,
                                    rng: np.random.Generator | None = None) -> SubspaceEstimate:
    bundle = T.bundle
    rng = rng or np.random.default_rng(config.DEFAULT_SEED)
    probes = list(probes) if probes is not None else default_probes(bundle, p.base, rng)
    tangents = np.column_stack([lift_tangent(T, probe, p) for probe in probes])
    u, svals, _ = np.linalg.svd(tangents, full_matrices=False)
    n = bundle.base_dim
    normalized = svals / svals[0] if svals.size and svals[0] > 0 else svals
    if len(normalized) < n or normalized[n - 1] <= 1e-8:
        raise DegenerateEstimateError(
            f"probe tangents at {np.asarray(p.base).tolist()} have rank < {n} (singular values {svals.tolist()})"
        )
    return SubspaceEstimate(p, u[:, :n], n, tuple(float(s) for s in svals))


def analytic_horizontal_space(c: ConnectionModel, p: FiberElement) -> SubspaceEstimate:
    """Span of (e_i, K(x, e_i) payload): the right-hand side of the lift equation."""
    x = np.asarray(p.base, dtype=float)
    cols = []
    for e in np.eye(c.bundle.base_dim):
        vertical = (c.generator(x, e) @ p.payload).reshape(-1)
        cols.append(np.concatenate([e, vertical]))
    basis = orth(np.column_stack(cols))
    return SubspaceEstimate(p, basis, basis.shape[1])


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return subspace_angles(np.asarray(a), np.asarray(b))


def tangent_basis(bundle: BundleModel, u: FiberElement) -> np.ndarray:
    """Orthonormal columns spanning T_u(E) in total-space chart coords.

    For group fibres the chart holds all n*n matrix entries, so T_u(E) is a
    proper subspace of dimension base_dim + dim G.
    """
    base_axes = np.eye(bundle.total_dim)[:, :bundle.base_dim]
    return orth(np.column_stack([base_axes, bundle.vertical_basis(u)]))


def check_complementarity(est: SubspaceEstimate, bundle: BundleModel, min_margin: float = 0.1) -> LawReport:
    """[vertical | horizontal] must span T_p(E); margin = smallest singular value of the orthonormalized pair.

    Both spaces are expressed in an orthonormal basis of T_p(E) first, so the
    count is against the intrinsic dimension rather than the chart's.
    """
    tangent = tangent_basis(bundle, est.point)
    dim = tangent.shape[1]
    parts = [orth(tangent.T @ m) for m in (bundle.vertical_basis(est.point), est.spanning) if m.shape[1]]
    stacked = np.column_stack(parts) if parts else np.zeros((dim, 0))
    acc = LawAccumulator("complementarity", 1.0 - min_margin)
    if stacked.shape[1] != dim:
        # too few directions cannot span; too many cannot form a direct sum
        margin = 0.0
    else:
        margin = float(svdvals(stacked).min())
    acc.add(1.0 - margin, base=np.asarray(est.point.base).tolist(), columns=int(stacked.shape[1]), tangent_dim=dim)
    return acc.report(margin=margin)


def check_initial_uniqueness(T: TransportFamily, p: FiberElement, probe1: Probe, probe2: Probe,
                             tol: float = 1e-5) -> LawReport:
    """Probes with the same position and velocity at their anchors give the same lift tangent."""
    if np.linalg.norm(probe1.velocity() - probe2.velocity()) > 1e-8:
        raise DomainError("initial-uniqueness probes must share their anchor velocity")
    acc = LawAccumulator("initial-uniqueness", tol)
    residual = np.linalg.norm(lift_tangent(T, probe1, p) - lift_tangent(T, probe2, p))
    acc.add(residual, probes=f"{probe1.path.name}|{probe2.path.name}")
    return acc.report()


def check_linearization(T: TransportFamily, p: FiberElement, probe1: Probe, probe2: Probe,
                        a1: float, a2: float, tol: float = 1e-4) -> LawReport:
    """Lift tangent of the combined line x0 + t(a1 v1 + a2 v2) against a1 tau1 + a2 tau2."""
    w = a1 * probe1.velocity() + a2 * probe2.velocity()
    if np.linalg.norm(w) < 1e-12:
        return skipped_report("linearization", tol, "combined velocity is zero (point path)")
    combined = line_probe(p.base, w)
    tau = a1 * lift_tangent(T, probe1, p) + a2 * lift_tangent(T, probe2, p)
    acc = LawAccumulator("linearization", tol)
    acc.add(np.linalg.norm(lift_tangent(T, combined, p) - tau), a1=a1, a2=a2)
    return acc.report()


def check_c1_smoothness(lift: LiftedPath, tol: float = config.C1_JUMP_TOLERANCE) -> LawReport:
    """Jumps between consecutive difference quotients of the lift samples stay bounded."""
    acc = LawAccumulator("c1-smoothness", tol)
    coords = lift.total_coords()
    if len(lift.params) < 3:
        return skipped_report("c1-smoothness", tol, "fewer than three lift samples")
    quotients = np.diff(coords, axis=0) / np.diff(lift.params)[:, None]
    jumps = np.linalg.norm(np.diff(quotients, axis=0), axis=1)
    for t, jump in zip(lift.params[1:-1], jumps):
        acc.add(jump, path=lift.gamma.name, t=float(t))
    return acc.report()


def check_horizontal_agreement(T: TransportFamily, c: ConnectionModel, points: Sequence[FiberElement],
                               tol: float = 1e-4, seed: int = config.DEFAULT_SEED) -> LawReport:
    """Largest principal angle between reconstructed and analytic horizontal spaces."""
    acc = LawAccumulator("horizontal-agreement", tol)
    rng = np.random.default_rng(seed)
    for k, p in enumerate(points):
        est = horizontal_space_from_transport(T, p, rng=rng)
        exact = analytic_horizontal_space(c, p)
        acc.add(float(principal_angles(est.spanning, exact.spanning).max()), point=k,
                base=np.asarray(p.base).tolist())
    return acc.report()


def convergence_study(c: ConnectionModel, loop: PathSpec, expected: np.ndarray,
                      steps: Sequence[float]) -> pd.DataFrame:
    """Holonomy error against a closed-form matrix for a sequence of RK4 steps."""
    rows = []
    previous = None
    for step in steps:
        P = holonomy(c, loop, step).matrix
        error = float(np.linalg.norm(P - expected))
        ratio = previous / error if previous is not None and error > 0 else math.nan
        rows.append({"step": step, "error": error, "ratio": ratio})
        previous = error
    errors = ", ".join(f"{r['error']:.3g}" for r in rows)
    logger.info(f"Convergence study on {loop.name!r}: errors {errors}")
    return pd.DataFrame(rows, columns=["step", "error", "ratio"])


def norm_drift(c: ConnectionModel, gamma: PathSpec, s0: float, p: FiberElement,
               samples: int = config.PATH_GRID_SAMPLES, tol: float = config.ODE_TOLERANCE) -> LawReport:
    """Metric norm of a Levi-Civita-transported vector along the lift."""
    if c.kind != "christoffel":
        raise ModelError("norm preservation is defined for christoffel connections")
    lift = horizontal_lift(c, gamma, s0, p, samples)

    def norm(u):
        v = np.asarray(u.payload)
        return math.sqrt(float(v @ c.metric(u.base) @ v))

    reference = norm(p)
    acc = LawAccumulator("norm-preservation", tol)
    for t, u in zip(lift.params, lift.elements):
        acc.add(abs(norm(u) - reference), path=gamma.name, t=float(t))
    return acc.report()


def sphere_frame(theta: float) -> np.ndarray:
    """Coordinate components -> orthonormal-frame components on S^2 at colatitude theta."""
    return np.diag([1.0, math.sin(theta)])
