"""
path_algebra.py
---------------------------
Paths in a single base chart, and the path operations that transport laws
quantify over: restriction, reparametrization, canonical inverse, canonical
product and point paths.

A path is an immutable closure over chart coordinates. Paths hash by identity,
so they can key caches; equality of two paths is pointwise on a uniform grid
(`paths_equal`).

Config form of a path (see docs/config_schema.md):

| kind        | keys                                                   |
|-------------|--------------------------------------------------------|
| `analytic`  | `formula`, `params`, `domain`                          |
| `sampled`   | `knots`, `values`, `order` (1 or 3), optional `domain` |
| `piecewise` | `pieces` (list of path configs), optional `domain`     |
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import make_interp_spline

import config

logger = logging.getLogger(__name__)

PathKind = Literal["analytic", "piecewise", "sampled"]
Orientation = Literal["preserving", "reversing"]

# parameters may overshoot a domain end by this much (float noise from reparam maps)
PARAM_SLACK = 1e-9


class DomainError(ValueError):
    """A parameter, interval or point lies outside where it must be."""


class CompositionError(DomainError):
    """Two paths cannot be concatenated (endpoints or domains disagree)."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"interval ends must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise DomainError(f"interval [{self.lo}, {self.hi}] has lo > hi")

    @classmethod
    def unit(cls) -> "Interval":
        return cls(0.0, 1.0)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, t: float, slack: float = PARAM_SLACK) -> bool:
        return self.lo - slack <= t <= self.hi + slack

    def contains_interval(self, other: "Interval", slack: float = PARAM_SLACK) -> bool:
        return self.contains(other.lo, slack) and self.contains(other.hi, slack)

    def matches(self, other: "Interval", tol: float = 1e-12) -> bool:
        return abs(self.lo - other.lo) <= tol and abs(self.hi - other.hi) <= tol

    def clamp(self, t: float) -> float:
        return min(max(t, self.lo), self.hi)

    def to_list(self) -> list[float]:
        return [self.lo, self.hi]

    def __str__(self):
        return f"[{self.lo:g}, {self.hi:g}]"


def uniform_grid(interval: Interval, n: int = config.PATH_GRID_SAMPLES) -> np.ndarray:
    """n equally spaced parameters covering the interval (just `lo` for point intervals)."""
    if n < 1:
        raise DomainError(f"grid needs at least one sample, got {n}")
    if interval.is_point or n == 1:
        return np.array([interval.lo])
    return np.linspace(interval.lo, interval.hi, n)


@dataclass(frozen=True, eq=False)
class PathSpec:
    domain: Interval
    func: Callable[[float], np.ndarray]
    dfunc: Optional[Callable[[float], np.ndarray]] = None
    kind: PathKind = "analytic"
    # config mapping this path was built from; None for derived paths
    recipe: Optional[dict] = field(default=None, repr=False)
    name: str = "path"
    # parameters where the derivative may jump (piecewise joins)
    breakpoints: tuple[float, ...] = ()

    @property
    def is_c1(self) -> bool:
        return self.dfunc is not None

    @property
    def dim(self) -> int:
        return int(self.eval(self.domain.lo).shape[0])

    @property
    def start(self) -> np.ndarray:
        return self.eval(self.domain.lo)

    @property
    def end(self) -> np.ndarray:
        return self.eval(self.domain.hi)

    def _param(self, t: float) -> float:
        if not self.domain.contains(t):
            raise DomainError(f"parameter {t} outside domain {self.domain} of path {self.name!r}")
        return self.domain.clamp(float(t))

    def eval(self, t: float) -> np.ndarray:
        return np.asarray(self.func(self._param(t)), dtype=float)

    def deriv(self, t: float) -> np.ndarray:
        if self.dfunc is None:
            raise DomainError(f"path {self.name!r} is not declared C1")
        return np.asarray(self.dfunc(self._param(t)), dtype=float)

    def to_config(self) -> dict:
        if self.recipe is None:
            raise DomainError(f"path {self.name!r} is derived and has no config form")
        out = dict(self.recipe)
        out["name"] = self.name
        out["domain"] = self.domain.to_list()
        return out


# ───────────────────────────────────────────────
# Analytic formulas
# ───────────────────────────────────────────────

def _constant(point):
    x = np.asarray(point, dtype=float)
    return (lambda t: x.copy()), (lambda t: np.zeros_like(x))


def _line(start, velocity):
    x0 = np.asarray(start, dtype=float)
    v = np.asarray(velocity, dtype=float)
    return (lambda t: x0 + v * t), (lambda t: v.copy())


def _quadratic(start, velocity, accel):
    x0 = np.asarray(start, dtype=float)
    v = np.asarray(velocity, dtype=float)
    a = np.asarray(accel, dtype=float)
    return (lambda t: x0 + v * t + a * t * t), (lambda t: v + 2.0 * a * t)


def _circle(center, radius, phase=0.0, rate=2.0 * math.pi):
    c = np.asarray(center, dtype=float)

    def func(t):
        angle = phase + rate * t
        return c + radius * np.array([math.cos(angle), math.sin(angle)])

    def dfunc(t):
        angle = phase + rate * t
        return radius * rate * np.array([-math.sin(angle), math.cos(angle)])

    return func, dfunc


FORMULAS: dict[str, Callable] = {
    "constant": _constant,
    "line": _line,
    "quadratic": _quadratic,
    "circle": _circle,
}


def _plain(value):
    """numpy → JSON-friendly python values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def analytic_path(formula: str, domain: Interval, name: str | None = None, **params) -> PathSpec:
    if formula not in FORMULAS:
        raise DomainError(f"unknown formula id {formula!r}; known: {sorted(FORMULAS)}")
    func, dfunc = FORMULAS[formula](**params)
    recipe = {
        "kind": "analytic",
        "formula": formula,
        "params": {k: _plain(v) for k, v in params.items()},
    }
    return PathSpec(domain, func, dfunc, "analytic", recipe, name or formula)


def point_path(r: float, x) -> PathSpec:
    """The path {r} -> {x}."""
    return analytic_path("constant", Interval(r, r), name="point", point=x)


def sampled_path(knots, values, order: int = 3, name: str = "sampled") -> PathSpec:
    """Interpolated path through (knot, value) pairs; cubic interpolation carries a derivative."""
    ts = np.asarray(knots, dtype=float)
    ys = np.asarray(values, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    if order not in (1, 3):
        raise DomainError(f"sampled paths support interpolation order 1 or 3, got {order}")
    if len(ts) != len(ys) or len(ts) <= order:
        raise DomainError(f"need more than {order} knots with matching values, got {len(ts)}/{len(ys)}")
    if np.any(np.diff(ts) <= 0):
        raise DomainError("knots must be strictly increasing")

    spline = make_interp_spline(ts, ys, k=order)
    dfunc = None
    if order == 3:
        dspline = spline.derivative()
        dfunc = lambda t: dspline(t)  # noqa: E731
    recipe = {"kind": "sampled", "knots": ts.tolist(), "values": ys.tolist(), "order": order}
    return PathSpec(Interval(float(ts[0]), float(ts[-1])), lambda t: spline(t), dfunc, "sampled", recipe, name)


def piecewise_path(pieces: Sequence[PathSpec], name: str = "piecewise") -> PathSpec:
    """Concatenate pieces whose domains abut; adjacent pieces must agree at the breakpoints."""
    if not pieces:
        raise CompositionError("piecewise path needs at least one piece")
    for left, right in zip(pieces, pieces[1:]):
        if abs(left.domain.hi - right.domain.lo) > 1e-12:
            raise CompositionError(
                f"pieces {left.name!r} {left.domain} and {right.name!r} {right.domain} do not abut"
            )
        gap = float(np.linalg.norm(left.end - right.start))
        if gap > config.PATH_EQUALITY_TOLERANCE:
            raise CompositionError(
                f"pieces {left.name!r} and {right.name!r} disagree at t={right.domain.lo} (gap {gap:.3g})"
            )

    pieces = list(pieces)
    breakpoints = [p.domain.lo for p in pieces[1:]]

    def locate(t):
        return pieces[bisect.bisect_right(breakpoints, t)]

    func = lambda t: locate(t).eval(t)  # noqa: E731
    dfunc = None
    if all(p.is_c1 for p in pieces):
        dfunc = lambda t: locate(t).deriv(t)  # noqa: E731

    recipe = None
    if all(p.recipe is not None for p in pieces):
        recipe = {
            "kind": "piecewise",
            "pieces": [p.to_config() for p in pieces],
            "breakpoints": breakpoints,
        }
    domain = Interval(pieces[0].domain.lo, pieces[-1].domain.hi)
    joins = sorted(set(breakpoints).union(b for p in pieces for b in p.breakpoints))
    return PathSpec(domain, func, dfunc, "piecewise", recipe, name, tuple(joins))


def path_from_config(mapping: dict) -> PathSpec:
    """Build a path from its config mapping; raises DomainError / KeyError on bad input."""
    kind = mapping.get("kind", "analytic")
    name = mapping.get("name")
    if kind == "analytic":
        domain = Interval(*mapping["domain"])
        return analytic_path(mapping["formula"], domain, name=name, **mapping.get("params", {}))
    if kind == "sampled":
        path = sampled_path(mapping["knots"], mapping["values"], mapping.get("order", 3), name or "sampled")
    elif kind == "piecewise":
        path = piecewise_path([path_from_config(m) for m in mapping["pieces"]], name or "piecewise")
    else:
        raise DomainError(f"unknown path kind {kind!r}")
    if "domain" in mapping:
        path = restrict(path, Interval(*mapping["domain"]))
    return path


# ───────────────────────────────────────────────
# Reparametrizations
# ───────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Reparam:
    source: Interval
    target: Interval
    map: Callable[[float], float]
    inverse_map: Callable[[float], float]
    orientation: Orientation = "preserving"
    deriv: Optional[Callable[[float], float]] = None
    name: str = "chi"
    # source parameters where the derivative jumps
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        self.validate()

    def __call__(self, t: float) -> float:
        return float(self.map(t))

    def validate(self, samples: int = config.PATH_GRID_SAMPLES, tol: float = 1e-9) -> None:
        """Bijection source -> target with the declared orientation, checked on a grid."""
        if self.source.is_point != self.target.is_point:
            raise DomainError(f"{self.name}: cannot map {self.source} bijectively onto {self.target}")
        lo_img, hi_img = self.map(self.source.lo), self.map(self.source.hi)
        want = (self.target.lo, self.target.hi)
        if self.orientation == "reversing":
            want = want[::-1]
        if abs(lo_img - want[0]) > tol or abs(hi_img - want[1]) > tol:
            raise DomainError(f"{self.name}: endpoints of {self.source} do not land on {self.target}")
        if self.source.is_point:
            return

        values = np.array([self.map(t) for t in uniform_grid(self.source, samples)])
        steps = np.diff(values)
        increasing = bool(np.all(steps > 0))
        decreasing = bool(np.all(steps < 0))
        if (self.orientation == "preserving" and not increasing) or (
            self.orientation == "reversing" and not decreasing
        ):
            raise DomainError(f"{self.name}: map is not monotone with orientation {self.orientation!r}")

        targets = uniform_grid(self.target, samples)
        round_trip = max(abs(self.map(self.inverse_map(y)) - y) for y in targets)
        if round_trip > tol:
            raise DomainError(f"{self.name}: map o inverse_map differs from identity by {round_trip:.3g}")


def identity_reparam(interval: Interval) -> Reparam:
    return Reparam(interval, interval, lambda t: t, lambda y: y, "preserving", lambda t: 1.0, "id")


def affine_reparam(source: Interval, target: Interval, orientation: Orientation = "preserving") -> Reparam:
    """The affine bijection source -> target (point intervals map to point intervals)."""
    if source.is_point:
        return Reparam(source, target, lambda t: target.lo, lambda y: source.lo, orientation,
                       lambda t: 0.0, "affine")
    slope = target.length / source.length
    if orientation == "preserving":
        fwd = lambda t: target.lo + (t - source.lo) * slope  # noqa: E731
        back = lambda y: source.lo + (y - target.lo) / slope  # noqa: E731
        d = slope
    else:
        fwd = lambda t: target.hi - (t - source.lo) * slope  # noqa: E731
        back = lambda y: source.lo + (target.hi - y) / slope  # noqa: E731
        d = -slope
    return Reparam(source, target, fwd, back, orientation, lambda t: d, "affine")


def power_reparam(exponent: float, reverse: bool = False) -> Reparam:
    """t -> t**exponent on [0, 1]; with reverse, the decelerating t -> 1 - (1 - t)**exponent."""
    if exponent <= 0:
        raise DomainError(f"power reparametrization needs a positive exponent, got {exponent}")
    unit = Interval.unit()
    if reverse:
        return Reparam(
            unit, unit,
            lambda t: 1.0 - (1.0 - t) ** exponent,
            lambda y: 1.0 - max(1.0 - y, 0.0) ** (1.0 / exponent),
            "preserving",
            lambda t: exponent * max(1.0 - t, 1e-12) ** (exponent - 1.0),
            f"rpow{exponent:g}",
        )
    return Reparam(
        unit, unit,
        lambda t: t ** exponent,
        lambda y: max(y, 0.0) ** (1.0 / exponent),
        "preserving",
        lambda t: exponent * max(t, 1e-12) ** (exponent - 1.0),
        f"pow{exponent:g}",
    )


def piecewise_linear_reparam(source_knots, target_knots) -> Reparam:
    """Increasing piecewise-linear bijection interpolating the knot pairs."""
    xs = np.asarray(source_knots, dtype=float)
    ys = np.asarray(target_knots, dtype=float)
    if len(xs) != len(ys) or len(xs) < 2:
        raise DomainError("piecewise-linear reparametrization needs matching knot lists of length >= 2")
    slopes = np.diff(ys) / np.diff(xs)

    def deriv(t):
        i = min(max(int(np.searchsorted(xs, t, side="right")) - 1, 0), len(slopes) - 1)
        return float(slopes[i])

    return Reparam(
        Interval(float(xs[0]), float(xs[-1])),
        Interval(float(ys[0]), float(ys[-1])),
        lambda t: float(np.interp(t, xs, ys)),
        lambda y: float(np.interp(y, ys, xs)),
        "preserving",
        deriv,
        "pl",
        tuple(float(x) for x in xs[1:-1]),
    )


def compose_reparams(outer: Reparam, inner: Reparam) -> Reparam:
    """outer o inner, i.e. t -> outer(inner(t))."""
    if not inner.target.matches(outer.source):
        raise DomainError(f"cannot compose: {inner.name} lands in {inner.target}, {outer.name} starts on {outer.source}")
    orientation = "preserving" if outer.orientation == inner.orientation else "reversing"
    deriv = None
    if outer.deriv is not None and inner.deriv is not None:
        deriv = lambda t: outer.deriv(inner(t)) * inner.deriv(t)  # noqa: E731
    return Reparam(
        inner.source,
        outer.target,
        lambda t: outer(inner(t)),
        lambda y: inner.inverse_map(outer.inverse_map(y)),
        orientation,
        deriv,
        f"{outer.name}o{inner.name}",
        tuple(sorted(set(inner.breakpoints).union(float(inner.inverse_map(b)) for b in outer.breakpoints))),
    )


# ───────────────────────────────────────────────
# Path operations
# ───────────────────────────────────────────────

def restrict(p: PathSpec, sub: Interval) -> PathSpec:
    if not p.domain.contains_interval(sub):
        raise DomainError(f"cannot restrict {p.name!r} on {p.domain} to {sub}")
    if sub.matches(p.domain):
        return p
    joins = tuple(b for b in p.breakpoints if sub.lo < b < sub.hi)
    return replace(p, domain=sub, name=f"{p.name}|{sub}", breakpoints=joins)


def reparametrize(p: PathSpec, chi: Reparam) -> PathSpec:
    """p o chi, defined on chi.source."""
    if not chi.target.matches(p.domain):
        raise DomainError(f"reparametrization {chi.name} lands in {chi.target}, path {p.name!r} lives on {p.domain}")
    func = lambda t: p.eval(chi(t))  # noqa: E731
    dfunc = None
    if p.is_c1 and chi.deriv is not None:
        dfunc = lambda t: p.deriv(chi(t)) * chi.deriv(t)  # noqa: E731
    joins = sorted(set(chi.breakpoints).union(float(chi.inverse_map(b)) for b in p.breakpoints))
    joins = tuple(b for b in joins if chi.source.lo < b < chi.source.hi)
    return PathSpec(chi.source, func, dfunc, p.kind, None, f"{p.name}o{chi.name}", joins)


def to_unit_interval(p: PathSpec) -> PathSpec:
    """Orientation-preserving affine reparametrization onto [0, 1]."""
    if p.domain.matches(Interval.unit()):
        return p
    if p.domain.is_point:
        raise DomainError(f"point path {p.name!r} has no reparametrization onto [0, 1]")
    return reparametrize(p, affine_reparam(Interval.unit(), p.domain))


def canonical_inverse(p: PathSpec) -> PathSpec:
    """t -> p(1 - t) on [0, 1]."""
    if not p.domain.matches(Interval.unit()):
        raise DomainError(f"canonical inverse needs domain [0, 1], {p.name!r} lives on {p.domain}")
    unit = Interval.unit()
    return replace(reparametrize(p, affine_reparam(unit, unit, "reversing")), name=f"{p.name}^-1")


def canonical_product(p1: PathSpec, p2: PathSpec) -> PathSpec:
    """p1 run at double speed on [0, 1/2], then p2 on [1/2, 1]."""
    unit = Interval.unit()
    for p in (p1, p2):
        if not p.domain.matches(unit):
            raise DomainError(f"canonical product needs domain [0, 1], {p.name!r} lives on {p.domain}")
    gap = float(np.linalg.norm(p1.end - p2.start))
    if gap > config.PATH_EQUALITY_TOLERANCE:
        raise CompositionError(f"{p1.name!r} ends {gap:.3g} away from where {p2.name!r} starts")
    first = reparametrize(p1, affine_reparam(Interval(0.0, 0.5), unit))
    second = reparametrize(p2, affine_reparam(Interval(0.5, 1.0), unit))
    return piecewise_path([first, second], name=f"({p1.name}.{p2.name})")


# ───────────────────────────────────────────────
# Comparisons and measurements
# ───────────────────────────────────────────────

def path_distance(p: PathSpec, q: PathSpec, samples: int = config.PATH_GRID_SAMPLES) -> float:
    """Max pointwise chart distance on a shared uniform grid."""
    if not p.domain.matches(q.domain, tol=PARAM_SLACK):
        raise DomainError(f"paths {p.name!r} {p.domain} and {q.name!r} {q.domain} have different domains")
    return max(float(np.linalg.norm(p.eval(t) - q.eval(t))) for t in uniform_grid(p.domain, samples))


def paths_equal(p: PathSpec, q: PathSpec, samples: int = config.PATH_GRID_SAMPLES,
                tol: float = config.PATH_EQUALITY_TOLERANCE) -> bool:
    return path_distance(p, q, samples) <= tol


def derivative_residual(p: PathSpec, samples: int = 11, h: float = 1e-5) -> float:
    """Max gap between `deriv` and a central difference of `eval`, at cell midpoints."""
    if p.domain.is_point:
        return 0.0
    grid = uniform_grid(p.domain, samples + 1)
    mids = (grid[:-1] + grid[1:]) / 2
    h = min(h, (grid[1] - grid[0]) / 4)
    return max(
        float(np.linalg.norm((p.eval(t + h) - p.eval(t - h)) / (2 * h) - p.deriv(t)))
        for t in mids
    )


def arc_length(p: PathSpec, a: float | None = None, b: float | None = None) -> float:
    """Euclidean chart length of p between parameters a <= b (defaults: the whole domain)."""
    a = p.domain.lo if a is None else a
    b = p.domain.hi if b is None else b
    if b < a:
        return -arc_length(p, b, a)
    if a == b:
        return 0.0
    if p.is_c1:
        value, _ = quad(lambda t: float(np.linalg.norm(p.deriv(t))), a, b, limit=200)
        return float(value)
    ts = np.linspace(a, b, 1001)
    pts = np.array([p.eval(t) for t in ts])
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
