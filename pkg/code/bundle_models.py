"""
bundle_models.py
---------------------------
Concrete bundles every transport is evaluated on. All models are trivial
products base x fibre:

    vector     R^n x R^k (flat vector bundle) or the tangent bundle of S^2
    group      R^n x G   (trivial principal bundle)
    foliation  R^n x R^k cut into leaves K_c = {(x, sigma(x) + c)}
    finite     R^n x {0, ..., m-1} (brute-force oracle fibres)

Bundle descriptor config (see docs/config_schema.md):

    {"base": {"kind": "Rn", "dim": 2} | {"kind": "sphere"},
     "fiber": {"kind": "vector", "rank": 2}
            | {"kind": "group", "group": "SO3"}
            | {"kind": "foliation", "rank": 1, "section": "identity"}
            | {"kind": "finite", "size": 3}}
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

import config
from lie_groups import GroupModel, group_model
from path_algebra import DomainError

logger = logging.getLogger(__name__)


class FiberError(DomainError):
    """An element does not belong to the fibre it was handed to."""


class SingularChartError(DomainError):
    """A point lies on (or too close to) a chart singularity."""


class ModelError(ValueError):
    """A bundle model violates its own structural invariants."""


# ───────────────────────────────────────────────
# Base spaces
# ───────────────────────────────────────────────

@dataclass(frozen=True)
class EuclideanBase:
    dim: int
    kind: str = "Rn"

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            raise DomainError(f"point {x.tolist()} is not in R^{self.dim}")
        return x

    def embed(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def same_point(self, x, y, tol: float = config.PATH_EQUALITY_TOLERANCE) -> bool:
        return float(np.linalg.norm(self.embed(x) - self.embed(y))) <= tol

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(size=self.dim)

    def describe(self) -> dict:
        return {"kind": "Rn", "dim": self.dim}


def levi_civita_from_metric(metric: Callable, x, h: float = 1e-5) -> np.ndarray:
    """Gamma^i_{jk} = 1/2 g^{il} (d_j g_lk + d_k g_lj - d_l g_jk), metric derivatives by central differences."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    dg = np.empty((n, n, n))  # dg[l, i, j] = d_l g_ij
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dg[l] = (metric(x + e) - metric(x - e)) / (2 * h)
    ginv = np.linalg.inv(metric(x))
    # term[l, j, k] = d_j g_lk + d_k g_lj - d_l g_jk
    term = np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg
    return 0.5 * np.einsum("il,ljk->ijk", ginv, term)


@dataclass(frozen=True)
class SurfaceModel:
    """A 2-dimensional base given by one chart, its induced metric and Christoffel symbols."""

    name: str
    chart: Callable[[np.ndarray], np.ndarray]
    metric: Callable[[np.ndarray], np.ndarray]
    christoffel: Callable[[np.ndarray], np.ndarray]
    domain_check: Callable[[np.ndarray], None]
    sampler: Callable[[np.random.Generator], np.ndarray]
    dim: int = 2
    kind: str = "surface"

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            raise DomainError(f"point {x.tolist()} is not a {self.name} chart point")
        self.domain_check(x)
        return x

    def embed(self, x) -> np.ndarray:
        return np.asarray(self.chart(np.asarray(x, dtype=float)), dtype=float)

    def same_point(self, x, y, tol: float = config.PATH_EQUALITY_TOLERANCE) -> bool:
        return float(np.linalg.norm(self.embed(x) - self.embed(y))) <= tol

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sampler(rng)

    def describe(self) -> dict:
        return {"kind": self.name}

    def verify(self, rng: np.random.Generator, samples: int = 100, tol: float = 1e-6) -> dict:
        """Worst residuals of the metric/Christoffel invariants over sampled chart points."""
        worst = {"metric_symmetry": 0.0, "metric_min_eig": math.inf,
                 "christoffel_symmetry": 0.0, "levi_civita": 0.0}
        for _ in range(samples):
            x = self.sample(rng)
            g = self.metric(x)
            gamma = self.christoffel(x)
            worst["metric_symmetry"] = max(worst["metric_symmetry"], float(np.abs(g - g.T).max()))
            worst["metric_min_eig"] = min(worst["metric_min_eig"], float(np.linalg.eigvalsh(g).min()))
            worst["christoffel_symmetry"] = max(
                worst["christoffel_symmetry"], float(np.abs(gamma - gamma.transpose(0, 2, 1)).max())
            )
            worst["levi_civita"] = max(
                worst["levi_civita"], float(np.abs(gamma - levi_civita_from_metric(self.metric, x)).max())
            )
        worst["passed"] = bool(
            worst["metric_symmetry"] < tol
            and worst["metric_min_eig"] > 0
            and worst["christoffel_symmetry"] < tol
            and worst["levi_civita"] < tol
        )
        return worst


def _sphere_check(x):
    theta = x[0]
    if theta <= config.POLE_MARGIN or theta >= math.pi - config.POLE_MARGIN:
        raise SingularChartError(f"colatitude {theta} is at a pole of the (theta, phi) chart")


def sphere_christoffel(theta: float, phi: float = 0.0) -> np.ndarray:
    """Levi-Civita symbols of diag(1, sin^2 theta), indexed [i, j, k]; 0 = theta, 1 = phi."""
    _sphere_check(np.array([theta, phi]))
    s, c = math.sin(theta), math.cos(theta)
    gamma = np.zeros((2, 2, 2))
    gamma[0, 1, 1] = -s * c
    gamma[1, 0, 1] = gamma[1, 1, 0] = c / s
    return gamma


def sphere_surface() -> SurfaceModel:
    def chart(x):
        theta, phi = x
        return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])

    def metric(x):
        return np.diag([1.0, math.sin(x[0]) ** 2])

    def sampler(rng):
        return np.array([rng.uniform(0.3, math.pi - 0.3), rng.uniform(0.0, 2 * math.pi)])

    return SurfaceModel(
        name="sphere",
        chart=chart,
        metric=metric,
        christoffel=lambda x: sphere_christoffel(x[0], x[1]),
        domain_check=_sphere_check,
        sampler=sampler,
    )


BaseSpace = Union[EuclideanBase, SurfaceModel]


# ───────────────────────────────────────────────
# Fibres
# ───────────────────────────────────────────────

@dataclass(frozen=True)
class VectorFiber:
    rank: int
    kind: str = "vector"

    @property
    def coord_dim(self) -> int:
        return self.rank

    def validate(self, payload) -> np.ndarray:
        v = np.asarray(payload, dtype=float).reshape(-1)
        if v.shape != (self.rank,) or not np.all(np.isfinite(v)):
            raise FiberError(f"vector payload must have {self.rank} finite entries, got {np.shape(payload)}")
        return v

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))

    def sample(self, rng, n: int) -> list:
        return [rng.normal(size=self.rank) for _ in range(n)]

    def coords(self, payload) -> np.ndarray:
        return np.asarray(payload, dtype=float)

    def from_coords(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float)

    def vertical(self, payload) -> np.ndarray:
        return np.eye(self.rank)

    def describe(self) -> dict:
        return {"kind": "vector", "rank": self.rank}


@dataclass(frozen=True)
class GroupFiber:
    group: GroupModel
    kind: str = "group"

    @property
    def coord_dim(self) -> int:
        return self.group.n * self.group.n

    def validate(self, payload) -> np.ndarray:
        g = np.asarray(payload, dtype=float)
        residual = self.group.constraint_residual(g)
        if residual > 1e-6:
            raise FiberError(f"payload is not an element of {self.group.id} (constraint residual {residual:.3g})")
        return self.group.renormalize(g)

    def distance(self, a, b) -> float:
        return self.group.distance(a, b)

    def sample(self, rng, n: int) -> list:
        return [self.group.random(rng) for _ in range(n)]

    def coords(self, payload) -> np.ndarray:
        return np.asarray(payload, dtype=float).reshape(-1)

    def from_coords(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float).reshape(self.group.n, self.group.n)

    def vertical(self, payload) -> np.ndarray:
        g = np.asarray(payload, dtype=float)
        return np.column_stack([(g @ x).reshape(-1) for x in self.group.lie_basis])

    def describe(self) -> dict:
        out = {"kind": "group", "group": self.group.id}
        if self.group.id == "GLn":
            out["n"] = self.group.n
        return out


SECTIONS: dict[str, Callable[[np.ndarray, int], np.ndarray]] = {
    "zero": lambda x, k: np.zeros(k),
    # K_c = {(x, x + c)} on R x R
    "identity": lambda x, k: np.pad(x[:k], (0, max(0, k - x.shape[0]))),
    "sine": lambda x, k: np.full(k, math.sin(float(x[0]))),
}


@dataclass(frozen=True)
class FoliationModel:
    """Leaves K_alpha = {(x, sigma(x) + alpha)}: each leaf is a graph over the base, one point per fibre."""

    base_dim: int
    rank: int
    section_id: str = "identity"

    def __post_init__(self):
        if self.section_id not in SECTIONS:
            raise ModelError(f"unknown foliation section {self.section_id!r}; known: {sorted(SECTIONS)}")
        report = self.verify(np.random.default_rng(config.DEFAULT_SEED), samples=16)
        if not report["passed"]:
            raise ModelError(f"foliation {self.section_id!r} violates its leaf invariants: {report}")

    def section(self, x) -> np.ndarray:
        return np.asarray(SECTIONS[self.section_id](np.asarray(x, dtype=float), self.rank), dtype=float)

    def leaf_point(self, alpha, x) -> np.ndarray:
        """Fibre coordinate of the point of leaf alpha over x."""
        return self.section(x) + np.asarray(alpha, dtype=float)

    def classify(self, x, y) -> np.ndarray:
        label = np.asarray(y, dtype=float) - self.section(x)
        if label.shape != (self.rank,) or not np.all(np.isfinite(label)):
            raise ModelError(f"point ({np.asarray(x).tolist()}, {np.asarray(y).tolist()}) lies on no leaf")
        return label

    def verify(self, rng: np.random.Generator, samples: int = 64) -> dict:
        """Sampled residuals for: leaves are sections, leaves are disjoint, leaves cover."""
        section_res = disjoint_gap = cover_res = 0.0
        for _ in range(samples):
            x = rng.normal(size=self.base_dim)
            alpha, beta = rng.normal(size=self.rank), rng.normal(size=self.rank)
            y = rng.normal(size=self.rank)
            section_res = max(section_res, float(np.linalg.norm(self.classify(x, self.leaf_point(alpha, x)) - alpha)))
            # points of two leaves over the same x are classified |alpha - beta| apart
            labels = self.classify(x, self.leaf_point(alpha, x)), self.classify(x, self.leaf_point(beta, x))
            gap = np.linalg.norm(labels[0] - labels[1]) - np.linalg.norm(alpha - beta)
            disjoint_gap = max(disjoint_gap, float(abs(gap)))
            cover_res = max(cover_res, float(np.linalg.norm(self.leaf_point(self.classify(x, y), x) - y)))
        passed = max(section_res, disjoint_gap, cover_res) < 1e-10
        return {"section": section_res, "disjointness": disjoint_gap, "cover": cover_res, "passed": bool(passed)}


@dataclass(frozen=True)
class LeafFiber:
    foliation: FoliationModel
    kind: str = "leaf"

    @property
    def rank(self) -> int:
        return self.foliation.rank

    @property
    def coord_dim(self) -> int:
        return self.rank

    def validate(self, payload) -> np.ndarray:
        y = np.asarray(payload, dtype=float).reshape(-1)
        if y.shape != (self.rank,) or not np.all(np.isfinite(y)):
            raise FiberError(f"leaf payload must have {self.rank} finite entries")
        return y

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))

    def sample(self, rng, n: int) -> list:
        return [rng.normal(size=self.rank) for _ in range(n)]

    def coords(self, payload) -> np.ndarray:
        return np.asarray(payload, dtype=float)

    def from_coords(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float)

    def vertical(self, payload) -> np.ndarray:
        return np.eye(self.rank)

    def describe(self) -> dict:
        return {"kind": "foliation", "rank": self.rank, "section": self.foliation.section_id}


@dataclass(frozen=True)
class FiniteFiber:
    size: int
    kind: str = "finite"

    def __post_init__(self):
        if self.size < 1:
            raise ModelError(f"finite fibre needs at least one element, got {self.size}")

    @property
    def coord_dim(self) -> int:
        return 0

    def validate(self, payload) -> int:
        if isinstance(payload, np.ndarray):
            payload = payload.item()
        if isinstance(payload, float) and payload.is_integer():
            payload = int(payload)
        if not isinstance(payload, (int, np.integer)) or not 0 <= payload < self.size:
            raise FiberError(f"finite payload must be an index in 0..{self.size - 1}, got {payload!r}")
        return int(payload)

    def distance(self, a, b) -> float:
        return 0.0 if int(a) == int(b) else 1.0

    def sample(self, rng, n: int) -> list:
        # finite fibres are always enumerated exhaustively
        return list(range(self.size))

    def coords(self, payload) -> np.ndarray:
        return np.zeros(0)

    def from_coords(self, coords):
        raise FiberError("finite fibres have no continuous coordinates")

    def vertical(self, payload) -> np.ndarray:
        return np.zeros((0, 0))

    def describe(self) -> dict:
        return {"kind": "finite", "size": self.size}


FiberKind = Union[VectorFiber, GroupFiber, LeafFiber, FiniteFiber]


# ───────────────────────────────────────────────
# Bundles, fibres, elements
# ───────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FiberElement:
    base: np.ndarray
    payload: Union[np.ndarray, int]

    def to_config(self) -> dict:
        payload = self.payload.tolist() if isinstance(self.payload, np.ndarray) else self.payload
        return {"base": np.asarray(self.base).tolist(), "payload": payload}

    def __repr__(self):
        return f"FiberElement(base={np.round(self.base, 6).tolist()}, payload={self.to_config()['payload']})"


@dataclass(frozen=True)
class BundleModel:
    base: BaseSpace
    fiber: FiberKind
    name: str = "bundle"

    @property
    def base_dim(self) -> int:
        return self.base.dim

    @property
    def fiber_kind(self) -> str:
        return self.fiber.kind

    @property
    def total_dim(self) -> int:
        return self.base.dim + self.fiber.coord_dim

    def fiber_at(self, x) -> "FiberDescriptor":
        return FiberDescriptor(self, self.base.check(x))

    def element(self, x, payload) -> FiberElement:
        return self.fiber_at(x).element(payload)

    def projection(self, u: FiberElement) -> np.ndarray:
        return u.base

    def distance(self, u: FiberElement, v: FiberElement) -> float:
        """Fibre distance, plus the base gap when u and v sit over different points."""
        d = self.fiber.distance(u.payload, v.payload)
        if not self.base.same_point(u.base, v.base):
            d += float(np.linalg.norm(self.base.embed(u.base) - self.base.embed(v.base)))
        return d

    def total_coords(self, u: FiberElement) -> np.ndarray:
        return np.concatenate([np.asarray(u.base, dtype=float), self.fiber.coords(u.payload)])

    def from_total_coords(self, coords) -> FiberElement:
        coords = np.asarray(coords, dtype=float)
        x = coords[: self.base_dim]
        return self.element(x, self.fiber.from_coords(coords[self.base_dim:]))

    def vertical_basis(self, u: FiberElement) -> np.ndarray:
        """Columns spanning the vertical tangent space at u, in total-space chart coords."""
        fib = self.fiber.vertical(u.payload)
        return np.vstack([np.zeros((self.base_dim, fib.shape[1])), fib])

    def sample_elements(self, x, rng: np.random.Generator, n: int = config.FIBER_SAMPLES) -> list[FiberElement]:
        fibre = self.fiber_at(x)
        return [fibre.element(p) for p in self.fiber.sample(rng, n)]

    def describe(self) -> dict:
        return {"base": self.base.describe(), "fiber": self.fiber.describe()}


@dataclass(frozen=True, eq=False)
class FiberDescriptor:
    """The fibre pi^-1(x) of a bundle; validates and builds elements over x."""

    bundle: BundleModel
    base_point: np.ndarray = field(repr=False)

    def contains(self, u: FiberElement) -> bool:
        return self.bundle.base.same_point(u.base, self.base_point)

    def require(self, u: FiberElement) -> FiberElement:
        if not self.contains(u):
            raise FiberError(
                f"element over {np.asarray(u.base).tolist()} is not in the fibre over {self.base_point.tolist()}"
            )
        return u

    def element(self, payload) -> FiberElement:
        return FiberElement(self.base_point, self.bundle.fiber.validate(payload))

    def samples(self, rng: np.random.Generator, n: int = config.FIBER_SAMPLES) -> list[FiberElement]:
        return [self.element(p) for p in self.bundle.fiber.sample(rng, n)]

    def same_fibre(self, other: "FiberDescriptor") -> bool:
        return self.bundle.base.same_point(self.base_point, other.base_point)


# ───────────────────────────────────────────────
# Constructors
# ───────────────────────────────────────────────

def vector_bundle(base_dim: int, rank: int) -> BundleModel:
    return BundleModel(EuclideanBase(base_dim), VectorFiber(rank), f"R{base_dim}xR{rank}")


def sphere_tangent_bundle() -> BundleModel:
    return BundleModel(sphere_surface(), VectorFiber(2), "TS2")


def principal_bundle(base_dim: int, group: GroupModel | str) -> BundleModel:
    g = group_model(group) if isinstance(group, str) else group
    return BundleModel(EuclideanBase(base_dim), GroupFiber(g), f"R{base_dim}x{g.id}")


def foliated_bundle(base_dim: int, rank: int, section_id: str = "identity") -> BundleModel:
    fol = FoliationModel(base_dim, rank, section_id)
    return BundleModel(EuclideanBase(base_dim), LeafFiber(fol), f"R{base_dim}xR{rank}/{section_id}")


def finite_bundle(base_dim: int, size: int) -> BundleModel:
    return BundleModel(EuclideanBase(base_dim), FiniteFiber(size), f"R{base_dim}x{{0..{size - 1}}}")


def bundle_from_config(mapping: dict) -> BundleModel:
    """Resolve a bundle descriptor; raises ModelError / KeyError on bad input."""
    base_cfg = mapping["base"]
    fiber_cfg = mapping["fiber"]
    base_kind = base_cfg.get("kind", "Rn")
    if base_kind == "sphere":
        base: BaseSpace = sphere_surface()
    elif base_kind == "Rn":
        base = EuclideanBase(int(base_cfg["dim"]))
    else:
        raise ModelError(f"unknown base kind {base_kind!r}; use 'Rn' or 'sphere'")

    fiber_kind = fiber_cfg["kind"]
    if fiber_kind == "vector":
        fiber: FiberKind = VectorFiber(int(fiber_cfg["rank"]))
    elif fiber_kind == "group":
        try:
            fiber = GroupFiber(group_model(fiber_cfg["group"], fiber_cfg.get("n")))
        except ValueError as e:
            raise ModelError(str(e)) from e
    elif fiber_kind == "foliation":
        if base_kind != "Rn":
            raise ModelError("foliated bundles live over R^n")
        fiber = LeafFiber(FoliationModel(base.dim, int(fiber_cfg.get("rank", 1)), fiber_cfg.get("section", "identity")))
    elif fiber_kind == "finite":
        fiber = FiniteFiber(int(fiber_cfg["size"]))
    else:
        raise ModelError(f"unknown fiber kind {fiber_kind!r}")
    name = mapping.get("name") or f"{base_kind}/{fiber_kind}"
    logger.debug(f"Resolved bundle {name}: {base.describe()} x {fiber.describe()}")
    return BundleModel(base, fiber, name)


def element_from_config(bundle: BundleModel, mapping: dict) -> FiberElement:
    return bundle.element(mapping["base"], mapping["payload"])
