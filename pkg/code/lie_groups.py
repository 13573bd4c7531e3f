"""
lie_groups.py
---------------------------
Matrix groups carried as fibres of trivial principal bundles B x G and as
values of group-valued path functionals.

Supported ids:

| id    | matrices            | Lie algebra dim |
|-------|---------------------|-----------------|
| `SO2` | 2x2 rotations       | 1               |
| `U1`  | 2x2 rotations (e^{i a} as R(a)) | 1   |
| `SO3` | 3x3 rotations       | 3               |
| `GLn` | invertible n x n    | n*n             |

Products and inverses are projected back onto the group (polar factor) once
the constraint residual exceeds `config.RENORMALIZE_THRESHOLD`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.linalg import expm, logm, polar

import config

logger = logging.getLogger(__name__)

GroupId = Literal["SO2", "U1", "SO3", "GLn"]

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation2(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def hat3(xi) -> np.ndarray:
    """R^3 -> so(3) skew matrix."""
    x, y, z = np.asarray(xi, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_exp(xi) -> np.ndarray:
    """Rodrigues formula for exp(hat(xi))."""
    xi = np.asarray(xi, dtype=float)
    theta = float(np.linalg.norm(xi))
    if theta < 1e-14:
        return np.eye(3) + hat3(xi)
    k = hat3(xi / theta)
    return np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * k @ k


@dataclass(frozen=True)
class GroupModel:
    id: GroupId
    n: int

    @property
    def dim(self) -> int:
        return 1 if self.id in ("SO2", "U1") else (3 if self.id == "SO3" else self.n * self.n)

    @property
    def orthogonal(self) -> bool:
        return self.id != "GLn"

    @property
    def is_abelian(self) -> bool:
        return self.id in ("SO2", "U1") or (self.id == "GLn" and self.n == 1)

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.n)

    @cached_property
    def lie_basis(self) -> tuple[np.ndarray, ...]:
        if self.id in ("SO2", "U1"):
            return (J2.copy(),)
        if self.id == "SO3":
            return tuple(hat3(e) for e in np.eye(3))
        basis = []
        for i in range(self.n):
            for j in range(self.n):
                e = np.zeros((self.n, self.n))
                e[i, j] = 1.0
                basis.append(e)
        return tuple(basis)

    def hat(self, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.shape != (self.dim,):
            raise ValueError(f"{self.id}: Lie algebra coordinates need shape ({self.dim},), got {xi.shape}")
        return sum(c * b for c, b in zip(xi, self.lie_basis))

    # ── group operations ────────────────────────

    def constraint_residual(self, g: np.ndarray) -> float:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n, self.n) or not np.all(np.isfinite(g)):
            return math.inf
        if self.orthogonal:
            return float(np.linalg.norm(g.T @ g - np.eye(self.n)) + abs(np.linalg.det(g) - 1.0))
        return 0.0 if abs(np.linalg.det(g)) > 1e-12 else math.inf

    def contains(self, g: np.ndarray, tol: float = 1e-10) -> bool:
        return self.constraint_residual(g) < tol

    def renormalize(self, g: np.ndarray) -> np.ndarray:
        """Orthogonal polar factor once the drift passes the threshold; GLn is left alone."""
        g = np.asarray(g, dtype=float)
        if not self.orthogonal or self.constraint_residual(g) <= config.RENORMALIZE_THRESHOLD:
            return g
        u, _ = polar(g)
        if np.linalg.det(u) < 0:
            raise ValueError(f"{self.id}: matrix drifted to the other component (det < 0)")
        return u

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.renormalize(np.asarray(a) @ np.asarray(b))

    def invert(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if self.orthogonal:
            return self.renormalize(a.T.copy())
        return np.linalg.inv(a)

    def exp(self, x: np.ndarray) -> np.ndarray:
        """Matrix exponential of a Lie algebra element."""
        x = np.asarray(x, dtype=float)
        if self.id in ("SO2", "U1"):
            return rotation2(float(x[1, 0]))
        if self.id == "SO3":
            return so3_exp([x[2, 1], x[0, 2], x[1, 0]])
        return expm(x)

    def log(self, g: np.ndarray) -> np.ndarray:
        if self.id in ("SO2", "U1"):
            return math.atan2(g[1, 0], g[0, 0]) * J2
        return np.real(logm(np.asarray(g, dtype=float)))

    def distance(self, a: np.ndarray, b: np.ndarray, metric: str | None = None) -> float:
        """Bi-invariant distance for compact groups ("frobenius" or "log")."""
        metric = metric or config.GROUP_DISTANCE
        if metric == "frobenius":
            return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
        if metric == "log":
            return float(np.linalg.norm(self.log(self.invert(a) @ np.asarray(b))))
        raise ValueError(f"unknown group distance {metric!r}; use 'frobenius' or 'log'")

    def random(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        if self.orthogonal:
            return self.exp(self.hat(scale * rng.normal(size=self.dim)))
        while True:
            g = np.eye(self.n) + 0.3 * scale * rng.normal(size=(self.n, self.n))
            if np.linalg.det(g) > 0.1:
                return g


def group_model(gid: str, n: int | None = None) -> GroupModel:
    """Look up a group by id; GLn needs its matrix size."""
    if gid in ("SO2", "U1"):
        return GroupModel(gid, 2)
    if gid == "SO3":
        return GroupModel(gid, 3)
    if gid == "GLn":
        if not n or n < 1:
            raise ValueError("GLn needs a positive matrix size n")
        return GroupModel("GLn", int(n))
    raise ValueError(f"unknown group id {gid!r}; known: SO2, U1, SO3, GLn")
