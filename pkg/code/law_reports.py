"""
law_reports.py
---------------------------
Result records for law and axiom checks.

A check never raises on a law violation: it feeds residuals into a
`LawAccumulator`, which keeps the worst residual and the first
`config.WITNESS_LIMIT` failing tuples, and hands back a frozen `LawReport`.
Reports for the same law merge associatively (max residual, witness union).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import pandas as pd

import config

logger = logging.getLogger(__name__)

LAW_IDS = (
    "groupoid-composition", "identity", "inverse", "restriction", "reparametrization",
    "case-split", "round-trip", "gauge", "gauge-independence", "complementarity",
    "initial-uniqueness", "linearization", "c1-smoothness", "continuity",
    "path-independence", "horizontal-agreement", "norm-preservation", "expected-value",
    "convergence-order",
)
AXIOM_IDS = ("reparam-invariance", "canonical-inverse", "concatenation", "point-path")


def _clean(value):
    if isinstance(value, float):
        return value if math.isfinite(value) else str(value)
    return value


@dataclass(frozen=True)
class LawReport:
    law: str
    samples: int
    max_residual: float
    tolerance: float
    witnesses: tuple[dict, ...] = ()
    failures: int = 0
    margin: Optional[float] = None
    skipped: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        return self.max_residual < self.tolerance

    def to_dict(self) -> dict:
        out = {
            "law": self.law,
            "samples": self.samples,
            "max_residual": _clean(float(self.max_residual)),
            "tolerance": self.tolerance,
            "pass": self.passed,
            "failures": self.failures,
            "witnesses": [{k: _clean(v) for k, v in w.items()} for w in self.witnesses],
        }
        if self.margin is not None:
            out["margin"] = self.margin
        if self.skipped:
            out["skipped"] = True
        if self.note:
            out["note"] = self.note
        return out


def skipped_report(law: str, tolerance: float, note: str) -> LawReport:
    return LawReport(law, 0, 0.0, tolerance, skipped=True, note=note)


class LawAccumulator:
    """Collects residuals for one law; NaN residuals count as failures."""

    def __init__(self, law: str, tolerance: float, limit: int = config.WITNESS_LIMIT):
        self.law = law
        self.tolerance = tolerance
        self.limit = limit
        self.samples = 0
        self.max_residual = 0.0
        self.failures = 0
        self.witnesses: list[dict] = []

    def add(self, residual: float, **where) -> None:
        residual = float(residual)
        if math.isnan(residual):
            residual = math.inf
        self.samples += 1
        self.max_residual = max(self.max_residual, residual)
        if residual >= self.tolerance:
            self.failures += 1
            if len(self.witnesses) < self.limit:
                self.witnesses.append({**where, "residual": residual})

    def report(self, margin: Optional[float] = None, note: str = "") -> LawReport:
        rep = LawReport(
            self.law, self.samples, self.max_residual, self.tolerance,
            tuple(self.witnesses), self.failures, margin, False, note,
        )
        if not rep.passed:
            logger.warning(f"{self.law}: {self.failures}/{self.samples} samples failed, "
                           f"max residual {self.max_residual:.3g} (tol {self.tolerance:g})")
        else:
            logger.debug(f"{self.law}: {self.samples} samples, max residual {self.max_residual:.3g}")
        return rep


def merge_reports(a: LawReport, b: LawReport) -> LawReport:
    if a.law != b.law:
        raise ValueError(f"cannot merge reports for different laws ({a.law} vs {b.law})")
    if a.skipped:
        return b
    if b.skipped:
        return a
    witnesses = (a.witnesses + b.witnesses)[: config.WITNESS_LIMIT]
    margins = [m for m in (a.margin, b.margin) if m is not None]
    note = "; ".join(n for n in (a.note, b.note) if n)
    return LawReport(
        a.law, a.samples + b.samples, max(a.max_residual, b.max_residual),
        min(a.tolerance, b.tolerance), witnesses, a.failures + b.failures,
        min(margins) if margins else None, False, note,
    )


@dataclass(frozen=True)
class SuiteReport:
    name: str
    reports: tuple[LawReport, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def laws(self) -> list[str]:
        return sorted({r.law for r in self.reports})

    def by_law(self, law: str) -> LawReport:
        matching = [r for r in self.reports if r.law == law]
        if not matching:
            raise KeyError(f"suite {self.name!r} has no report for {law!r}")
        merged = matching[0]
        for r in matching[1:]:
            merged = merge_reports(merged, r)
        return merged

    def failed_laws(self) -> list[str]:
        return [law for law in self.laws if not self.by_law(law).passed]

    def with_reports(self, more: Iterable[LawReport]) -> "SuiteReport":
        return replace(self, reports=self.reports + tuple(more))

    def max_residual(self) -> float:
        return max((r.max_residual for r in self.reports if not r.skipped), default=0.0)

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "pass": self.passed,
            "laws": [self.by_law(law).to_dict() for law in self.laws],
        }

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for law in self.laws:
            r = self.by_law(law)
            rows.append({
                "suite": self.name, "law": law, "samples": r.samples,
                "max_residual": r.max_residual, "tolerance": r.tolerance,
                "pass": r.passed, "failures": r.failures,
            })
        return pd.DataFrame(rows, columns=["suite", "law", "samples", "max_residual", "tolerance", "pass", "failures"])


@dataclass(frozen=True)
class AxiomReport(SuiteReport):
    """Suite restricted to the four axioms of a parallel transport."""

    def __post_init__(self):
        unknown = {r.law for r in self.reports} - set(AXIOM_IDS)
        if unknown:
            raise ValueError(f"not axiom ids: {sorted(unknown)}")

    def axiom(self, axiom_id: str) -> LawReport:
        return self.by_law(axiom_id)
