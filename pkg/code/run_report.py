"""
run_report.py
---------------------------
What a CLI run leaves behind in its output directory:

    <command>_report.json    schema-versioned report: config echo, entries sorted by check id, summary
    <command>_summary.csv    one row per (check, law)
    <command>_<table>.csv    command-specific tables (transported elements, permutation tables, ...)
    <command>_timings.csv    wall-clock seconds per check

Timings stay out of the JSON so that the same config and seed give the same
report bytes.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from law_reports import LawReport, SuiteReport

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SUMMARY_COLUMNS = ["check", "suite", "law", "samples", "max_residual", "tolerance", "pass", "failures"]

Result = Union[SuiteReport, LawReport]


def _plain(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class RunReport:
    command: str
    config: dict
    results: dict[str, Result] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    notes: dict[str, dict] = field(default_factory=dict)

    def add(self, check_id: str, result: Result, seconds: float = 0.0, note: Optional[dict] = None) -> None:
        if check_id in self.results or check_id in self.errors:
            raise ValueError(f"duplicate check id {check_id!r}")
        self.results[check_id] = result
        self.timings[check_id] = seconds
        if note:
            self.notes[check_id] = note

    def add_error(self, check_id: str, message: str, seconds: float = 0.0) -> None:
        self.errors[check_id] = message
        self.timings[check_id] = seconds

    def add_table(self, name: str, frame: pd.DataFrame) -> None:
        if name in self.tables:
            self.tables[name] = pd.concat([self.tables[name], frame], ignore_index=True)
        else:
            self.tables[name] = frame

    @property
    def passed(self) -> bool:
        return not self.errors and all(r.passed for r in self.results.values())

    @property
    def check_ids(self) -> list[str]:
        return sorted(set(self.results) | set(self.errors))

    def entry(self, check_id: str) -> dict:
        if check_id in self.errors:
            return {"id": check_id, "pass": False, "error": self.errors[check_id]}
        result = self.results[check_id]
        out = {"id": check_id, "pass": result.passed}
        if isinstance(result, SuiteReport):
            out["suite"] = result.to_dict()
        else:
            out["law"] = result.to_dict()
        if check_id in self.notes:
            out["note"] = self.notes[check_id]
        return _plain(out)

    def summary_frame(self) -> pd.DataFrame:
        rows = []
        for check_id in self.check_ids:
            if check_id in self.errors:
                rows.append({"check": check_id, "suite": "", "law": "error", "samples": 0,
                             "max_residual": math.inf, "tolerance": math.nan, "pass": False, "failures": 1})
                continue
            result = self.results[check_id]
            suite = result if isinstance(result, SuiteReport) else SuiteReport(check_id, (result,))
            frame = suite.to_frame()
            frame.insert(0, "check", check_id)
            rows.extend(frame.to_dict("records"))
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def to_dict(self) -> dict:
        summary = self.summary_frame()
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "pass": self.passed,
            "config": _plain(self.config),
            "entries": [self.entry(c) for c in self.check_ids],
            "summary": _plain(summary.to_dict("records")),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: Union[str, Path]) -> dict[str, Path]:
        outdir = Path(out_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        stem = self.command.replace("-", "_")
        written = {}

        path = outdir / f"{stem}_report.json"
        path.write_text(self.to_json())
        written["report"] = path

        path = outdir / f"{stem}_summary.csv"
        self.summary_frame().to_csv(path, index=False)
        written["summary"] = path

        for name, frame in sorted(self.tables.items()):
            path = outdir / f"{stem}_{name}.csv"
            frame.to_csv(path, index=False)
            written[name] = path

        path = outdir / f"{stem}_timings.csv"
        timings = pd.DataFrame(
            [{"check": c, "seconds": self.timings.get(c, 0.0)} for c in self.check_ids],
            columns=["check", "seconds"],
        )
        timings.to_csv(path, index=False)
        written["timings"] = path

        logger.info(f"Wrote {len(self.check_ids)} checks ({'pass' if self.passed else 'FAIL'}) to {outdir}")
        return written
