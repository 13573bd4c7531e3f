import json
import math

import pandas as pd
import pytest

from law_reports import LawAccumulator, SuiteReport
from run_report import SCHEMA_VERSION, SUMMARY_COLUMNS, RunReport


def _law(law, *residuals, tol=1e-6):
    acc = LawAccumulator(law, tol)
    for r in residuals:
        acc.add(r, k=len(residuals))
    return acc.report()


@pytest.fixture
def report():
    rep = RunReport("check", {"name": "demo", "seed": 0})
    rep.add("b:line", SuiteReport("s", (_law("identity", 0.0), _law("inverse", 1e-9))), 0.5)
    rep.add("a:circle", _law("groupoid-composition", 1e-12), 0.25, {"why": "demo"})
    return rep


def test_duplicate_check_ids(report):
    with pytest.raises(ValueError):
        report.add("a:circle", _law("identity", 0.0))


def test_entries_are_sorted_by_check_id(report):
    data = report.to_dict()
    assert [e["id"] for e in data["entries"]] == ["a:circle", "b:line"]
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["pass"] is True
    assert data["entries"][0]["note"] == {"why": "demo"}
    assert "law" in data["entries"][0] and "suite" in data["entries"][1]


def test_failures_and_errors_fail_the_run(report):
    report.add("c:bad", _law("identity", 1.0))
    assert not report.passed
    rep = RunReport("check", {})
    rep.add_error("boom", "ValueError: no")
    assert not rep.passed
    entry = rep.to_dict()["entries"][0]
    assert entry == {"id": "boom", "pass": False, "error": "ValueError: no"}


def test_summary_frame(report):
    report.add_error("z:err", "KeyError: 'x'")
    frame = report.summary_frame()
    assert list(frame.columns) == SUMMARY_COLUMNS
    assert frame["check"].tolist() == ["a:circle", "b:line", "b:line", "z:err"]
    assert frame.iloc[-1]["law"] == "error"


def test_infinite_residuals_survive_json():
    rep = RunReport("check", {})
    rep.add("nan", _law("identity", math.nan))
    data = json.loads(rep.to_json())
    assert data["entries"][0]["law"]["max_residual"] == "inf"


def test_tables_are_concatenated(report):
    report.add_table("elements", pd.DataFrame([{"task": 0, "x": 1.0}]))
    report.add_table("elements", pd.DataFrame([{"task": 1, "x": 2.0}]))
    assert report.tables["elements"]["task"].tolist() == [0, 1]


def test_write(report, tmp_path):
    report.add_table("elements", pd.DataFrame([{"task": 0, "x": 1.0}]))
    written = report.write(tmp_path / "out")
    assert sorted(written) == ["elements", "report", "summary", "timings"]
    assert written["report"].name == "check_report.json"
    assert json.loads(written["report"].read_text())["command"] == "check"
    timings = pd.read_csv(written["timings"])
    assert timings["seconds"].tolist() == [0.25, 0.5]


def test_report_bytes_ignore_timings(report):
    other = RunReport("check", {"name": "demo", "seed": 0})
    other.add("a:circle", _law("groupoid-composition", 1e-12), 9.0, {"why": "demo"})
    other.add("b:line", SuiteReport("s", (_law("identity", 0.0), _law("inverse", 1e-9))), 3.0)
    assert other.to_json() == report.to_json()


def test_command_stem(tmp_path):
    written = RunReport("reconstruct-horizontal", {}).write(tmp_path)
    assert written["report"].name == "reconstruct_horizontal_report.json"
