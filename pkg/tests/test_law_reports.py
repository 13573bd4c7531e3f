import math

import hypothesis
import hypothesis.strategies as strat
import pytest

from law_reports import AxiomReport, LawAccumulator, LawReport, SuiteReport, merge_reports, skipped_report

residuals = strat.lists(strat.floats(min_value=0.0, max_value=1.0, allow_nan=False), max_size=20)


def _report(law, values, tol=0.5):
    acc = LawAccumulator(law, tol, limit=3)
    for i, r in enumerate(values):
        acc.add(r, i=i)
    return acc.report()


def test_accumulator_keeps_worst_and_witnesses():
    rep = _report("inverse", [0.1, 0.7, 0.2, 0.9, 0.8, 0.6])
    assert rep.max_residual == 0.9
    assert rep.failures == 4
    assert [w["i"] for w in rep.witnesses] == [1, 3, 4]
    assert not rep.passed


def test_nan_residual_fails():
    rep = _report("identity", [0.0, math.nan])
    assert rep.max_residual == math.inf
    assert not rep.passed
    assert rep.to_dict()["max_residual"] == "inf"


def test_empty_report_passes():
    assert _report("identity", []).passed


def test_skipped_reports_pass_and_merge_away():
    skipped = skipped_report("continuity", 1e-3, "finite fibres are discrete")
    real = _report("continuity", [0.9])
    assert skipped.passed
    assert merge_reports(skipped, real) == real
    assert merge_reports(real, skipped) == real


@hypothesis.given(residuals, residuals, residuals)
def test_merge_is_associative(a, b, c):
    ra, rb, rc = _report("gauge", a), _report("gauge", b), _report("gauge", c)
    left = merge_reports(merge_reports(ra, rb), rc)
    right = merge_reports(ra, merge_reports(rb, rc))
    assert left.samples == right.samples == len(a) + len(b) + len(c)
    assert left.max_residual == right.max_residual
    assert left.failures == right.failures
    assert left.passed == right.passed


def test_merge_refuses_different_laws():
    with pytest.raises(ValueError):
        merge_reports(_report("gauge", [0.1]), _report("inverse", [0.1]))


def test_suite_groups_by_law():
    suite = SuiteReport("s", (_report("inverse", [0.1]), _report("identity", [0.2]), _report("inverse", [0.7])))
    assert suite.laws == ["identity", "inverse"]
    assert suite.failed_laws() == ["inverse"]
    assert suite.by_law("inverse").samples == 2
    assert suite.max_residual() == 0.7
    frame = suite.to_frame()
    assert list(frame["law"]) == ["identity", "inverse"]
    assert list(frame["pass"]) == [True, False]
    with pytest.raises(KeyError):
        suite.by_law("gauge")


def test_axiom_report_only_holds_axioms():
    AxiomReport("ok", (_report("point-path", [0.0]),))
    with pytest.raises(ValueError):
        AxiomReport("bad", (_report("inverse", [0.0]),))


def test_margin_is_reported():
    acc = LawAccumulator("complementarity", 0.9)
    acc.add(0.3)
    rep = acc.report(margin=0.7)
    assert rep.passed
    assert rep.to_dict()["margin"] == 0.7
    assert isinstance(rep, LawReport)
