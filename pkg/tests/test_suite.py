import json

import pytest

from divput.config import bundled, scenario_from_dict
from divput.suite import aligned_steps, run_suite


@pytest.fixture(scope="module")
def coarse_report():
    return run_suite(bundled("coarse"))


def test_coarse_report_flags_failures_without_errors(coarse_report):
    assert not coarse_report.overall
    statuses = {e.id: e.status for e in coarse_report.entries}
    assert "error" not in statuses.values()
    assert statuses["smooth_contact_pre[3.5]"] == "fail"
    assert statuses["limsup_threshold[3.5]"] == "skip"


def test_report_json_roundtrip(coarse_report):
    data = json.loads(coarse_report.to_json())
    assert data["overall"] is False
    ids = [e["id"] for e in data["entries"]]
    assert len(ids) == len(set(ids))
    assert set(coarse_report.failing()) <= set(ids)


def test_no_dividend_scenario_skips_dividend_checks():
    sc = scenario_from_dict({
        "market": {"r": 0.04, "sigma": 0.3}, "option": {"K": 100, "T": 1},
        "engine": {"grid": {"n_log": 400}, "tree_steps": 1000},
        "checks": {"mc_paths": 20000},
    })
    rep = run_suite(sc)
    st = {e.id: e.status for e in rep.entries}
    for cid in ("jump_condition", "asymptotic_slope", "segment_consistency"):
        assert st[cid] == "skip"
    for cid in ("surface_invariants", "perpetual_lower_bound", "smooth_contact_final",
                "cross_engine_tree", "mc_agreement", "pde_residual_decay"):
        assert st[cid] == "pass", cid


def test_aligned_steps():
    assert aligned_steps(4.0, 0.0, (3.5,), 50) == 56
    assert aligned_steps(1.0, 0.0, (), 50) == 50
