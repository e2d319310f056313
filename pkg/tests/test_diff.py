import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scabench.diff import diff_evaluations, diff_snapshots
from scabench.errors import UsageError
from scabench.evaluation import evaluate
from scabench.groundtruth import Snapshot
from scabench.model import Ecosystem, GroundTruthEntry, canonicalize_component


@pytest.fixture(scope="module")
def reports(appendix_snapshots, appendix_findings):
    s0, s1 = appendix_snapshots
    return evaluate(s0, appendix_findings["s0"]), evaluate(s1, appendix_findings["s1"])


def test_appendix_snapshot_diff(appendix_snapshots):
    d = diff_snapshots(*appendix_snapshots)
    got = {r.ecosystem: (r.removed, r.added, r.delta_cve_findings, r.delta_distinct_cves) for r in (*d.rows, d.total)}
    assert got == {"Maven": (0, 0, 0, 0), "npm": (20, 20, 0, 0), "NuGet": (0, 0, 0, 0),
                   "PyPI": (12, 12, 2, 1), "TOTAL": (32, 32, 2, 2)}
    assert not (d.removed & d.added)


def test_diff_of_identical_snapshots_is_empty(appendix_snapshots):
    s0, _ = appendix_snapshots
    d = diff_snapshots(s0, s0)
    assert d.empty and d.total.delta_cve_findings == 0


def test_appendix_evaluation_totals(reports):
    d = diff_evaluations(*reports)
    totals = {r.tool: (r.delta_tp, r.delta_fp, r.delta_fn) for r in d.totals()}
    assert totals["oss-index"] == (22, 3, -22)
    assert totals == {"dtrack": (1, 28, -1), "github": (1, 44, -1), "oss-index": (22, 3, -22),
                      "snyk": (3, 43, -3), "trivy": (17, 30, -17)}
    trivy = d.get("trivy", "Maven")
    assert (trivy.delta_tp, trivy.delta_fp, trivy.delta_fn) == (10, 0, -10)


def test_tp_plus_fn_tracks_ground_truth_size(reports, appendix_snapshots):
    s0, s1 = appendix_snapshots
    d = diff_evaluations(*reports)
    for r in d.rows:
        if r.ecosystem == "TOTAL":
            expected = len(s1) - len(s0)
        else:
            eco = Ecosystem.parse(r.ecosystem)
            expected = len(s1.by_ecosystem(eco)) - len(s0.by_ecosystem(eco))
        assert r.delta_tp + r.delta_fn == expected


def test_identical_evaluations_give_zero_deltas(reports):
    d = diff_evaluations(reports[0], reports[0])
    assert all(r.delta_tp == r.delta_fp == r.delta_fn == 0 for r in d.rows)
    assert all(r.delta_recall in (0.0, None) for r in d.rows)


def test_tool_set_mismatch(reports):
    e0, e1 = reports
    fewer = type(e1)(e1.snapshot_digest, {k: v for k, v in e1.tools.items() if k != "snyk"})
    with pytest.raises(UsageError):
        diff_evaluations(e0, fewer)


entries = st.lists(st.tuples(st.sampled_from(["npm", "PyPI"]), st.sampled_from(["a", "b"]),
                             st.sampled_from(["1.0.0", "2.0.0"]), st.sampled_from(["GHSA-a", "CVE-2024-1"])),
                   max_size=8)


def _snap(rows):
    return Snapshot.from_entries(GroundTruthEntry.build(canonicalize_component(e, c), v, u) for e, c, v, u in rows)


@settings(max_examples=60)
@given(entries, entries)
def test_diff_is_antisymmetric(a, b):
    s0, s1 = _snap(a), _snap(b)
    fwd, back = diff_snapshots(s0, s1), diff_snapshots(s1, s0)
    assert fwd.removed == back.added and fwd.added == back.removed
    for x, y in zip((*fwd.rows, fwd.total), (*back.rows, back.total)):
        assert (x.removed, x.added) == (y.added, y.removed)
        assert x.delta_cve_findings == -y.delta_cve_findings
        assert x.delta_distinct_cves == -y.delta_distinct_cves
    assert sum(r.removed for r in fwd.rows) == len(fwd.removed)
