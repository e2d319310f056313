import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scabench.errors import DataError, UsageError
from scabench.evaluation import (
    DetectionMatrix,
    EvaluationReport,
    aggregate_total,
    evaluate,
    match,
    mean_rows,
    metrics,
    outcome_jsonl,
    pooled,
    row_from_counts,
)
from scabench.groundtruth import Snapshot
from scabench.model import (
    Basis,
    ComponentRef,
    Ecosystem,
    GroundTruthEntry,
    NormalizedFinding,
    ToolId,
    VersionRef,
    VulnId,
    canonicalize_component,
    vuln_ids,
)

from oracles import brute_force_match

IDS = [f"CVE-2024-{i}" for i in range(6)] + [f"GHSA-{c}" for c in "abcdef"] + ["PYSEC-1", "PYSEC-2"]
COMPONENTS = ["alpha", "beta", "gamma"]
VERSIONS = [f"{a}.{b}.0" for a in range(3) for b in range(3)]


def random_instance(rng, max_gt=30, max_findings=40):
    eco = rng.choice([Ecosystem.NPM, Ecosystem.PYPI])
    gt = []
    for _ in range(rng.randint(0, max_gt)):
        comp = canonicalize_component(eco, rng.choice(COMPONENTS))
        ids = rng.sample(IDS, rng.randint(1, 3))
        gt.append(GroundTruthEntry.build(comp, rng.choice(VERSIONS), ids[0], ids[1:]))
    findings = []
    for _ in range(rng.randint(0, max_findings)):
        comp = canonicalize_component(eco, rng.choice(COMPONENTS))
        ids = rng.sample(IDS, rng.randint(1, 3))
        ranged = rng.random() < 0.4
        affected = None
        if ranged:
            clauses = [rng.choice(["<", "<=", ">", ">=", "="]) + rng.choice(VERSIONS) for _ in range(rng.randint(1, 2))]
            affected = ",".join(clauses)
        findings.append(NormalizedFinding(ToolId.TRIVY, eco, comp, VersionRef(rng.choice(VERSIONS)),
                                          VulnId.parse(ids[0]), vuln_ids(ids[1:]),
                                          Basis.RANGE if ranged else Basis.EXACT, affected))
    return Snapshot.from_entries(gt), findings


def test_match_equals_brute_force_oracle():
    rng = random.Random(2024)
    for _ in range(500):
        snap, findings = random_instance(rng)
        out = match(snap, findings)
        tp, fn, fp = brute_force_match(snap.entries, findings)
        assert {e.key for e in out.tp} == tp
        assert {e.key for e in out.fn} == fn
        assert {f.key for f in out.fp_gt} == fp
        assert len(out.tp) + len(out.fn) == len(snap)


@given(st.randoms(use_true_random=False))
def test_match_partition_property(rng):
    snap, findings = random_instance(rng, 10, 15)
    out = match(snap, findings)
    assert out.tp | out.fn == set(snap.entries) and not (out.tp & out.fn)
    assert all(out.basis[e.key] in (Basis.EXACT, Basis.RANGE) for e in out.tp)


def _entry(comp="vite", version="1.0.0", vuln="GHSA-a", aliases=()):
    return GroundTruthEntry.build(canonicalize_component("npm", comp), version, vuln, aliases)


def _finding(comp="vite", version="1.0.0", vuln="GHSA-a", aliases=(), affected=None, eco="npm"):
    return NormalizedFinding(ToolId.SNYK, Ecosystem.parse(eco), canonicalize_component(eco, comp),
                             VersionRef(version), VulnId.parse(vuln), vuln_ids(aliases),
                             Basis.RANGE if affected else Basis.EXACT, affected)


def test_alias_credit():
    out = match([_entry(vuln="GHSA-a", aliases=["CVE-2024-1"])], [_finding(vuln="CVE-2024-1")])
    assert len(out.tp) == 1 and not out.fp_gt


def test_range_credit_and_exact_preference():
    e = _entry(version="1.4.1")
    out = match([e], [_finding(version="1.0.0", affected="<1.4.2")])
    assert out.basis[e.key] is Basis.RANGE
    out = match([e], [_finding(version="1.0.0", affected="<1.4.2"), _finding(version="1.4.1")])
    assert out.basis[e.key] is Basis.EXACT


def test_one_finding_may_credit_several_entries():
    a, b = _entry(version="1.0.0"), _entry(version="1.1.0")
    out = match([a, b], [_finding(version="0.9.0", affected=">=1.0.0,<2.0.0")])
    assert len(out.tp) == 2 and not out.fp_gt


def test_misdeclared_ecosystem_is_data_error():
    bad = NormalizedFinding(ToolId.SNYK, Ecosystem.PYPI, ComponentRef(Ecosystem.NPM, "vite"),
                            VersionRef("1.0.0"), VulnId.parse("GHSA-a"))
    with pytest.raises(DataError):
        match([_entry()], [bad])


def test_empty_inputs():
    out = match([], [_finding()])
    assert not out.tp and len(out.fp_gt) == 1
    row = metrics(match([_entry()], []), "npm")
    assert (row.recall, row.overlap) == (0.0, None)


def test_row_ratios_and_zero_denominators():
    r = row_from_counts("t", "npm", 211, 60, 39)
    assert r.recall == pytest.approx(0.844) and r.overlap == pytest.approx(211 / 271)
    assert row_from_counts("t", "npm", 0, 0, 0).recall is None


@given(st.lists(st.tuples(st.integers(0, 300), st.integers(0, 300), st.integers(0, 300)), min_size=1, max_size=4))
def test_total_is_macro_mean(counts):
    rows = [row_from_counts("t", e.value, tp, fp, fn) for e, (tp, fp, fn) in zip(Ecosystem, counts)]
    total = aggregate_total(rows)
    recalls = [Fraction(tp, tp + fn) for tp, fp, fn in counts if tp + fn]
    if recalls:
        assert total.recall == pytest.approx(float(sum(recalls) / len(recalls)))
    assert total.tp == sum(c[0] for c in counts)
    rec, _ = pooled(total)
    if total.tp + total.fn:
        assert rec == pytest.approx(total.tp / (total.tp + total.fn))


def test_aggregate_needs_rows():
    with pytest.raises(UsageError):
        aggregate_total([])


def test_mean_rows_averages_repeats():
    a = [row_from_counts("t", "npm", 10, 2, 0)]
    b = [row_from_counts("t", "npm", 8, 4, 2)]
    [m] = mean_rows([a, b])
    assert (m.tp, m.fp_gt, m.fn) == (9, 3, 1)
    assert m.recall == pytest.approx((1.0 + 0.8) / 2)
    assert mean_rows([a, a]) == a


def test_evaluate_report_and_matrix(appendix_snapshots, appendix_findings):
    s0, _ = appendix_snapshots
    report = evaluate(s0, appendix_findings["s0"])
    m = report.matrix(s0)
    assert m.cells.shape == (1000, 5)
    assert m.totals() == {t: int(report.tools[t].total.tp) for t in m.tools}
    back = DetectionMatrix.from_csv(m.to_csv())
    assert back.tools == m.tools and back.instances == m.instances and np.array_equal(back.cells, m.cells)
    again = EvaluationReport.from_dict(report.to_dict())
    assert again.rows() == report.rows()


def test_matrix_concat_and_shape_checks():
    m = DetectionMatrix(("a", "b"), ("x",), np.array([[1, 0]], dtype=np.uint8))
    assert m.concat(m).cells.shape == (2, 2)
    with pytest.raises(UsageError):
        m.concat(DetectionMatrix(("a",), ("x",), np.array([[1]], dtype=np.uint8)))
    with pytest.raises(DataError):
        DetectionMatrix(("a",), ("x", "y"), np.zeros((1, 1)))


def test_outcome_lines_cover_every_item():
    out = match([_entry(), _entry(version="2.0.0")], [_finding(), _finding(vuln="GHSA-z")])
    lines = outcome_jsonl(out).splitlines()
    assert len(lines) == len(out.tp) + len(out.fn) + len(out.fp_gt) == 3
