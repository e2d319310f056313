import math
import random

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import binomtest

from scabench.errors import UsageError
from scabench.evaluation import DetectionMatrix
from scabench.stats import (
    chi2_logsf,
    chi2_sf,
    cochran_q,
    discordant,
    holm_adjust,
    mcnemar_exact,
    pairwise_table,
    significance_matrix,
)

from oracles import cochran_q_reference, holm_reference

# discordant counts of the ten tool pairs in the reference study
PAIRS = {
    ("oss-index", "trivy"): (12, 706), ("github", "oss-index"): (730, 62), ("oss-index", "snyk"): (58, 634),
    ("dtrack", "oss-index"): (686, 100), ("dtrack", "trivy"): (32, 140), ("snyk", "trivy"): (72, 190),
    ("github", "snyk"): (194, 102), ("dtrack", "github"): (94, 176), ("github", "trivy"): (70, 96),
    ("dtrack", "snyk"): (192, 182),
}


def test_mcnemar_reference_values():
    assert 0.637 <= mcnemar_exact(192, 182) <= 0.647
    assert mcnemar_exact(12, 706) < 0.001
    assert mcnemar_exact(70, 96) == pytest.approx(0.052, abs=0.0005)
    assert mcnemar_exact(0, 0) == 1.0
    assert mcnemar_exact(5, 5) == 1.0


@settings(max_examples=300)
@given(st.integers(0, 400), st.integers(0, 400))
def test_mcnemar_matches_binomial_test(a, b):
    if a + b == 0:
        return
    expected = binomtest(min(a, b), a + b, 0.5).pvalue
    assert mcnemar_exact(a, b) == pytest.approx(expected, rel=1e-9, abs=1e-300)
    assert mcnemar_exact(a, b) == mcnemar_exact(b, a)


def test_mcnemar_rejects_negative():
    with pytest.raises(ValueError):
        mcnemar_exact(-1, 3)


def test_holm_on_reference_pairs():
    raw = {pair: mcnemar_exact(*c) for pair, c in PAIRS.items()}
    adj = holm_adjust(raw)
    assert adj[("github", "trivy")] == pytest.approx(0.104, abs=0.001)
    assert adj[("dtrack", "snyk")] == pytest.approx(0.642, abs=0.001)
    assert sum(1 for p in adj.values() if p >= 0.05) == 2


@given(st.dictionaries(st.integers(0, 50), st.floats(0, 1), min_size=1, max_size=12))
def test_holm_properties(p):
    adj = holm_adjust(p)
    ref = holm_reference(p)
    for key in p:
        assert adj[key] == pytest.approx(ref[key])
        assert p[key] <= adj[key] <= 1.0
    ordered = sorted(p, key=lambda k: p[k])
    assert all(adj[a] <= adj[b] for a, b in zip(ordered, ordered[1:]))


def test_holm_ties_and_bounds():
    assert holm_adjust({"a": 0.01, "b": 0.01}) == {"a": 0.02, "b": 0.02}
    with pytest.raises(ValueError):
        holm_adjust({"a": 1.5})


def test_q_zero_on_identical_columns():
    rng = np.random.default_rng(1)
    col = rng.integers(0, 2, size=200)
    res = cochran_q(np.column_stack([col] * 4))
    assert res.q_statistic == 0.0 and res.p_value == 1.0 and res.degrees_freedom == 3


def test_q_degenerate_matrix():
    assert cochran_q(np.ones((5, 3))).q_statistic == 0.0
    assert cochran_q(np.zeros((5, 3))).p_value == 1.0
    with pytest.raises(UsageError):
        cochran_q(np.ones((5, 1)))


def test_q_two_tool_identity_exact():
    rng = random.Random(11)
    for _ in range(1000):
        n = rng.randint(1, 40)
        x = np.array([[rng.randint(0, 1), rng.randint(0, 1)] for _ in range(n)])
        n10, n01 = discordant(x[:, 0], x[:, 1])
        q = cochran_q(x).q_statistic
        if n10 + n01 == 0:
            assert q == 0.0
        else:
            assert q == (n10 - n01) ** 2 / (n10 + n01)


@given(arrays(np.uint8, st.tuples(st.integers(1, 30), st.integers(2, 6)), elements=st.integers(0, 1)))
def test_q_matches_textbook_formula(x):
    res = cochran_q(x)
    assert res.q_statistic == pytest.approx(cochran_q_reference(x), rel=1e-12, abs=1e-12)
    assert res.q_statistic >= 0 and 0.0 <= res.p_value <= 1.0


@pytest.mark.parametrize("df", range(1, 11))
def test_chi2_tail_against_mpmath(df):
    mpmath.mp.dps = 50
    for x in [1e-6, 0.01, 0.5, 1.0, df - 0.5, df, df + 0.5, 2.0 * df, 10.0, 37.0, 100.0, 400.0, 1452.81]:
        exact = mpmath.gammainc(mpmath.mpf(df) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True)
        assert float(mpmath.log(exact)) == pytest.approx(chi2_logsf(x, df), rel=1e-10)
        if exact > mpmath.mpf("1e-300"):
            assert chi2_sf(x, df) == pytest.approx(float(exact), rel=1e-10)


def test_chi2_edges():
    assert chi2_sf(0.0, 3) == 1.0
    with pytest.raises(ValueError):
        chi2_sf(1.0, 0)
    assert math.isfinite(chi2_logsf(1e5, 4))


def _matrix(cols):
    tools = tuple(sorted(cols))
    cells = np.column_stack([np.asarray(cols[t], dtype=np.uint8) for t in tools])
    return DetectionMatrix(tools, tuple(str(i) for i in range(cells.shape[0])), cells)


def test_pairwise_table_shape_and_order():
    rng = np.random.default_rng(5)
    m = _matrix({t: rng.integers(0, 2, 300) for t in ("a", "b", "c", "d")})
    rows = pairwise_table(m)
    assert len(rows) == 6
    assert [r.p_raw for r in rows] == sorted(r.p_raw for r in rows)
    for r in rows:
        assert (r.n10, r.n01) == discordant(m.column(r.tool_a), m.column(r.tool_b))
    flat = significance_matrix(rows)
    assert all(f["significant"] == (f["p_adj"] < 0.05) for f in flat)


def test_pairwise_needs_two_tools():
    with pytest.raises(UsageError):
        pairwise_table(_matrix({"a": [1, 0]}))


def test_appendix_matrix_statistics(appendix_snapshots, appendix_findings):
    from scabench.evaluation import evaluate

    s0, _ = appendix_snapshots
    m = evaluate(s0, appendix_findings["s0"]).matrix(s0)
    doubled = m.concat(m)
    omnibus = cochran_q(doubled)
    assert omnibus.q_statistic == pytest.approx(1452.81, abs=0.005)
    assert omnibus.degrees_freedom == 4 and omnibus.p_value < 0.001
    rows = {(r.tool_a, r.tool_b): r for r in pairwise_table(doubled)}
    for pair, (n10, n01) in PAIRS.items():
        r = rows[pair] if pair in rows else rows[pair[::-1]]
        got = (r.n10, r.n01) if pair in rows else (r.n01, r.n10)
        assert got == (n10, n01)
