import csv
import io

import pytest

from scabench import reports
from scabench.diff import diff_evaluations, diff_snapshots
from scabench.evaluation import evaluate, row_from_counts
from scabench.stats import cochran_q, pairwise_table


@pytest.fixture(scope="module")
def reps(appendix_snapshots, appendix_findings):
    s0, s1 = appendix_snapshots
    return evaluate(s0, appendix_findings["s0"]), evaluate(s1, appendix_findings["s1"])


@pytest.mark.parametrize("value, text", [(None, "--"), (0.8449, "0.84"), (1.0, "1.00")])
def test_fmt_ratio(value, text):
    assert reports.fmt_ratio(value) == text


def test_formatters():
    assert reports.fmt_count(3.0) == "3" and reports.fmt_count(2.5) == "2.5"
    assert reports.fmt_signed(22) == "+22" and reports.fmt_signed(-22) == "-22" and reports.fmt_signed(0) == "0"
    assert reports.fmt_signed(0.0046, 3) == "+0.005"
    assert reports.fmt_signed(-0.0113, 3) == "-0.011"
    assert reports.fmt_pct(25.0) == "25.0%"
    assert reports.fmt_p(0.0004) == "<0.001" and reports.fmt_p(0.104) == "0.104"


def test_table_renderings():
    t = reports.Table("x", "Title", ["a", "b"], [["1", "with,comma"]], legend="note")
    md = t.to_markdown()
    assert md.splitlines()[:4] == ["### Title", "", "| a | b |", "|---|---|"]
    assert md.rstrip().endswith("note")
    assert list(csv.reader(io.StringIO(t.to_csv()))) == [["a", "b"], ["1", "with,comma"]]


def test_results_table_layout(reps):
    rows = reps[0].rows()
    t = reports.results_table(rows, ["snyk", "oss-index", "github", "trivy", "dtrack"])
    assert [r[0] for r in t.rows[::5]] == ["snyk", "oss-index", "github", "trivy", "dtrack"]
    oss_total = next(r for r in t.rows if r[0] == "oss-index" and r[1] == "TOTAL")
    assert oss_total[-2:] == ["0.61", "0.80"]


def test_ecosystem_summary(reps):
    t = reports.ecosystem_summary_table(reps[0].rows())
    assert [r[0] for r in t.rows] == ["Maven", "npm", "NuGet", "PyPI", "Mean"]
    assert all(len(r) == len(t.headers) for r in t.rows)


def test_dataset_table(appendix_snapshots):
    t = reports.dataset_table(appendix_snapshots[0].stats)
    assert [r[0] for r in t.rows] == ["Maven", "npm", "NuGet", "PyPI", "TOTAL"]
    assert all(r[7] == "25.0%" for r in t.rows[:4])
    assert len(reports.frequency_table(appendix_snapshots[0].stats).rows) == 5


def test_pairwise_and_significance(reps, appendix_snapshots):
    m = reps[0].matrix(appendix_snapshots[0])
    pairs = pairwise_table(m)
    t = reports.pairwise_table_report(pairs, cochran_q(m))
    assert len(t.rows) == 10 and "Cochran's Q" in t.legend
    grid = list(csv.DictReader(io.StringIO(reports.significance_matrix_csv(pairs))))
    assert len(grid) == 25
    cell = next(g for g in grid if g["tool_a"] == "github" and g["tool_b"] == "trivy")
    mirror = next(g for g in grid if g["tool_a"] == "trivy" and g["tool_b"] == "github")
    assert cell["p_adj"] == mirror["p_adj"]


def test_drift_tables(reps, appendix_snapshots):
    d = diff_snapshots(*appendix_snapshots)
    t = reports.gt_change_table(d)
    assert t.rows[-1] == ["TOTAL", "32", "32", "+2", "+2"]
    assert len(reports.gt_change_list_table(d).rows) == 64
    ev = diff_evaluations(*reps)
    over = {r[0]: r for r in reports.eval_diff_overview_table(ev).rows}
    assert over["oss-index"][3] == "+22" and over["oss-index"][6] == "+3" and over["oss-index"][9] == "-22"
    assert len(reports.eval_diff_detailed_table(ev).rows) == 25


def test_scatter_uses_total_rows():
    rows = [row_from_counts("a", "npm", 1, 1, 1), row_from_counts("a", "TOTAL", 1, 1, 1)]
    lines = reports.scatter_csv(rows).splitlines()
    assert lines[0] == "tool,recall,overlap" and len(lines) == 2
