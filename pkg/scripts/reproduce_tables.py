"""Render the dataset, evaluation, significance and drift tables from the bundled appendix fixtures.

Everything is computed offline from tests/fixtures/appendix: two snapshots of
1000 entries each and one findings file per tool and snapshot.

    python3 scripts/reproduce_tables.py [--out runs/tables]

The significance table is computed on the first snapshot evaluated twice
(two identical repeats stacked), which is how the detection matrix of a
two-repeat controlled run is laid out.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from scabench import reports  # noqa: E402
from scabench.adapters import read_findings  # noqa: E402
from scabench.diff import diff_evaluations, diff_snapshots  # noqa: E402
from scabench.evaluation import evaluate  # noqa: E402
from scabench.groundtruth import load_snapshot  # noqa: E402
from scabench.stats import cochran_q, pairwise_table  # noqa: E402

APPENDIX = ROOT / "tests" / "fixtures" / "appendix"
TOOLS = ("dtrack", "github", "oss-index", "snyk", "trivy")
TOOL_ORDER = ("snyk", "oss-index", "github", "trivy", "dtrack")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixtures", type=Path, default=APPENDIX)
    ap.add_argument("--out", type=Path, help="also write one CSV per table and report.md here")
    args = ap.parse_args(argv)

    s0 = load_snapshot(args.fixtures / "s0")
    s1 = load_snapshot(args.fixtures / "s1")
    findings = {name: {t: read_findings(args.fixtures / "findings" / name / f"{t}.jsonl") for t in TOOLS}
                for name in ("s0", "s1")}
    e0 = evaluate(s0, findings["s0"])
    e1 = evaluate(s1, findings["s1"])

    matrix = e0.matrix(s0, repeat=0).concat(e0.matrix(s0, repeat=1))
    omnibus = cochran_q(matrix)
    pairs = pairwise_table(matrix)
    gt_diff = diff_snapshots(s0, s1)
    eval_diff = diff_evaluations(e0, e1)

    tables = [
        reports.dataset_table(s0.stats),
        reports.frequency_table(s0.stats),
        reports.results_table(e0.rows(), TOOL_ORDER),
        reports.ecosystem_summary_table(e0.rows()),
        reports.pairwise_table_report(pairs, omnibus),
        reports.gt_change_table(gt_diff),
        reports.eval_diff_overview_table(eval_diff),
        reports.eval_diff_detailed_table(eval_diff),
    ]
    text = "\n".join(t.to_markdown() for t in tables)
    print(text)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        for t in tables:
            (args.out / f"{t.name}.csv").write_text(t.to_csv(), encoding="utf-8")
        (args.out / "report.md").write_text(text, encoding="utf-8")
        (args.out / "plot-scatter.csv").write_text(reports.scatter_csv(e0.rows()), encoding="utf-8")
        (args.out / "plot-significance.csv").write_text(reports.significance_matrix_csv(pairs), encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
