"""Markdown and CSV renderings of dataset, evaluation, statistics and drift tables.

Ratios are printed with two decimals and counts as integers (one decimal when
they are repeat means). Machine-readable JSON elsewhere keeps full precision.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .diff import EvaluationDiff, SnapshotDiff
from .evaluation import TOTAL, MetricRow
from .groundtruth import EcosystemStats, SnapshotStats
from .model import ECOSYSTEMS
from .stats import OmnibusResult, PairwiseComparison


@dataclass
class Table:
    name: str
    title: str
    headers: list[str]
    rows: list[list[str]] = field(default_factory=list)
    legend: str = ""

    def to_markdown(self) -> str:
        out = [f"### {self.title}", "", "| " + " | ".join(self.headers) + " |",
               "|" + "|".join("---" for _ in self.headers) + "|"]
        out += ["| " + " | ".join(r) + " |" for r in self.rows]
        if self.legend:
            out += ["", self.legend]
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.headers)
        writer.writerows(self.rows)
        return buf.getvalue()


def fmt_ratio(value: Optional[float], digits: int = 2) -> str:
    return "--" if value is None else f"{value:.{digits}f}"


def fmt_count(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:.1f}"


def fmt_signed(value: Optional[float], digits: int = 0) -> str:
    if value is None:
        return "--"
    if digits == 0:
        value = int(round(value))
        return "0" if value == 0 else f"{value:+d}"
    return f"{value:+.{digits}f}"


def fmt_pct(percent: float) -> str:
    return f"{percent:.1f}%"


def fmt_p(value: float) -> str:
    return "<0.001" if value < 0.001 else f"{value:.3f}"


# ---------------------------------------------------------------- dataset

def dataset_table(stats: SnapshotStats) -> Table:
    t = Table("dataset", "Per-ecosystem ground-truth statistics",
              ["Eco", "Comp.", "OSV", "CVE-F.", "CVEs", "Comp./OSV", "CVE-F./OSV", "V-Share", "C-Share"],
              legend="CVEs in the TOTAL row are the sum of the per-ecosystem counts "
                     f"({stats.global_distinct_cves} distinct across ecosystems).")

    def line(r: EcosystemStats) -> list[str]:
        return [r.ecosystem, str(r.unique_components), str(r.osv_entries), str(r.cve_backed_findings),
                str(r.distinct_cves), fmt_ratio(r.comp_per_osv), fmt_ratio(r.cvef_per_osv),
                fmt_pct(r.v_share), fmt_pct(r.c_share)]

    t.rows = [line(r) for r in stats.rows] + [line(stats.total)]
    return t


def frequency_table(stats: SnapshotStats) -> Table:
    t = Table("frequency", "Component and component-version frequency statistics",
              ["Eco", "Max-C", "Avg-C", "Min-C", "Med-C", "Max-CV", "Avg-CV", "Min-CV", "Med-CV"],
              legend="C = entries per component, CV = entries per component version.")
    for r in (*stats.rows, stats.total):
        t.rows.append([r.ecosystem, str(r.max_c), fmt_ratio(r.avg_c), str(r.min_c), fmt_ratio(r.med_c),
                       str(r.max_cv), fmt_ratio(r.avg_cv), str(r.min_cv), fmt_ratio(r.med_cv)])
    return t


# ---------------------------------------------------------------- evaluation

def results_table(rows: Sequence[MetricRow], tool_order: Optional[Sequence[str]] = None) -> Table:
    t = Table("results", "Per-ecosystem evaluation results",
              ["Tool", "Ecosystem", "Components", "Vulnerabilities", "CVEs", "TP", "FP_GT", "FN", "Recall",
               "Overlap"],
              legend="TOTAL recall and overlap are unweighted means of the ecosystem rows.")
    tools = list(tool_order) if tool_order else sorted({r.tool for r in rows})
    for tool in tools:
        for r in (r for r in rows if r.tool == tool):
            t.rows.append([tool, r.ecosystem, str(r.components), str(r.vulnerabilities), str(r.cves),
                           fmt_count(r.tp), fmt_count(r.fp_gt), fmt_count(r.fn),
                           fmt_ratio(r.recall), fmt_ratio(r.overlap)])
    return t


def ecosystem_summary_table(rows: Sequence[MetricRow]) -> Table:
    t = Table("ecosystem-summary", "Ecosystem means across tools",
              ["Ecosystem", "Components", "Vulnerabilities", "mean TP", "mean FP_GT", "mean FN",
               "Mean Recall", "Mean Overlap"])
    eco_rows = []
    for eco in ECOSYSTEMS:
        group = [r for r in rows if r.ecosystem == eco.value]
        if not group:
            continue
        n = len(group)
        recalls = [r.recall for r in group if r.recall is not None]
        overlaps = [r.overlap for r in group if r.overlap is not None]
        eco_rows.append((eco.value, group[0].components, group[0].vulnerabilities,
                         sum(r.tp for r in group) / n, sum(r.fp_gt for r in group) / n,
                         sum(r.fn for r in group) / n,
                         sum(recalls) / len(recalls) if recalls else None,
                         sum(overlaps) / len(overlaps) if overlaps else None))
    for name, comps, vulns, tp, fp, fn, rec, ov in eco_rows:
        t.rows.append([name, str(comps), str(vulns), f"{tp:.1f}", f"{fp:.1f}", f"{fn:.1f}",
                       fmt_ratio(rec), fmt_ratio(ov)])
    if eco_rows:
        cols = list(zip(*eco_rows))
        k = len(eco_rows)

        def avg(values) -> Optional[float]:
            vals = [v for v in values if v is not None]
            return sum(vals) / len(vals) if vals else None

        t.rows.append(["Mean", f"{sum(cols[1]) / k:.1f}", f"{sum(cols[2]) / k:.1f}", f"{sum(cols[3]) / k:.1f}",
                       f"{sum(cols[4]) / k:.1f}", f"{sum(cols[5]) / k:.1f}", fmt_ratio(avg(cols[6])),
                       fmt_ratio(avg(cols[7]))])
    return t


def pairwise_table_report(rows: Sequence[PairwiseComparison], omnibus: Optional[OmnibusResult] = None) -> Table:
    legend = "n10: detected by Tool A only; n01: detected by Tool B only; p_adj is Holm-adjusted."
    if omnibus is not None:
        legend += f" Cochran's Q = {omnibus.q_statistic:.2f}, df = {omnibus.degrees_freedom}, p {fmt_p(omnibus.p_value)}."
    t = Table("pairwise", "Pairwise significance tests for recall differences",
              ["Tool A", "Tool B", "n10", "n01", "p", "p_adj"], legend=legend)
    for r in rows:
        t.rows.append([r.tool_a, r.tool_b, str(r.n10), str(r.n01), fmt_p(r.p_raw), fmt_p(r.p_adj)])
    return t


# ---------------------------------------------------------------- drift

def gt_change_table(diff: SnapshotDiff) -> Table:
    t = Table("gt-changes", "Ground-truth changes between two snapshots",
              ["Eco", "Removed", "Added", "Delta CVE-F.", "Delta CVEs"],
              legend="Removed: entries of the earlier snapshot absent from the later one; Added: the converse. "
                     "The TOTAL CVE delta counts distinct CVEs across ecosystems.")
    for r in (*diff.rows, diff.total):
        t.rows.append([r.ecosystem, str(r.removed), str(r.added), fmt_signed(r.delta_cve_findings),
                       fmt_signed(r.delta_distinct_cves)])
    return t


def eval_diff_overview_table(diff: EvaluationDiff) -> Table:
    t = Table("eval-diff", "Tool totals between two evaluations",
              ["Tool", "TP_0", "TP_1", "Delta TP", "FP_0", "FP_1", "Delta FP", "FN_0", "FN_1", "Delta FN",
               "Delta Recall", "Delta Overlap"],
              legend="Recall and overlap deltas are computed from the summed TOTAL counts.")
    for d in diff.totals():
        t.rows.append([d.tool, fmt_count(d.before.tp), fmt_count(d.after.tp), fmt_signed(d.delta_tp),
                       fmt_count(d.before.fp_gt), fmt_count(d.after.fp_gt), fmt_signed(d.delta_fp),
                       fmt_count(d.before.fn), fmt_count(d.after.fn), fmt_signed(d.delta_fn),
                       fmt_signed(d.delta_recall, 3), fmt_signed(d.delta_overlap, 3)])
    return t


def eval_diff_detailed_table(diff: EvaluationDiff) -> Table:
    t = Table("eval-diff-detailed", "Per-ecosystem tool deltas between two evaluations",
              ["Tool", "Eco", "TP_0", "TP_1", "Delta TP", "FP_0", "FP_1", "Delta FP", "FN_0", "FN_1", "Delta FN"])
    for d in diff.rows:
        t.rows.append([d.tool, d.ecosystem, fmt_count(d.before.tp), fmt_count(d.after.tp), fmt_signed(d.delta_tp),
                       fmt_count(d.before.fp_gt), fmt_count(d.after.fp_gt), fmt_signed(d.delta_fp),
                       fmt_count(d.before.fn), fmt_count(d.after.fn), fmt_signed(d.delta_fn)])
    return t


def gt_change_list_table(diff: SnapshotDiff) -> Table:
    t = Table("gt-change-list", "Changed ground-truth entries",
              ["Change", "Eco", "Component", "Version", "Vulnerability-ID", "CVE"])
    for change, entries in (("removed", diff.removed), ("added", diff.added)):
        for e in sorted(entries, key=lambda e: e.key):
            cves = ", ".join(sorted(c.value for c in e.cves)) or "--"
            t.rows.append([change, e.ecosystem.value, e.component.coordinate, e.version.raw, e.vuln.value, cves])
    return t


# ---------------------------------------------------------------- plot data

def scatter_csv(rows: Iterable[MetricRow]) -> str:
    """Mean recall against mean overlap per tool (TOTAL rows)."""
    t = Table("scatter", "", ["tool", "recall", "overlap"])
    for r in rows:
        if r.ecosystem == TOTAL:
            t.rows.append([r.tool, "" if r.recall is None else repr(r.recall),
                           "" if r.overlap is None else repr(r.overlap)])
    return t.to_csv()


def significance_matrix_csv(rows: Sequence[PairwiseComparison], alpha: float = 0.05) -> str:
    """Symmetric tool-by-tool grid of Holm-adjusted p values with a significance flag."""
    tools = sorted({r.tool_a for r in rows} | {r.tool_b for r in rows})
    lookup = {}
    for r in rows:
        lookup[(r.tool_a, r.tool_b)] = lookup[(r.tool_b, r.tool_a)] = r
    t = Table("significance", "", ["tool_a", "tool_b", "p_adj", "significant"])
    for a in tools:
        for b in tools:
            if a == b:
                t.rows.append([a, b, "", ""])
                continue
            r = lookup.get((a, b))
            if r is not None:
                t.rows.append([a, b, repr(r.p_adj), str(int(r.significant(alpha)))])
    return t.to_csv()
