"""Structural diff of two snapshots and signed deltas between two evaluations."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from .errors import UsageError
from .evaluation import TOTAL, EvaluationReport, MetricRow, pooled
from .groundtruth import Snapshot
from .model import ECOSYSTEMS, GroundTruthEntry, sort_entries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EcosystemChange:
    ecosystem: str
    removed: int
    added: int
    delta_cve_findings: int
    delta_distinct_cves: int


@dataclass(frozen=True)
class SnapshotDiff:
    removed: frozenset[GroundTruthEntry]
    added: frozenset[GroundTruthEntry]
    rows: tuple[EcosystemChange, ...]
    total: EcosystemChange

    @property
    def empty(self) -> bool:
        return not self.removed and not self.added

    def row(self, ecosystem: str) -> EcosystemChange:
        return next(r for r in (*self.rows, self.total) if r.ecosystem.lower() == ecosystem.lower())

    def to_dict(self) -> dict:
        return {
            "rows": [vars(r) for r in (*self.rows, self.total)],
            "removed": [e.to_dict(False) for e in sort_entries(self.removed)],
            "added": [e.to_dict(False) for e in sort_entries(self.added)],
        }


def _stat(snapshot: Snapshot, ecosystem: str, name: str) -> int:
    try:
        return int(getattr(snapshot.stats.row(ecosystem), name))
    except KeyError:
        return 0


def diff_snapshots(s0: Snapshot, s1: Snapshot) -> SnapshotDiff:
    """Exact-tuple set difference; an identifier swap on one version shows as one removal plus one addition."""
    if s0.config is not None and s1.config is not None and s0.config.to_dict() != s1.config.to_dict():
        log.warning("snapshots were built with different configurations; the diff mixes data and parameter changes")
    k0 = {e.key: e for e in s0.entries}
    k1 = {e.key: e for e in s1.entries}
    removed = frozenset(k0[k] for k in k0.keys() - k1.keys())
    added = frozenset(k1[k] for k in k1.keys() - k0.keys())
    rows = []
    for eco in ECOSYSTEMS:
        name = eco.value
        rows.append(EcosystemChange(
            ecosystem=name,
            removed=sum(1 for e in removed if e.ecosystem is eco),
            added=sum(1 for e in added if e.ecosystem is eco),
            delta_cve_findings=_stat(s1, name, "cve_backed_findings") - _stat(s0, name, "cve_backed_findings"),
            delta_distinct_cves=_stat(s1, name, "distinct_cves") - _stat(s0, name, "distinct_cves"),
        ))
    total = EcosystemChange(
        ecosystem=TOTAL,
        removed=len(removed),
        added=len(added),
        delta_cve_findings=sum(r.delta_cve_findings for r in rows),
        # a CVE may appear in several ecosystems, so the total uses the global distinct count
        delta_distinct_cves=s1.stats.global_distinct_cves - s0.stats.global_distinct_cves,
    )
    return SnapshotDiff(removed, added, tuple(rows), total)


@dataclass(frozen=True)
class RowDelta:
    tool: str
    ecosystem: str
    before: MetricRow
    after: MetricRow
    delta_tp: float
    delta_fp: float
    delta_fn: float
    delta_recall: Optional[float]
    delta_overlap: Optional[float]

    def to_dict(self) -> dict:
        return {
            "tool": self.tool,
            "ecosystem": self.ecosystem,
            "tp_before": self.before.tp, "tp_after": self.after.tp, "delta_tp": self.delta_tp,
            "fp_before": self.before.fp_gt, "fp_after": self.after.fp_gt, "delta_fp": self.delta_fp,
            "fn_before": self.before.fn, "fn_after": self.after.fn, "delta_fn": self.delta_fn,
            "delta_recall": self.delta_recall, "delta_overlap": self.delta_overlap,
        }


@dataclass(frozen=True)
class EvaluationDiff:
    rows: tuple[RowDelta, ...]

    def get(self, tool: str, ecosystem: str) -> RowDelta:
        return next(r for r in self.rows if r.tool == tool and r.ecosystem.lower() == ecosystem.lower())

    def totals(self) -> list[RowDelta]:
        return [r for r in self.rows if r.ecosystem == TOTAL]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}


def _sub(a: Optional[float], b: Optional[float]) -> Optional[float]:
    return None if a is None or b is None else a - b


def _delta(before: MetricRow, after: MetricRow) -> RowDelta:
    if before.ecosystem == TOTAL:
        # whole-run deltas are taken on ratios recomputed from the summed counts
        r0, o0 = pooled(before)
        r1, o1 = pooled(after)
    else:
        r0, o0, r1, o1 = before.recall, before.overlap, after.recall, after.overlap
    return RowDelta(
        tool=before.tool, ecosystem=before.ecosystem, before=before, after=after,
        delta_tp=after.tp - before.tp, delta_fp=after.fp_gt - before.fp_gt, delta_fn=after.fn - before.fn,
        delta_recall=_sub(r1, r0), delta_overlap=_sub(o1, o0),
    )


def diff_evaluations(e0: EvaluationReport, e1: EvaluationReport) -> EvaluationDiff:
    if set(e0.tools) != set(e1.tools):
        raise UsageError(f"evaluations cover different tools: {sorted(e0.tools)} vs {sorted(e1.tools)}")
    out = []
    for tool in sorted(e0.tools):
        before = {r.ecosystem: r for r in e0.tools[tool].rows}
        after = {r.ecosystem: r for r in e1.tools[tool].rows}
        if set(before) != set(after):
            raise UsageError(f"{tool}: evaluations cover different ecosystems")
        order = [eco.value for eco in ECOSYSTEMS if eco.value in before] + [TOTAL]
        out.extend(_delta(before[name], after[name]) for name in order if name in before)
    return EvaluationDiff(tuple(out))
