"""Matching findings against a snapshot, metric rows and detection vectors."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError, UsageError
from .groundtruth import Snapshot
from .model import (
    ECOSYSTEMS,
    Basis,
    Ecosystem,
    GroundTruthEntry,
    NormalizedFinding,
    canonical_json,
    dedupe_findings,
    sort_entries,
)
from .versions import parse_range, parse_version, satisfies

TOTAL = "TOTAL"


@dataclass(frozen=True)
class MatchOutcome:
    tp: frozenset[GroundTruthEntry]
    fp_gt: frozenset[NormalizedFinding]
    fn: frozenset[GroundTruthEntry]
    # Matched findings per true-positive entry key, and how the entry was credited.
    matches: Mapping[tuple, tuple[NormalizedFinding, ...]] = field(default_factory=dict)
    basis: Mapping[tuple, Basis] = field(default_factory=dict)


def finding_matches(entry: GroundTruthEntry, finding: NormalizedFinding) -> Optional[Basis]:
    """How ``finding`` credits ``entry``, or None when it does not."""
    if finding.ecosystem is not entry.ecosystem or finding.component != entry.component:
        return None
    if not (finding.identifiers & entry.identifiers):
        return None
    if finding.version.raw == entry.version.raw:
        return Basis.EXACT
    if finding.basis is Basis.RANGE and finding.affected:
        if satisfies(entry.ecosystem, parse_version(entry.ecosystem, entry.version.raw),
                     parse_range(entry.ecosystem, finding.affected)):
            return Basis.RANGE
    return None


def _check(finding: NormalizedFinding) -> None:
    if finding.component.ecosystem is not finding.ecosystem:
        raise DataError(f"finding {finding.vuln} declares {finding.ecosystem} but its component is "
                        f"{finding.component}")


def match(gt: "Snapshot | Iterable[GroundTruthEntry]", findings: Iterable[NormalizedFinding]) -> MatchOutcome:
    entries = list(gt.entries if isinstance(gt, Snapshot) else gt)
    by_component: dict[tuple, list[GroundTruthEntry]] = defaultdict(list)
    for e in entries:
        by_component[e.component.key].append(e)

    matched: dict[tuple, list[NormalizedFinding]] = defaultdict(list)
    basis: dict[tuple, Basis] = {}
    fp = []
    for finding in dedupe_findings(findings):
        _check(finding)
        hit = False
        for entry in by_component.get(finding.component.key, ()):
            how = finding_matches(entry, finding)
            if how is None:
                continue
            hit = True
            matched[entry.key].append(finding)
            if basis.get(entry.key) is not Basis.EXACT:
                basis[entry.key] = how
        if not hit:
            fp.append(finding)

    tp = frozenset(e for e in entries if e.key in matched)
    fn = frozenset(e for e in entries if e.key not in matched)
    return MatchOutcome(tp, frozenset(fp), fn, {k: tuple(v) for k, v in matched.items()}, basis)


@dataclass(frozen=True)
class MetricRow:
    tool: str
    ecosystem: str
    components: int
    vulnerabilities: int
    cves: int
    tp: float
    fp_gt: float
    fn: float
    recall: Optional[float]
    overlap: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: float, den: float) -> Optional[float]:
    return num / den if den else None


def row_from_counts(tool: str, ecosystem: str, tp: float, fp_gt: float, fn: float, *, components: int = 0,
                    vulnerabilities: Optional[int] = None, cves: int = 0) -> MetricRow:
    return MetricRow(
        tool=tool, ecosystem=ecosystem, components=components,
        vulnerabilities=int(tp + fn) if vulnerabilities is None else vulnerabilities,
        cves=cves, tp=tp, fp_gt=fp_gt, fn=fn,
        recall=_ratio(tp, tp + fn), overlap=_ratio(tp, tp + fp_gt),
    )


def metrics(outcome: MatchOutcome, scope: "Ecosystem | str | None" = None, tool: str = "") -> MetricRow:
    """Counts and ratios for one ecosystem, or pooled over everything when ``scope`` is None."""
    eco = None if scope in (None, TOTAL) else Ecosystem.parse(scope)

    def keep(obj) -> bool:
        return eco is None or obj.ecosystem is eco

    gt = [e for e in outcome.tp | outcome.fn if keep(e)]
    tp = sum(1 for e in outcome.tp if keep(e))
    fn = sum(1 for e in outcome.fn if keep(e))
    fp = sum(1 for f in outcome.fp_gt if keep(f))
    if not tool:
        tools = {f.tool.value for f in outcome.fp_gt} | {
            f.tool.value for fs in outcome.matches.values() for f in fs
        }
        tool = tools.pop() if len(tools) == 1 else ""
    return row_from_counts(
        tool, eco.value if eco else TOTAL, tp, fp, fn,
        components=len({e.component for e in gt}),
        vulnerabilities=len(gt),
        cves=len({c.value for e in gt for c in e.cves}),
    )


def _mean(values: Iterable[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def aggregate_total(rows: Sequence[MetricRow]) -> MetricRow:
    """TOTAL row: summed counts, unweighted mean of per-ecosystem recall and overlap."""
    if not rows:
        raise UsageError("aggregate_total needs at least one ecosystem row")
    return MetricRow(
        tool=rows[0].tool,
        ecosystem=TOTAL,
        components=sum(r.components for r in rows),
        vulnerabilities=sum(r.vulnerabilities for r in rows),
        cves=sum(r.cves for r in rows),
        tp=sum(r.tp for r in rows),
        fp_gt=sum(r.fp_gt for r in rows),
        fn=sum(r.fn for r in rows),
        recall=_mean(r.recall for r in rows),
        overlap=_mean(r.overlap for r in rows),
    )


def pooled(row: MetricRow) -> tuple[Optional[float], Optional[float]]:
    """Recall and overlap recomputed from the row's summed counts."""
    return _ratio(row.tp, row.tp + row.fn), _ratio(row.tp, row.tp + row.fp_gt)


def detection_vector(gt: "Snapshot | Sequence[GroundTruthEntry]", outcome: MatchOutcome) -> np.ndarray:
    entries = gt.entries if isinstance(gt, Snapshot) else gt
    hits = {e.key for e in outcome.tp}
    return np.fromiter((1 if e.key in hits else 0 for e in entries), dtype=np.uint8, count=len(entries))


@dataclass(frozen=True)
class DetectionMatrix:
    tools: tuple[str, ...]
    instances: tuple[str, ...]
    cells: np.ndarray  # shape (len(instances), len(tools)), values 0/1

    def __post_init__(self) -> None:
        if self.cells.shape != (len(self.instances), len(self.tools)):
            raise DataError(f"detection matrix shape {self.cells.shape} does not match "
                            f"{len(self.instances)} instances x {len(self.tools)} tools")

    def column(self, tool: str) -> np.ndarray:
        return self.cells[:, self.tools.index(tool)]

    def totals(self) -> dict[str, int]:
        return {t: int(self.cells[:, i].sum()) for i, t in enumerate(self.tools)}

    @classmethod
    def from_vectors(cls, vectors: Mapping[str, np.ndarray], instances: Sequence[str]) -> "DetectionMatrix":
        tools = tuple(sorted(vectors))
        if not tools:
            return cls((), tuple(instances), np.zeros((len(instances), 0), dtype=np.uint8))
        cells = np.column_stack([np.asarray(vectors[t], dtype=np.uint8) for t in tools])
        return cls(tools, tuple(instances), cells)

    def concat(self, other: "DetectionMatrix") -> "DetectionMatrix":
        if self.tools != other.tools:
            raise UsageError("cannot concatenate matrices over different tools")
        return DetectionMatrix(self.tools, self.instances + other.instances,
                               np.vstack([self.cells, other.cells]))

    def to_csv(self) -> str:
        lines = ["instance," + ",".join(self.tools)]
        for label, row in zip(self.instances, self.cells):
            lines.append(label + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "DetectionMatrix":
        rows = [line.split(",") for line in text.splitlines() if line.strip()]
        if not rows:
            raise DataError("empty detection matrix file")
        header, body = rows[0], rows[1:]
        tools = tuple(header[1:])
        instances = tuple(r[0] for r in body)
        cells = np.array([[int(v) for v in r[1:]] for r in body], dtype=np.uint8).reshape(len(body), len(tools))
        return cls(tools, instances, cells)


def instance_label(entry: GroundTruthEntry, repeat: Optional[int] = None) -> str:
    base = "|".join([entry.ecosystem.value, entry.component.coordinate, entry.version.raw, entry.vuln.value])
    return base if repeat is None else f"r{repeat}|{base}"


# ---------------------------------------------------------------- reports

@dataclass
class ToolEvaluation:
    tool: str
    outcome: MatchOutcome
    rows: list[MetricRow]

    @property
    def total(self) -> MetricRow:
        return next(r for r in self.rows if r.ecosystem == TOTAL)

    def row(self, ecosystem: str) -> MetricRow:
        name = ecosystem if ecosystem == TOTAL else Ecosystem.parse(ecosystem).value
        return next(r for r in self.rows if r.ecosystem == name)


@dataclass
class EvaluationReport:
    snapshot_digest: str
    tools: dict[str, ToolEvaluation]

    def rows(self) -> list[MetricRow]:
        return [r for t in sorted(self.tools) for r in self.tools[t].rows]

    def matrix(self, snapshot: Snapshot, repeat: Optional[int] = None) -> DetectionMatrix:
        vectors = {t: detection_vector(snapshot, ev.outcome) for t, ev in self.tools.items()}
        labels = [instance_label(e, repeat) for e in snapshot.entries]
        return DetectionMatrix.from_vectors(vectors, labels)

    def to_dict(self) -> dict:
        return {
            "snapshot_digest": self.snapshot_digest,
            "rows": [r.to_dict() for r in self.rows()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvaluationReport":
        """Rebuild a rows-only report (outcome sets are not persisted here)."""
        grouped: dict[str, list[MetricRow]] = defaultdict(list)
        for r in data["rows"]:
            grouped[r["tool"]].append(MetricRow(**r))
        empty = MatchOutcome(frozenset(), frozenset(), frozenset())
        tools = {t: ToolEvaluation(t, empty, rows) for t, rows in grouped.items()}
        return cls(data.get("snapshot_digest", ""), tools)


def evaluate_tool(snapshot: Snapshot, findings: Iterable[NormalizedFinding], tool: str) -> ToolEvaluation:
    outcome = match(snapshot, findings)
    present = [eco for eco in ECOSYSTEMS if snapshot.by_ecosystem(eco)]
    rows = [metrics(outcome, eco, tool) for eco in present]
    if rows:
        rows.append(aggregate_total(rows))
    else:
        rows.append(metrics(outcome, None, tool))
    return ToolEvaluation(tool, outcome, rows)


def evaluate(snapshot: Snapshot, findings_by_tool: Mapping[str, Iterable[NormalizedFinding]]) -> EvaluationReport:
    tools = {str(t): evaluate_tool(snapshot, f, str(t)) for t, f in findings_by_tool.items()}
    return EvaluationReport(snapshot.digest, dict(sorted(tools.items())))


def mean_rows(runs: Sequence[Sequence[MetricRow]]) -> list[MetricRow]:
    """Element-wise mean of repeat-level rows (rows aligned by position)."""
    if not runs:
        return []
    out = []
    for group in zip(*runs):
        first = group[0]
        n = len(group)
        out.append(MetricRow(
            tool=first.tool, ecosystem=first.ecosystem, components=first.components,
            vulnerabilities=first.vulnerabilities, cves=first.cves,
            tp=sum(r.tp for r in group) / n, fp_gt=sum(r.fp_gt for r in group) / n,
            fn=sum(r.fn for r in group) / n,
            recall=_mean(r.recall for r in group), overlap=_mean(r.overlap for r in group),
        ))
    return out


def outcome_jsonl(outcome: MatchOutcome) -> str:
    """One line per classified item: tp/fn entries and fp_gt findings."""
    lines = []
    for e in sort_entries(outcome.tp):
        lines.append({"class": "tp", "basis": outcome.basis[e.key].value, "entry": e.to_dict(False),
                      "findings": [f.to_dict() for f in outcome.matches[e.key]]})
    for e in sort_entries(outcome.fn):
        lines.append({"class": "fn", "entry": e.to_dict(False)})
    for f in sorted(outcome.fp_gt, key=lambda f: f.key):
        lines.append({"class": "fp_gt", "finding": f.to_dict()})
    return "".join(canonical_json(line).decode("utf-8") + "\n" for line in lines)


def report_json(report: EvaluationReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
