"""Temporally controlled evaluation runs.

One attempt builds the ground truth, runs every tool ``repeats`` times against
that fixed snapshot and SBOM, then rebuilds the ground truth. The attempt is
accepted only if all executions succeeded and both builds hash identically.
Divergent repeat hashes are not a rejection reason; they are logged loudly and
recorded in the manifest for manual inspection.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Mapping, Optional

from .adapters import Adapter, ToolRunResult
from .errors import AbortError, ScaBenchError, UsageError
from .evaluation import DetectionMatrix, EvaluationReport, MetricRow, ToolEvaluation, evaluate, mean_rows
from .groundtruth import Snapshot
from .model import format_timestamp
from .sbom import emit_sbom
from .stats import OmnibusResult, PairwiseComparison, cochran_q, pairwise_table

log = logging.getLogger(__name__)

ACCEPTED = "accepted"
FAILED_EXECUTION = "failed-execution"
FAILED_DRIFT = "failed-drift"


@dataclass
class RunAttempt:
    index: int
    gt_before: Optional[str] = None
    gt_after: Optional[str] = None
    repeat_hashes: dict[str, list[str]] = field(default_factory=dict)
    status: Optional[str] = None
    error: Optional[str] = None
    divergent_tools: list[str] = field(default_factory=list)
    started_at: Optional[datetime] = None
    finished_at: Optional[datetime] = None

    def to_dict(self) -> dict:
        return {
            "attempt": self.index,
            "gt_before": self.gt_before,
            "gt_after": self.gt_after,
            "repeat_hashes": {t: list(h) for t, h in sorted(self.repeat_hashes.items())},
            "status": self.status,
            "error": self.error,
            "divergent_tools": list(self.divergent_tools),
            "started_at": format_timestamp(self.started_at),
            "finished_at": format_timestamp(self.finished_at),
        }


@dataclass
class AcceptedRun:
    snapshot: Snapshot
    sbom: bytes
    results: dict[str, list[ToolRunResult]]
    reports: list[EvaluationReport]
    rows: list[MetricRow]
    matrix: DetectionMatrix
    omnibus: Optional[OmnibusResult]
    pairwise: list[PairwiseComparison]
    manifest: dict

    def mean_report(self) -> EvaluationReport:
        grouped: dict[str, list[MetricRow]] = {}
        for row in self.rows:
            grouped.setdefault(row.tool, []).append(row)
        first = self.reports[0]
        tools = {t: ToolEvaluation(t, first.tools[t].outcome, rows) for t, rows in grouped.items()}
        return EvaluationReport(self.snapshot.digest, tools)


def _now() -> datetime:
    return datetime.now(timezone.utc)


def _manifest(status: str, attempts: list[RunAttempt], a_max: int, repeats: int,
              warnings: list[str], digest: Optional[str] = None) -> dict:
    return {
        "status": status,
        "a_max": a_max,
        "repeats": repeats,
        "snapshot_digest": digest,
        "attempts": [a.to_dict() for a in attempts],
        "warnings": list(warnings),
    }


def run_controlled(build_gt: Callable[[], Snapshot], adapters: Mapping[str, Adapter], *, a_max: int = 3,
                   repeats: int = 2, clock: Callable[[], datetime] = _now,
                   attempt_timeout: Optional[float] = None) -> AcceptedRun:
    """Run attempts until one is accepted; raise :class:`AbortError` after ``a_max`` failures.

    ``build_gt`` must construct the snapshot from scratch (fresh clients, fresh
    selection) on every call; ``adapters`` maps report labels to adapters.
    """
    if a_max < 1 or repeats < 1:
        raise UsageError("a_max and repeats must both be at least 1")
    if not adapters:
        raise UsageError("controlled run needs at least one adapter")
    attempts: list[RunAttempt] = []
    warnings: list[str] = []

    for index in range(1, a_max + 1):
        attempt = RunAttempt(index, started_at=clock())
        attempts.append(attempt)
        wall_start = time.monotonic()
        try:
            gt0 = build_gt()
            attempt.gt_before = gt0.digest
            sbom = emit_sbom(gt0)
            results: dict[str, list[ToolRunResult]] = {name: [] for name in adapters}
            for _ in range(repeats):
                for name, adapter in adapters.items():
                    results[name].append(adapter.run(gt0, sbom))
                    if attempt_timeout is not None and time.monotonic() - wall_start > attempt_timeout:
                        raise ScaBenchError(f"attempt exceeded {attempt_timeout}s")
            attempt.repeat_hashes = {n: [r.result_hash for r in rs] for n, rs in results.items()}
            gt1 = build_gt()
            attempt.gt_after = gt1.digest
        except ScaBenchError as exc:
            attempt.status = FAILED_EXECUTION
            attempt.error = f"{exc.kind}: {exc}"
            attempt.finished_at = clock()
            log.warning("attempt %d failed during execution: %s", index, attempt.error)
            continue

        if attempt.gt_before != attempt.gt_after:
            attempt.status = FAILED_DRIFT
            attempt.finished_at = clock()
            log.warning("attempt %d rejected: ground truth drifted (%s -> %s)", index,
                        attempt.gt_before[:12], attempt.gt_after[:12])
            continue

        for name, hashes in attempt.repeat_hashes.items():
            if len(set(hashes)) > 1:
                attempt.divergent_tools.append(name)
                message = f"{name}: repeat results differ ({', '.join(h[:12] for h in hashes)}); inspect manually"
                warnings.append(message)
                log.warning("REPEAT DIVERGENCE %s", message)

        attempt.status = ACCEPTED
        attempt.finished_at = clock()
        reports = [
            evaluate(gt0, {name: results[name][r].findings for name in adapters})
            for r in range(repeats)
        ]
        tool_order = sorted(adapters)
        rows = mean_rows([[row for t in tool_order for row in rep.tools[t].rows] for rep in reports])
        matrix = reports[0].matrix(gt0, repeat=0)
        for r in range(1, repeats):
            matrix = matrix.concat(reports[r].matrix(gt0, repeat=r))
        omnibus = cochran_q(matrix) if len(matrix.tools) >= 2 else None
        pairwise = pairwise_table(matrix) if len(matrix.tools) >= 2 else []
        manifest = _manifest(ACCEPTED, attempts, a_max, repeats, warnings, gt0.digest)
        return AcceptedRun(gt0, sbom, results, reports, rows, matrix, omnibus, pairwise, manifest)

    raise AbortError(f"no attempt accepted within {a_max} attempts",
                     _manifest("aborted", attempts, a_max, repeats, warnings))
