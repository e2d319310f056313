"""Command-line entry point.

Every module error ends the process with a non-zero status and a JSON object
``{"error": <kind>, "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import reports
from .adapters import AdapterConfig, ToolRunResult, make_adapter, read_findings
from .clients import OSV_API, OsvClient, RegistryClient
from .config import RunConfig, config_from_dict, load_config
from .controller import run_controlled
from .diff import diff_evaluations, diff_snapshots
from .errors import AbortError, ScaBenchError, UsageError
from .evaluation import DetectionMatrix, EvaluationReport, evaluate, outcome_jsonl, report_json
from .groundtruth import Snapshot, build_snapshot, load_snapshot, save_snapshot
from .model import ToolId, canonical_json
from .sbom import emit_sbom, sbom_filename
from .stats import OmnibusResult, PairwiseComparison, cochran_q, pairwise_table

log = logging.getLogger("scabench")

CONFIG_NAMES = ("config.toml", "config.json")


# ---------------------------------------------------------------- helpers

def _now() -> datetime:
    return datetime.now(timezone.utc)


def _write(path: Path, data: "str | bytes") -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data, encoding="utf-8")
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _run_dir(cfg_out: str, digest: str, explicit: Optional[str]) -> Path:
    if explicit:
        return Path(explicit)
    stamp = _now().strftime("%Y%m%dT%H%M%SZ")
    return Path(cfg_out) / f"{stamp}-{digest[:12]}"


def _load_run_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        found = None
        if getattr(args, "replay", None):
            found = next((Path(args.replay) / n for n in CONFIG_NAMES if (Path(args.replay) / n).exists()), None)
        cfg = load_config(found) if found else config_from_dict({})
    if getattr(args, "replay", None):
        cfg = cfg.with_replay(args.replay)
    return cfg


def build_from_config(cfg: RunConfig, created_at: Optional[datetime] = None) -> Snapshot:
    """Fresh transport and clients on every call, so repeated builds share no cached state."""
    transport = cfg.transport.make()
    osv = OsvClient(transport, base_url=cfg.osv_url or OSV_API)
    registry = RegistryClient(transport)
    return build_snapshot(cfg.build, osv, registry, created_at or _now())


def _save_tool_result(directory: Path, result: ToolRunResult) -> None:
    for name, data in sorted(result.raw_artifacts.items()):
        _write(directory / "raw" / name, data)
    _write(directory / "findings.jsonl", result.findings_jsonl())
    _write(directory / "result.json", _dump({
        "tool": result.tool.value,
        "result_hash": result.result_hash,
        "raw_count": result.raw_count,
        "normalized": len(result.findings),
        "skipped": [{"reason": s.reason, "detail": s.detail} for s in result.skipped],
        "out_of_input": sum(1 for f in result.findings if not f.in_input),
    }))


def _save_evaluation(directory: Path, snapshot: Snapshot, report: EvaluationReport) -> DetectionMatrix:
    _write(directory / "evaluation.json", report_json(report))
    for tool, ev in report.tools.items():
        _write(directory / "outcomes" / f"{tool}.jsonl", outcome_jsonl(ev.outcome))
    matrix = report.matrix(snapshot)
    _write(directory / "matrix.csv", matrix.to_csv())
    return matrix


def _stats_payload(matrix: DetectionMatrix) -> dict:
    omnibus = cochran_q(matrix)
    pairs = pairwise_table(matrix)
    return {"instances": len(matrix.instances), "tools": list(matrix.tools),
            "omnibus": omnibus.to_dict(), "pairwise": [p.to_dict() for p in pairs]}


def _write_tables(directory: Path, tables: Sequence[reports.Table]) -> None:
    md = []
    for t in tables:
        _write(directory / f"{t.name}.csv", t.to_csv())
        md.append(t.to_markdown())
    _write(directory / "report.md", "\n".join(md))


# ---------------------------------------------------------------- commands

def cmd_build_gt(args) -> dict:
    cfg = _load_run_config(args)
    snapshot = build_from_config(cfg)
    out = _run_dir(cfg.output_dir, snapshot.digest, args.out)
    save_snapshot(snapshot, out / "snapshot")
    _write_tables(out / "reports", [reports.dataset_table(snapshot.stats), reports.frequency_table(snapshot.stats)])
    return {"digest": snapshot.digest, "entries": len(snapshot), "path": str(out)}


def cmd_emit_sbom(args) -> dict:
    snapshot = load_snapshot(args.snapshot)
    target = Path(args.out) if args.out else Path(args.snapshot) / sbom_filename(snapshot)
    _write(target, emit_sbom(snapshot))
    return {"digest": snapshot.digest, "path": str(target)}


def _adapter_config(args, cfg: RunConfig) -> AdapterConfig:
    tool = ToolId.parse(args.tool)
    for ac in cfg.adapters:
        if ac.tool is tool and (args.label is None or ac.name == args.label):
            chosen = ac
            break
    else:
        chosen = AdapterConfig(tool=tool, label=args.label)
    if args.findings:
        chosen = replace(chosen, findings_path=args.findings)
    return chosen


def cmd_run_tool(args) -> dict:
    cfg = _load_run_config(args)
    snapshot = load_snapshot(args.snapshot)
    ac = _adapter_config(args, cfg)
    sbom = Path(args.sbom).read_bytes() if args.sbom else None
    result = make_adapter(ac, cfg.transport.make()).run(snapshot, sbom)
    out = Path(args.out) if args.out else _run_dir(cfg.output_dir, snapshot.digest, None) / "tools" / ac.name
    _save_tool_result(out, result)
    return {"tool": ac.name, "result_hash": result.result_hash, "findings": len(result.findings),
            "skipped": len(result.skipped), "path": str(out)}


def _parse_findings_args(values: Sequence[str]) -> dict[str, list]:
    out = {}
    for spec in values:
        if "=" not in spec:
            raise UsageError(f"--findings expects TOOL=PATH, got {spec!r}")
        tool, path = spec.split("=", 1)
        out[tool] = read_findings(path)
    return out


def cmd_evaluate(args) -> dict:
    snapshot = load_snapshot(args.snapshot)
    report = evaluate(snapshot, _parse_findings_args(args.findings))
    out = Path(args.out) if args.out else Path("runs") / f"eval-{snapshot.digest[:12]}"
    matrix = _save_evaluation(out, snapshot, report)
    payload = {"digest": snapshot.digest, "tools": sorted(report.tools), "path": str(out)}
    if len(matrix.tools) >= 2:
        _write(out / "stats.json", _dump(_stats_payload(matrix)))
    return payload


def cmd_stats_compare(args) -> dict:
    matrix = DetectionMatrix.from_csv(Path(args.matrix).read_text(encoding="utf-8"))
    payload = _stats_payload(matrix)
    if args.out:
        _write(Path(args.out), _dump(payload))
    return payload


def cmd_diff_gt(args) -> dict:
    diff = diff_snapshots(load_snapshot(args.before), load_snapshot(args.after))
    if args.out:
        out = Path(args.out)
        _write(out / "gt-diff.json", _dump(diff.to_dict()))
        _write_tables(out, [reports.gt_change_table(diff), reports.gt_change_list_table(diff)])
    return {"rows": diff.to_dict()["rows"]}


def _load_report(path: str) -> EvaluationReport:
    return EvaluationReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def cmd_diff_eval(args) -> dict:
    diff = diff_evaluations(_load_report(args.before), _load_report(args.after))
    if args.out:
        out = Path(args.out)
        _write(out / "eval-diff.json", _dump(diff.to_dict()))
        _write_tables(out, [reports.eval_diff_overview_table(diff), reports.eval_diff_detailed_table(diff)])
    return {"totals": [d.to_dict() for d in diff.totals()]}


def cmd_controlled_run(args) -> dict:
    cfg = _load_run_config(args)
    if not cfg.adapters:
        raise UsageError("controlled-run needs at least one [[adapters]] entry")
    transport = cfg.transport.make()
    adapters = {ac.name: make_adapter(ac, transport) for ac in cfg.adapters}
    try:
        run = run_controlled(lambda: build_from_config(cfg), adapters, a_max=args.a_max or cfg.a_max,
                             repeats=args.repeats or cfg.repeats)
    except AbortError as exc:
        if args.out:
            _write(Path(args.out) / "manifest.json", _dump(exc.manifest))
        raise
    out = _run_dir(cfg.output_dir, run.snapshot.digest, args.out)
    save_snapshot(run.snapshot, out / "snapshot")
    _write(out / sbom_filename(run.snapshot), run.sbom)
    for name, results in run.results.items():
        for r, result in enumerate(results):
            _save_tool_result(out / "tools" / name / f"repeat-{r}", result)
    mean = run.mean_report()
    _write(out / "evaluation" / "evaluation.json", report_json(mean))
    _write(out / "evaluation" / "matrix.csv", run.matrix.to_csv())
    tables = [reports.dataset_table(run.snapshot.stats), reports.frequency_table(run.snapshot.stats),
              reports.results_table(run.rows), reports.ecosystem_summary_table(run.rows)]
    if run.omnibus is not None:
        _write(out / "evaluation" / "stats.json", _dump({
            "instances": len(run.matrix.instances), "tools": list(run.matrix.tools),
            "omnibus": run.omnibus.to_dict(), "pairwise": [p.to_dict() for p in run.pairwise]}))
        tables.append(reports.pairwise_table_report(run.pairwise, run.omnibus))
        _write(out / "reports" / "plot-significance.csv", reports.significance_matrix_csv(run.pairwise))
    _write(out / "reports" / "plot-scatter.csv", reports.scatter_csv(run.rows))
    _write_tables(out / "reports", tables)
    _write(out / "manifest.json", _dump(run.manifest))
    return {"status": "accepted", "digest": run.snapshot.digest, "path": str(out),
            "attempts": len(run.manifest["attempts"]), "warnings": run.manifest["warnings"]}


def cmd_report(args) -> dict:
    out = Path(args.out)
    tables: list[reports.Table] = []
    if args.snapshot:
        snapshot = load_snapshot(args.snapshot)
        tables += [reports.dataset_table(snapshot.stats), reports.frequency_table(snapshot.stats)]
    rows = []
    if args.evaluation:
        rows = _load_report(args.evaluation).rows()
        tool_order = args.tool_order.split(",") if args.tool_order else None
        tables += [reports.results_table(rows, tool_order), reports.ecosystem_summary_table(rows)]
        _write(out / "plot-scatter.csv", reports.scatter_csv(rows))
    if args.stats:
        data = json.loads(Path(args.stats).read_text(encoding="utf-8"))
        pairs = [PairwiseComparison(**p) for p in data.get("pairwise", ())]
        omnibus = OmnibusResult(**data["omnibus"]) if data.get("omnibus") else None
        tables.append(reports.pairwise_table_report(pairs, omnibus))
        _write(out / "plot-significance.csv", reports.significance_matrix_csv(pairs))
    _write_tables(out, tables)
    return {"tables": [t.name for t in tables], "path": str(out)}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scabench", description="SCA tool benchmarking against an OSV ground truth")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, replay=True, out=True):
        if config:
            sp.add_argument("--config", help="run configuration (TOML or JSON)")
        if replay:
            sp.add_argument("--replay", metavar="DIR", help="answer all network and CLI calls from fixtures")
        if out:
            sp.add_argument("--out", help="output directory (default: runs/<timestamp>-<digest>)")

    sp = sub.add_parser("build-gt", help="build a ground-truth snapshot")
    common(sp)
    sp.set_defaults(func=cmd_build_gt)

    sp = sub.add_parser("emit-sbom", help="write the CycloneDX SBOM of a snapshot")
    sp.add_argument("--snapshot", required=True)
    sp.add_argument("--out", help="output file")
    sp.set_defaults(func=cmd_emit_sbom)

    sp = sub.add_parser("run-tool", help="run one tool adapter against a snapshot")
    sp.add_argument("tool", choices=[t.value for t in ToolId])
    sp.add_argument("--snapshot", required=True)
    sp.add_argument("--sbom", help="SBOM to hand to SBOM-based tools (default: emitted from the snapshot)")
    sp.add_argument("--label", help="report name for this run")
    sp.add_argument("--findings", help="findings JSONL for the replay adapter")
    common(sp)
    sp.set_defaults(func=cmd_run_tool)

    sp = sub.add_parser("evaluate", help="match findings against a snapshot")
    sp.add_argument("--snapshot", required=True)
    sp.add_argument("--findings", action="append", default=[], metavar="TOOL=PATH")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("stats-compare", help="Cochran's Q and pairwise McNemar over a detection matrix")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--out", help="output JSON file")
    sp.set_defaults(func=cmd_stats_compare)

    for name, func, what in (("diff-gt", cmd_diff_gt, "snapshot"), ("diff-eval", cmd_diff_eval, "evaluation")):
        sp = sub.add_parser(name, help=f"compare two {what}s")
        sp.add_argument("before")
        sp.add_argument("after")
        sp.add_argument("--out")
        sp.set_defaults(func=func)

    sp = sub.add_parser("controlled-run", help="temporally controlled end-to-end evaluation")
    common(sp)
    sp.add_argument("--a-max", type=int, dest="a_max")
    sp.add_argument("--repeats", type=int)
    sp.set_defaults(func=cmd_controlled_run)

    sp = sub.add_parser("report", help="render Markdown/CSV tables and plot data")
    sp.add_argument("--snapshot")
    sp.add_argument("--evaluation")
    sp.add_argument("--stats")
    sp.add_argument("--tool-order", help="comma-separated tool order for the results table")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        payload = args.func(args)
    except ScaBenchError as exc:
        sys.stderr.write(canonical_json({"error": exc.kind, "message": str(exc)}).decode("utf-8") + "\n")
        return 2 if isinstance(exc, UsageError) else 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(canonical_json({"error": "io-error", "message": str(exc)}).decode("utf-8") + "\n")
        return 1
    sys.stdout.write(_dump(payload))
    return 0


if __name__ == "__main__":
    sys.exit(main())
