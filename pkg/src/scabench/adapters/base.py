"""Shared adapter contract: prepare inputs, invoke the tool, normalize its output."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping, Optional

from ..errors import DataError, RunError, ScaBenchError, UsageError
from ..groundtruth import Snapshot
from ..model import (
    Basis,
    ComponentRef,
    Ecosystem,
    NormalizedFinding,
    ToolId,
    VersionRef,
    canonical_json,
    primary_identifier,
)
from ..sbom import emit_sbom, from_purl, sbom_document
from ..transport import Transport

log = logging.getLogger(__name__)

# Environment variables consulted when a config names no credential mapping.
DEFAULT_CREDENTIALS: dict[ToolId, dict[str, str]] = {
    ToolId.DTRACK: {"url": "DTRACK_URL", "api_key": "DTRACK_API_KEY"},
    ToolId.SNYK: {"token": "SNYK_TOKEN"},
    ToolId.OSS_INDEX: {"user": "OSSINDEX_USER", "token": "OSSINDEX_TOKEN"},
    ToolId.GITHUB: {"token": "GITHUB_TOKEN"},
}


@dataclass(frozen=True)
class AdapterConfig:
    tool: ToolId
    # name used in reports; defaults to the tool id (a replay config can stand in for any tool)
    label: Optional[str] = None
    endpoint: Optional[str] = None
    executable: Optional[str] = None
    # logical name -> environment variable holding the secret
    credentials: Mapping[str, str] = field(default_factory=dict)
    retries: int = 3
    timeout: float = 180.0
    batch_size: int = 128
    concurrency: int = 4
    poll_interval: float = 5.0
    # replay adapter: path to a findings JSONL file
    findings_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise UsageError("adapter timeout must be positive")
        if self.retries < 1:
            raise UsageError("adapter retries must be at least 1")
        if self.batch_size < 1:
            raise UsageError("batch size must be at least 1")

    @property
    def name(self) -> str:
        return self.label or self.tool.value

    def secret(self, name: str, required: bool = True) -> Optional[str]:
        var = self.credentials.get(name) or DEFAULT_CREDENTIALS.get(self.tool, {}).get(name)
        value = os.environ.get(var) if var else None
        if required and not value:
            raise UsageError(f"{self.tool} adapter needs environment variable {var or name!r}")
        return value

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AdapterConfig":
        known = {f for f in cls.__dataclass_fields__}
        values = {k: v for k, v in data.items() if k in known}
        values["tool"] = ToolId.parse(values["tool"])
        if "credentials" in values:
            values["credentials"] = dict(values["credentials"])
        return cls(**values)


@dataclass(frozen=True)
class Skipped:
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class ToolRunResult:
    tool: ToolId
    findings: tuple[NormalizedFinding, ...]
    raw_artifacts: Mapping[str, bytes]
    skipped: tuple[Skipped, ...]
    raw_count: int
    result_hash: str
    started_at: datetime
    finished_at: datetime

    def findings_jsonl(self) -> str:
        return findings_jsonl(self.findings)


def findings_hash(findings: Iterable[NormalizedFinding]) -> str:
    ordered = sorted(findings, key=lambda f: f.key)
    return hashlib.sha256(canonical_json([f.to_dict() for f in ordered])).hexdigest()


def findings_jsonl(findings: Iterable[NormalizedFinding]) -> str:
    ordered = sorted(findings, key=lambda f: f.key)
    return "".join(canonical_json(f.to_dict()).decode("utf-8") + "\n" for f in ordered)


class Normalizer:
    """Collects normalized findings and skip records so the counts always reconcile."""

    def __init__(self, tool: ToolId, snapshot: Snapshot):
        self.tool = tool
        self.inputs = {(c.ecosystem.value, c.key, v.raw) for c, v in snapshot.coordinates()}
        self._findings: dict[tuple, NormalizedFinding] = {}
        self.skipped: list[Skipped] = []
        self.raw_count = 0

    def add(self, ecosystem: Ecosystem, component: ComponentRef, version: str, ids: Iterable[str], *,
            affected: Optional[str] = None) -> None:
        self.raw_count += 1
        if not version:
            self.skipped.append(Skipped("no-version", str(component)))
            return
        try:
            vuln, aliases = primary_identifier(ids)
        except DataError:
            self.skipped.append(Skipped("no-identifier", f"{component}@{version}"))
            return
        if component.ecosystem is not ecosystem:
            self.skipped.append(Skipped("ecosystem-mismatch", f"{component} declared as {ecosystem}"))
            return
        in_input = (ecosystem.value, component.key, version) in self.inputs
        finding = NormalizedFinding(
            tool=self.tool, ecosystem=ecosystem, component=component, version=VersionRef(version),
            vuln=vuln, aliases=aliases, basis=Basis.RANGE if affected else Basis.EXACT,
            affected=affected, in_input=in_input,
        )
        if finding.key in self._findings:
            prev = self._findings[finding.key]
            merged = prev.aliases | finding.aliases
            if merged != prev.aliases:
                self._findings[finding.key] = replace(prev, aliases=merged)
            self.skipped.append(Skipped("duplicate", "/".join(map(str, finding.key))))
            return
        if not in_input:
            log.debug("%s reported %s for %s@%s outside the input set", self.tool, vuln, component, version)
        self._findings[finding.key] = finding

    def add_purl(self, purl: str, ids: Iterable[str], *, affected: Optional[str] = None,
                 version: Optional[str] = None) -> None:
        try:
            eco, comp, ver = from_purl(purl)
        except ScaBenchError as exc:
            self.raw_count += 1
            self.skipped.append(Skipped("bad-purl", f"{purl}: {exc}"))
            return
        self.add(eco, comp, version or ver.raw, ids, affected=affected)

    def add_finding(self, finding: NormalizedFinding) -> None:
        """Accept an already-normalized finding, keeping its tool id; only ``in_input`` is recomputed."""
        self.raw_count += 1
        finding = replace(finding, in_input=finding.coordinate in self.inputs)
        prev = self._findings.get(finding.key)
        if prev is not None:
            self._findings[finding.key] = replace(prev, aliases=prev.aliases | finding.aliases)
            self.skipped.append(Skipped("duplicate", "/".join(map(str, finding.key))))
            return
        self._findings[finding.key] = finding

    def skip(self, reason: str, detail: str = "") -> None:
        self.raw_count += 1
        self.skipped.append(Skipped(reason, detail))

    @property
    def findings(self) -> tuple[NormalizedFinding, ...]:
        return tuple(self._findings[k] for k in sorted(self._findings))


class Adapter:
    tool: ToolId

    def __init__(self, config: AdapterConfig, transport: Transport):
        self.config = config
        self.transport = transport

    def run(self, snapshot: Snapshot, sbom: Optional[bytes] = None) -> ToolRunResult:
        started = datetime.now(timezone.utc)
        norm = Normalizer(self.tool, snapshot)
        try:
            raw = self.collect(snapshot, sbom, norm)
        except ScaBenchError:
            raise
        except Exception as exc:
            raise RunError(f"{self.tool} adapter failed: {type(exc).__name__}: {exc}") from exc
        findings = norm.findings
        if norm.raw_count != len(findings) + len(norm.skipped):
            raise AssertionError("normalization counts do not reconcile")
        return ToolRunResult(
            tool=self.tool,
            findings=findings,
            raw_artifacts=raw,
            skipped=tuple(norm.skipped),
            raw_count=norm.raw_count,
            result_hash=findings_hash(findings),
            started_at=started,
            finished_at=datetime.now(timezone.utc),
        )

    def secret(self, name: str) -> Optional[str]:
        # replayed exchanges carry no credentials, so only live runs insist on them
        return self.config.secret(name, required=self.transport.mode != "replay")

    def collect(self, snapshot: Snapshot, sbom: Optional[bytes], norm: Normalizer) -> dict[str, bytes]:
        """Invoke the tool, feed ``norm``, return raw artifacts by file name."""
        raise NotImplementedError

    def run_cli(self, argv: list[str], files: Mapping[str, bytes], ok_codes=(0,)) -> bytes:
        """Run a CLI tool with bounded retries; return stdout of the first accepted exit."""
        last = ""
        for attempt in range(1, self.config.retries + 1):
            try:
                result = self.transport.run_command(argv, files, timeout=self.config.timeout)
            except RunError as exc:
                last = str(exc)
            else:
                if result.returncode in ok_codes:
                    return result.stdout
                last = f"exit {result.returncode}: {result.stderr.decode('utf-8', 'replace').strip()[:200]}"
            log.warning("%s attempt %d/%d failed: %s", self.tool, attempt, self.config.retries, last)
        raise RunError(f"{self.tool} failed after {self.config.retries} attempts ({last})")

    def _require_sbom(self, snapshot: Snapshot, sbom: Optional[bytes]) -> bytes:
        if sbom is None:
            return emit_sbom(snapshot)
        doc = json.loads(sbom)
        expected = sbom_document(snapshot)["serialNumber"]
        if doc.get("serialNumber") != expected:
            raise UsageError("SBOM does not belong to this snapshot (serial number mismatch)")
        return sbom
