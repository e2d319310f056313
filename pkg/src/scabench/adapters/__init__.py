"""Tool adapters behind one contract; ``make_adapter`` picks the class by tool id."""

from __future__ import annotations

from typing import Optional

from ..groundtruth import Snapshot
from ..model import ToolId
from ..transport import Transport
from .base import Adapter, AdapterConfig, Normalizer, Skipped, ToolRunResult, findings_hash, findings_jsonl
from .dtrack import DependencyTrackAdapter
from .github import GitHubAdvisoryAdapter
from .ossindex import OssIndexAdapter
from .replay import ReplayAdapter, read_findings
from .snyk import SnykAdapter
from .trivy import TrivyAdapter

ADAPTERS: dict[ToolId, type[Adapter]] = {
    ToolId.DTRACK: DependencyTrackAdapter,
    ToolId.SNYK: SnykAdapter,
    ToolId.OSS_INDEX: OssIndexAdapter,
    ToolId.GITHUB: GitHubAdvisoryAdapter,
    ToolId.TRIVY: TrivyAdapter,
    ToolId.REPLAY: ReplayAdapter,
}


def make_adapter(config: AdapterConfig, transport: Transport) -> Adapter:
    return ADAPTERS[config.tool](config, transport)


def run_adapter(config: AdapterConfig, snapshot: Snapshot, transport: Transport,
                sbom: Optional[bytes] = None) -> ToolRunResult:
    return make_adapter(config, transport).run(snapshot, sbom)


__all__ = [
    "ADAPTERS", "Adapter", "AdapterConfig", "Normalizer", "Skipped", "ToolRunResult",
    "findings_hash", "findings_jsonl", "make_adapter", "read_findings", "run_adapter",
]
