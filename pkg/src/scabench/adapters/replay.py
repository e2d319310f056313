"""Identity adapter: serves a stored findings JSONL file."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from ..errors import UsageError
from ..groundtruth import Snapshot
from ..model import NormalizedFinding, ToolId
from .base import Adapter, Normalizer


def read_findings(path: "str | Path") -> list[NormalizedFinding]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(NormalizedFinding.from_dict(json.loads(line)))
    return out


class ReplayAdapter(Adapter):
    tool = ToolId.REPLAY

    def collect(self, snapshot: Snapshot, sbom: Optional[bytes], norm: Normalizer) -> dict[str, bytes]:
        if not self.config.findings_path:
            raise UsageError("replay adapter needs findings_path")
        path = Path(self.config.findings_path)
        for finding in read_findings(path):
            norm.add_finding(finding)
        return {path.name: path.read_bytes()}
