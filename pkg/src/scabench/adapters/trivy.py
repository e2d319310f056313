"""Trivy over the SBOM (``trivy sbom --format json``).

When a report row carries ``FixedVersion`` the finding is range-based: the
affected range is approximated as ``<fix`` using the smallest fixed version
above the installed one.
"""

from __future__ import annotations

import json
from typing import Optional

from ..errors import ScaBenchError
from ..groundtruth import Snapshot
from ..model import Ecosystem, ToolId
from ..sbom import from_purl
from ..versions import compare, parse_version
from .base import Adapter, Normalizer

TRIVY_ARGV = ["sbom", "--format", "json", "{sbom}"]


def affected_from_fixed(ecosystem: Ecosystem, installed: str, fixed: Optional[str]) -> Optional[str]:
    """``"<X"`` for the smallest listed fix X above ``installed``, else None."""
    if not fixed:
        return None
    try:
        current = parse_version(ecosystem, installed)
    except ScaBenchError:
        return None
    candidates = []
    for text in fixed.split(","):
        text = text.strip()
        if not text:
            continue
        try:
            parsed = parse_version(ecosystem, text)
        except ScaBenchError:
            continue
        if compare(parsed, current) > 0:
            candidates.append(parsed)
    if not candidates:
        return None
    return "<" + min(candidates).raw


class TrivyAdapter(Adapter):
    tool = ToolId.TRIVY

    def collect(self, snapshot: Snapshot, sbom: Optional[bytes], norm: Normalizer) -> dict[str, bytes]:
        sbom = self._require_sbom(snapshot, sbom)
        argv = [self.config.executable or "trivy", *TRIVY_ARGV]
        stdout = self.run_cli(argv, {"sbom": sbom})
        report = json.loads(stdout)
        for result in report.get("Results") or ():
            for vuln in result.get("Vulnerabilities") or ():
                purl = (vuln.get("PkgIdentifier") or {}).get("PURL")
                if not purl:
                    norm.skip("no-purl", f"{vuln.get('PkgName')} {vuln.get('VulnerabilityID')}")
                    continue
                ids = [vuln.get("VulnerabilityID"), *(vuln.get("VendorIDs") or ())]
                installed = vuln.get("InstalledVersion")
                affected = None
                try:
                    eco = from_purl(purl)[0]
                    if installed:
                        affected = affected_from_fixed(eco, installed, vuln.get("FixedVersion"))
                except ScaBenchError:
                    pass
                norm.add_purl(purl, [i for i in ids if i], affected=affected, version=installed)
        return {"trivy.json": stdout}
