"""Snyk CLI over the SBOM (``snyk sbom test``).

Exit status 1 means "vulnerabilities found" and is a successful run; anything
above 1 is an execution error and is retried.
"""

from __future__ import annotations

import json
from typing import Iterable, Optional

from ..errors import RunError, ScaBenchError
from ..groundtruth import Snapshot
from ..model import Ecosystem, ToolId, canonicalize_component
from .base import Adapter, Normalizer

SBOM_ARGV = ["sbom", "test", "--experimental", "--file={sbom}", "--json"]


def _records(doc) -> Iterable[dict]:
    # one dict per scanned project, or a list of them
    projects = doc if isinstance(doc, list) else [doc]
    for project in projects:
        if project.get("ok") is False and "error" in project:
            raise RunError(f"snyk reported an error: {project['error']}")
        yield from project.get("vulnerabilities") or ()


def _ids(vuln: dict) -> list[str]:
    ids = [vuln.get("id")]
    for values in (vuln.get("identifiers") or {}).values():
        ids.extend(values or ())
    return [i for i in ids if i]


class SnykAdapter(Adapter):
    tool = ToolId.SNYK

    def collect(self, snapshot: Snapshot, sbom: Optional[bytes], norm: Normalizer) -> dict[str, bytes]:
        sbom = self._require_sbom(snapshot, sbom)
        self.secret("token")
        argv = [self.config.executable or "snyk", *SBOM_ARGV]
        stdout = self.run_cli(argv, {"sbom": sbom}, ok_codes=(0, 1))
        for vuln in _records(json.loads(stdout)):
            ids = _ids(vuln)
            if vuln.get("purl"):
                norm.add_purl(vuln["purl"], ids, version=vuln.get("version"))
                continue
            try:
                eco = Ecosystem.parse(vuln.get("packageManager", ""))
                comp = canonicalize_component(eco, vuln["packageName"])
            except (ScaBenchError, KeyError) as exc:
                norm.skip("unmappable-package", f"{vuln.get('packageName')}: {exc}")
                continue
            norm.add(eco, comp, vuln.get("version", ""), ids)
        return {"snyk.json": stdout}
