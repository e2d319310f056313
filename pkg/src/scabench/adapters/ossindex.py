"""Sonatype OSS Index component-report endpoint, queried in fixed-size batches."""

from __future__ import annotations

from typing import Optional

from ..clients import _map_ordered
from ..errors import RunError
from ..groundtruth import Snapshot
from ..model import ToolId, canonical_json
from ..sbom import to_purl
from .base import Adapter, Normalizer

OSS_INDEX_URL = "https://ossindex.sonatype.org"


def _ids(vuln: dict) -> list[str]:
    ids = [vuln.get("cve"), vuln.get("id")]
    ids.extend(vuln.get("aliases") or ())
    return [i for i in ids if i]


def batches(items: list, size: int) -> list[list]:
    return [items[i:i + size] for i in range(0, len(items), size)]


class OssIndexAdapter(Adapter):
    tool = ToolId.OSS_INDEX

    def _report(self, coordinates: list[str]) -> list[dict]:
        user, token = self.secret("user"), self.secret("token")
        auth = (user, token) if user and token else None
        url = (self.config.endpoint or OSS_INDEX_URL).rstrip("/") + "/api/v3/component-report"
        resp = self.transport.post(url, {"coordinates": coordinates}, auth=auth)
        if not resp.ok:
            raise RunError(f"OSS Index returned HTTP {resp.status}")
        return resp.json()

    def collect(self, snapshot: Snapshot, sbom: Optional[bytes], norm: Normalizer) -> dict[str, bytes]:
        coordinates = [str(to_purl(c.ecosystem, c, v)) for c, v in snapshot.coordinates()]
        chunks = batches(coordinates, self.config.batch_size)
        reports = _map_ordered(self._report, chunks, self.config.concurrency)
        raw = {}
        for index, report in enumerate(reports):
            raw[f"ossindex-batch-{index:03d}.json"] = canonical_json(report)
            for item in report:
                for vuln in item.get("vulnerabilities") or ():
                    norm.add_purl(item["coordinates"], _ids(vuln))
        return raw
