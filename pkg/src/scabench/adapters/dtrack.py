"""Dependency-Track: upload the SBOM, wait for server-side analysis, read findings.

The set of analyzers the server runs is server configuration; the adapter
cannot enforce it and only reports what the server returns.
"""

from __future__ import annotations

import base64
import time
from typing import Callable, Optional

from ..errors import RunError
from ..groundtruth import Snapshot
from ..model import ToolId
from ..transport import Response, Transport
from .base import Adapter, AdapterConfig, Normalizer


def _ids(vuln: dict) -> list[str]:
    ids = [vuln.get("vulnId")]
    for alias in vuln.get("aliases") or ():
        ids.extend(v for k, v in alias.items() if k.endswith("Id") and isinstance(v, str))
    return [i for i in ids if i]


class DependencyTrackAdapter(Adapter):
    tool = ToolId.DTRACK

    def __init__(self, config: AdapterConfig, transport: Transport, sleep: Callable[[float], None] = time.sleep):
        super().__init__(config, transport)
        self._sleep = sleep

    def _base(self) -> str:
        url = self.config.endpoint or self.secret("url") or "http://localhost:8081"
        return url.rstrip("/")

    def _call(self, method: str, url: str, **kwargs) -> Response:
        key = self.secret("api_key")
        headers = {"X-Api-Key": key} if key else None
        resp = self.transport.request(method, url, headers=headers, **kwargs)
        if not resp.ok:
            raise RunError(f"Dependency-Track {method} {url} returned HTTP {resp.status}")
        return resp

    def collect(self, snapshot: Snapshot, sbom: Optional[bytes], norm: Normalizer) -> dict[str, bytes]:
        sbom = self._require_sbom(snapshot, sbom)
        base = self._base()
        project = f"scabench-{snapshot.digest[:12]}"
        version = snapshot.digest[:12]
        upload = self._call("PUT", f"{base}/api/v1/bom", json_body={
            "projectName": project,
            "projectVersion": version,
            "autoCreate": True,
            "bom": base64.b64encode(sbom).decode("ascii"),
        })
        token = upload.json()["token"]

        waited = 0.0
        while True:
            status = self._call("GET", f"{base}/api/v1/bom/token/{token}").json()
            if not status.get("processing"):
                break
            if waited >= self.config.timeout:
                raise RunError(f"Dependency-Track analysis did not finish within {self.config.timeout}s")
            self._sleep(self.config.poll_interval)
            waited += self.config.poll_interval

        uuid = self._call("GET", f"{base}/api/v1/project/lookup",
                          params={"name": project, "version": version}).json()["uuid"]
        raw = self._call("GET", f"{base}/api/v1/finding/project/{uuid}")
        for item in raw.json():
            purl = (item.get("component") or {}).get("purl")
            if not purl:
                norm.skip("no-purl", str((item.get("component") or {}).get("name")))
                continue
            norm.add_purl(purl, _ids(item.get("vulnerability") or {}))
        return {"dtrack-findings.json": raw.body}
