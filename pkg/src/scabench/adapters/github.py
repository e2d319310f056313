"""GitHub Advisory Database over GraphQL, one lookup per ground-truth tuple.

A finding is produced only when the advisory's vulnerable range contains the
tuple's version under the ecosystem's own ordering; there is no fuzzy matching.
"""

from __future__ import annotations

import re
from typing import Optional

from ..errors import RunError, ScaBenchError
from ..groundtruth import Snapshot
from ..model import ComponentRef, Ecosystem, ToolId, VersionRef, canonical_json
from ..versions import satisfies
from .base import Adapter, Normalizer

GITHUB_GRAPHQL = "https://api.github.com/graphql"

GH_ECOSYSTEMS = {
    Ecosystem.MAVEN: "MAVEN",
    Ecosystem.NPM: "NPM",
    Ecosystem.NUGET: "NUGET",
    Ecosystem.PYPI: "PIP",
}

QUERY = """query($ecosystem: SecurityAdvisoryEcosystem!, $package: String!, $after: String) {
  securityVulnerabilities(ecosystem: $ecosystem, package: $package, first: 100, after: $after) {
    nodes {
      advisory { ghsaId identifiers { type value } withdrawnAt }
      vulnerableVersionRange
      package { name ecosystem }
    }
    pageInfo { hasNextPage endCursor }
  }
}"""


def request_body(component: ComponentRef, after: Optional[str] = None) -> dict:
    variables = {"ecosystem": GH_ECOSYSTEMS[component.ecosystem], "package": component.coordinate}
    if after:
        variables["after"] = after
    return {"query": QUERY, "variables": variables}


class GitHubAdvisoryAdapter(Adapter):
    tool = ToolId.GITHUB

    def _lookup(self, component: ComponentRef) -> list[dict]:
        token = self.secret("token")
        headers = {"Authorization": f"bearer {token}"} if token else None
        url = self.config.endpoint or GITHUB_GRAPHQL
        nodes, after = [], None
        while True:
            resp = self.transport.post(url, request_body(component, after), headers=headers)
            if not resp.ok:
                raise RunError(f"GitHub GraphQL returned HTTP {resp.status}")
            doc = resp.json()
            if doc.get("errors"):
                raise RunError(f"GitHub GraphQL error: {doc['errors'][0].get('message')}")
            page = doc["data"]["securityVulnerabilities"]
            nodes.extend(page["nodes"])
            if not page["pageInfo"]["hasNextPage"]:
                return nodes
            after = page["pageInfo"]["endCursor"]

    def evaluate(self, component: ComponentRef, version: VersionRef, nodes: list[dict], norm: Normalizer) -> None:
        for node in nodes:
            advisory = node.get("advisory") or {}
            if advisory.get("withdrawnAt"):
                continue
            affected = node.get("vulnerableVersionRange") or ""
            try:
                hit = satisfies(component.ecosystem, version.raw, affected)
            except ScaBenchError as exc:
                norm.skip("bad-range", f"{advisory.get('ghsaId')} {affected!r}: {exc}")
                continue
            if hit:
                ids = [advisory.get("ghsaId")] + [i.get("value") for i in advisory.get("identifiers") or ()]
                norm.add(component.ecosystem, component, version.raw, [i for i in ids if i], affected=affected)

    def collect(self, snapshot: Snapshot, sbom: Optional[bytes], norm: Normalizer) -> dict[str, bytes]:
        raw = {}
        for component, version in snapshot.coordinates():
            nodes = self._lookup(component)
            name = re.sub(r"[^A-Za-z0-9._@-]+", "_", f"{component.ecosystem.value}-{component.coordinate}@{version.raw}")
            raw[f"github-{name}.json"] = canonical_json(nodes)
            self.evaluate(component, version, nodes, norm)
        return raw
