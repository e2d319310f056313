"""Regenerate the offline fixture corpora under tests/fixtures.

replay/        a small four-ecosystem build recorded through a simulated upstream
               (OSV plus the four registries) and recorded raw outputs of all five
               tool adapters for the resulting snapshot
replay-drift/  the same upstream with one extra advisory, i.e. a one-entry drift
appendix/      two full-scale snapshots (250 entries per ecosystem) that differ by
               a known set of entries, plus one findings file per tool and snapshot

The script is deterministic: running it twice produces identical files.

    python3 scripts/make_fixtures.py [--out tests/fixtures]
"""

from __future__ import annotations

import argparse
import base64
import hashlib
import json
import random
import shutil
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from types import SimpleNamespace
from typing import Optional
from urllib.parse import unquote, urlsplit

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from scabench.adapters.github import GITHUB_GRAPHQL, request_body  # noqa: E402
from scabench.adapters.ossindex import OSS_INDEX_URL, batches  # noqa: E402
from scabench.adapters.snyk import SBOM_ARGV  # noqa: E402
from scabench.adapters.trivy import TRIVY_ARGV  # noqa: E402
from scabench.clients import OsvClient, RegistryClient  # noqa: E402
from scabench.config import load_config  # noqa: E402
from scabench.groundtruth import Snapshot, build_snapshot, save_snapshot  # noqa: E402
from scabench.model import (  # noqa: E402
    ECOSYSTEMS,
    Ecosystem,
    GroundTruthEntry,
    NormalizedFinding,
    ToolId,
    VersionRef,
    VulnId,
    canonical_json,
    canonicalize_component,
    parse_timestamp,
)
from scabench.sbom import emit_sbom, to_purl  # noqa: E402
from scabench.transport import RECORD, Transport, write_command_fixture, write_fixture  # noqa: E402

RECORDED_AT = "2026-03-28T12:00:00Z"
FIXED_CLOCK = datetime(2026, 3, 28, 12, 0, tzinfo=timezone.utc)


# ================================================================ simulated upstream

@dataclass
class Advisory:
    id: str
    aliases: list[str]
    # (ecosystem, package, [(introduced, fixed)], explicitly affected versions)
    affected: list[tuple[str, str, list[tuple[str, Optional[str]]], list[str]]]
    modified: str = "2026-03-01T00:00:00Z"

    def record(self) -> dict:
        return {
            "id": self.id,
            "aliases": list(self.aliases),
            "modified": self.modified,
            "affected": [
                {
                    "package": {"ecosystem": eco, "name": name},
                    "ranges": [{"type": "ECOSYSTEM",
                                "events": [{"introduced": i}] + ([{"fixed": f}] if f else [])}
                               for i, f in ranges],
                    "versions": list(versions),
                }
                for eco, name, ranges, versions in self.affected
            ],
        }

    def hits(self, eco: str, name: str, version: str) -> bool:
        return any(e == eco and n == name and version in vs for e, n, _, vs in self.affected)


@dataclass
class Package:
    ecosystem: str
    name: str
    # (version, ISO date or None, flags) with flags in {"yanked", "unlisted"}
    releases: list[tuple[str, Optional[str], tuple[str, ...]]]


@dataclass
class Upstream:
    """Answers the HTTP requests the OSV and registry clients make."""

    packages: list[Package]
    advisories: list[Advisory]
    page_size: int = 2
    log: list[str] = field(default_factory=list)

    def request(self, method, url, params=None, json=None, headers=None, auth=None, timeout=None):
        self.log.append(f"{method} {url}")
        parts = urlsplit(url)
        host, path = parts.netloc, unquote(parts.path)
        if host == "api.osv.dev" and path == "/v1/querybatch":
            return _reply(self._querybatch(json))
        if host == "api.osv.dev" and path.startswith("/v1/vulns/"):
            vid = path.rsplit("/", 1)[1]
            adv = next((a for a in self.advisories if a.id == vid), None)
            return _reply(adv.record()) if adv else _reply({"message": "Bug not found."}, 404)
        if host == "registry.npmjs.org":
            return self._npm(path.lstrip("/"))
        if host == "pypi.org":
            return self._pypi(path.split("/")[2])
        if host == "repo1.maven.org":
            return self._maven_metadata(path)
        if host == "search.maven.org":
            return self._maven_search(params["q"])
        if host == "api.nuget.org":
            return self._nuget(path)
        return _reply({"message": "unknown route"}, 404)

    def _package(self, eco: str, name: str) -> Optional[Package]:
        key = name.lower() if eco == "NuGet" else name
        for p in self.packages:
            if p.ecosystem == eco and (p.name.lower() if eco == "NuGet" else p.name) == key:
                return p
        return None

    def _querybatch(self, body: dict) -> dict:
        results = []
        for q in body["queries"]:
            eco, name, version = q["package"]["ecosystem"], q["package"]["name"], q["version"]
            ids = sorted(a.id for a in self.advisories if a.hits(eco, name, version))
            start = int(q.get("page_token", "0"))
            page = ids[start:start + self.page_size]
            result: dict = {"vulns": [{"id": i, "modified": "2026-03-01T00:00:00Z"} for i in page]}
            if start + self.page_size < len(ids):
                result["next_page_token"] = str(start + self.page_size)
            results.append(result)
        return {"results": results}

    def _npm(self, name: str):
        pkg = self._package("npm", name)
        if pkg is None:
            return _reply({"error": "Not found"}, 404)
        times = {"created": "2020-01-01T00:00:00.000Z", "modified": "2026-03-01T00:00:00.000Z"}
        times.update({v: f"{d}T10:00:00.000Z" for v, d, _ in pkg.releases})
        return _reply({"name": pkg.name, "versions": {v: {"name": pkg.name, "version": v} for v, _, _ in pkg.releases},
                       "time": times})

    def _pypi(self, name: str):
        pkg = self._package("PyPI", name)
        if pkg is None:
            return _reply({"message": "Not Found"}, 404)
        releases = {}
        for v, d, flags in pkg.releases:
            releases[v] = [{"filename": f"{pkg.name}-{v}.tar.gz", "upload_time_iso_8601": f"{d}T09:00:00.000000Z",
                            "yanked": "yanked" in flags}]
        return _reply({"info": {"name": pkg.name}, "releases": releases})

    def _maven_metadata(self, path: str):
        *group, artifact, _ = path.strip("/").split("/")[1:]
        pkg = self._package("Maven", f"{'.'.join(group)}:{artifact}")
        if pkg is None:
            return _reply_text("", 404)
        versions = "".join(f"<version>{v}</version>" for v, _, _ in pkg.releases)
        xml = (f"<?xml version=\"1.0\" encoding=\"UTF-8\"?><metadata><groupId>{'.'.join(group)}</groupId>"
               f"<artifactId>{artifact}</artifactId><versioning><versions>{versions}</versions></versioning></metadata>")
        return _reply_text(xml, content_type="text/xml")

    def _maven_search(self, q: str):
        group = q.split("g:")[1].split(" ")[0]
        artifact = q.split("a:")[1].strip()
        pkg = self._package("Maven", f"{group}:{artifact}")
        docs = []
        for v, d, _ in pkg.releases if pkg else ():
            if d:
                ms = int(parse_timestamp(f"{d}T12:00:00Z").timestamp() * 1000)
                docs.append({"g": group, "a": artifact, "v": v, "timestamp": ms})
        return _reply({"response": {"numFound": len(docs), "docs": docs}})

    def _nuget(self, path: str):
        base = "https://api.nuget.org/v3/registration5-semver1"
        parts = path.split("/")
        lower = parts[3]
        pkg = self._package("NuGet", lower)
        if pkg is None:
            return _reply({}, 404)

        def leaf(v, d, flags):
            published = "1900-01-01T00:00:00+00:00" if "unlisted" in flags else f"{d}T08:00:00+00:00"
            return {"catalogEntry": {"id": pkg.name, "version": v, "published": published,
                                     "listed": "unlisted" not in flags}}

        half = (len(pkg.releases) + 1) // 2
        first, second = pkg.releases[:half], pkg.releases[half:]
        page2 = f"{base}/{lower}/page/2.json"
        if parts[-1] == "index.json":
            items = [{"@id": f"{base}/{lower}/page/1.json", "count": len(first),
                      "items": [leaf(*r) for r in first]}]
            if second:
                items.append({"@id": page2, "count": len(second)})  # leaves fetched separately
            return _reply({"count": len(items), "items": items})
        return _reply({"@id": page2, "items": [leaf(*r) for r in second]})


def _reply(obj, status: int = 200):
    return SimpleNamespace(status_code=status, content=json.dumps(obj, sort_keys=True).encode("utf-8"),
                           headers={"Content-Type": "application/json"})


def _reply_text(text: str, status: int = 200, content_type: str = "text/plain"):
    return SimpleNamespace(status_code=status, content=text.encode("utf-8"), headers={"Content-Type": content_type})


# ================================================================ small corpus

LOG4J = "org.apache.logging.log4j:log4j-core"

PACKAGES = [
    Package("Maven", LOG4J, [
        ("2.0-beta9", None, ()), ("2.13.3", "2020-05-10", ()), ("2.14.0", "2020-11-06", ()),
        ("2.14.1", "2021-03-06", ()), ("2.15.0", "2021-12-06", ()), ("2.16.0", "2021-12-13", ()),
        ("2.17.0", "2021-12-17", ()), ("2.17.1", "2021-12-27", ()), ("3.0.0-beta1", "2023-10-24", ()),
    ]),
    Package("npm", "vite", [
        ("4.5.0", "2023-10-19", ()), ("4.5.1", "2023-12-04", ()), ("4.5.2", "2024-01-19", ()),
        ("5.0.10", "2023-12-15", ()), ("5.0.11", "2024-01-05", ()), ("5.0.12", "2024-01-19", ()),
        ("5.1.0-beta.0", "2024-01-15", ()),
    ]),
    Package("NuGet", "Microsoft.Data.SqlClient", [
        ("5.1.0", "2023-01-19", ()), ("5.1.1", "2023-03-28", ()), ("5.2.0-preview1", "2023-06-01", ()),
        ("5.1.2", "2023-10-26", ()), ("5.1.3", "2024-01-09", ()), ("5.1.4", "2024-01-09", ()),
        ("5.1.5", None, ("unlisted",)),
    ]),
    Package("NuGet", "Newtonsoft.Json", [("13.0.1", "2021-03-22", ()), ("13.0.3", "2023-03-08", ())]),
    Package("PyPI", "requests", [
        ("2.30.0", "2023-05-03", ()), ("2.31.0", "2023-05-22", ()), ("2.32.0", "2024-05-20", ("yanked",)),
        ("2.32.1", "2024-05-20", ()), ("2.32.2", "2024-05-21", ()), ("2.32.3", "2024-05-29", ()),
        ("3.0.0.dev0", "2024-07-01", ()), ("2.32.4", "2025-06-09", ()),
    ]),
]

_LOG4J_OLD = ["2.0-beta9", "2.13.3", "2.14.0", "2.14.1"]
ADVISORIES = [
    Advisory("GHSA-jfh8-c2jp-5v3q", ["CVE-2021-44228"],
             [("Maven", LOG4J, [("2.0-beta9", "2.15.0")], _LOG4J_OLD)]),
    Advisory("GHSA-7rjr-3q55-vv33", ["CVE-2021-45046"],
             [("Maven", LOG4J, [("2.0-beta9", "2.16.0")], _LOG4J_OLD + ["2.15.0"])]),
    Advisory("GHSA-p6xc-xr62-6r2g", ["CVE-2021-45105"],
             [("Maven", LOG4J, [("2.0-beta9", "2.17.0")], _LOG4J_OLD + ["2.15.0", "2.16.0"])]),
    Advisory("GHSA-8489-44mv-ggj8", ["CVE-2021-44832"],
             [("Maven", LOG4J, [("2.0-beta7", "2.17.1")], _LOG4J_OLD + ["2.15.0", "2.16.0", "2.17.0"])]),
    Advisory("GHSA-c24v-8rfc-w8vw", ["CVE-2024-23331"],
             [("npm", "vite", [("4.0.0", "4.5.2"), ("5.0.0", "5.0.12")], ["4.5.0", "4.5.1", "5.0.10", "5.0.11"])]),
    Advisory("GHSA-92r3-m2mg-pj97", ["CVE-2024-31207"],
             [("npm", "vite", [("4.0.0", "4.5.3"), ("5.0.0", "5.0.13")],
               ["4.5.0", "4.5.1", "4.5.2", "5.0.10", "5.0.11", "5.0.12"])]),
    Advisory("GHSA-98g6-xh36-x2p7", ["CVE-2024-0056"],
             [("NuGet", "Microsoft.Data.SqlClient", [("5.1.0", "5.1.3")], ["5.1.0", "5.1.1", "5.1.2"])]),
    Advisory("GHSA-j8r2-6x86-q33q", ["CVE-2023-32681", "PYSEC-2023-74"],
             [("PyPI", "requests", [("2.3.0", "2.31.0")], ["2.30.0"])]),
    Advisory("GHSA-9wx4-h78v-vm56", ["CVE-2024-35195"],
             [("PyPI", "requests", [("0", "2.32.0")], ["2.30.0", "2.31.0"])]),
    Advisory("GHSA-9hjg-9r4m-mvj7", ["CVE-2024-47081"],
             [("PyPI", "requests", [("0", "2.32.4")], ["2.30.0", "2.31.0", "2.32.1", "2.32.2", "2.32.3"])]),
]

# one extra advisory, no CVE alias, on one selected version
DRIFT_ADVISORY = Advisory("PYSEC-2026-901", [], [("PyPI", "requests", [("2.32.3", "2.32.4")], ["2.32.3"])],
                          modified="2026-03-29T00:00:00Z")

CONFIG_TOML = """\
# Offline corpus: every request below is answered from ./http and ./cmd.
a_max = 3
repeats = 2

[build]
version_cap = 4
version_caps = {{ Maven = 6, NuGet = 3 }}
date_window = ["2020-06-01T00:00:00Z", "2025-01-01T00:00:00Z"]
target_entries = 10
include_prereleases = false

[build.components]
Maven = ["{log4j}"]
npm = ["vite"]
NuGet = ["Microsoft.Data.SqlClient", "Newtonsoft.Json"]
PyPI = ["requests"]

[transport]
mode = "replay"
fixture_dir = "."

[[adapters]]
tool = "dtrack"
endpoint = "{dtrack}"
poll_interval = 0.01

[[adapters]]
tool = "github"

[[adapters]]
tool = "oss-index"
batch_size = {oss_batch}
concurrency = 1

[[adapters]]
tool = "snyk"

[[adapters]]
tool = "trivy"
"""

DTRACK_URL = "http://dtrack.local:8081"
OSS_BATCH = 5


def record_build(directory: Path, advisories: list[Advisory]) -> Snapshot:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.toml").write_text(
        CONFIG_TOML.format(log4j=LOG4J, dtrack=DTRACK_URL, oss_batch=OSS_BATCH), encoding="utf-8")
    cfg = load_config(directory / "config.toml")
    upstream = Upstream(PACKAGES, advisories)
    transport = Transport(RECORD, directory, session=upstream, clock=lambda: FIXED_CLOCK)
    snapshot = build_snapshot(cfg.build, OsvClient(transport), RegistryClient(transport), FIXED_CLOCK)
    (directory / "golden.json").write_text(json.dumps({
        "digest": snapshot.digest,
        "entries": len(snapshot),
        "per_ecosystem": {r.ecosystem: r.osv_entries for r in snapshot.stats.rows},
        "keys": [list(map(str, (e.ecosystem.value, e.component.coordinate, e.version.raw, e.vuln.value)))
                 for e in snapshot.entries],
    }, indent=2) + "\n", encoding="utf-8")
    return snapshot


# ---------------------------------------------------------------- recorded tool outputs

def _cve(entry: GroundTruthEntry) -> Optional[str]:
    return min((c.value for c in entry.cves), default=None)


def _ghsa(entry: GroundTruthEntry) -> Optional[str]:
    return next((i.value for i in sorted(entry.identifiers) if i.value.startswith("GHSA-")), None)


def _purl(entry_or_coord) -> str:
    comp, ver = entry_or_coord
    return str(to_purl(comp.ecosystem, comp, ver))


def record_tools(directory: Path, snapshot: Snapshot) -> dict[str, dict]:
    """Hand-assembled raw tool outputs for ``snapshot``; returns expected normalization counts."""
    sbom = emit_sbom(snapshot)
    entries = list(snapshot.entries)
    coords = snapshot.coordinates()
    expected: dict[str, dict] = {}
    log4j_extra = canonicalize_component(Ecosystem.MAVEN, LOG4J)

    # Dependency-Track: CVE-keyed rows, one duplicate via the GHSA source, one row without purl,
    # one finding on a version outside the SBOM
    project, version = f"scabench-{snapshot.digest[:12]}", snapshot.digest[:12]
    write_fixture(directory, "PUT", f"{DTRACK_URL}/api/v1/bom", {"token": "7c1e9a52-0000-4000-8000-000000000001"},
                  body={"projectName": project, "projectVersion": version, "autoCreate": True,
                        "bom": base64.b64encode(sbom).decode("ascii")})
    write_fixture(directory, "GET", f"{DTRACK_URL}/api/v1/bom/token/7c1e9a52-0000-4000-8000-000000000001",
                  {"processing": False})
    uuid = "0b7a3c9e-0000-4000-8000-0000000000aa"
    write_fixture(directory, "GET", f"{DTRACK_URL}/api/v1/project/lookup", {"uuid": uuid, "name": project},
                  params={"name": project, "version": version})
    rows = []
    for i, e in enumerate(entries):
        if i % 7 == 3:
            continue  # missed
        comp = {"name": e.component.name, "group": e.component.group, "version": e.version.raw,
                "purl": _purl((e.component, e.version))}
        cve = _cve(e)
        vuln = {"vulnId": cve or e.vuln.value, "source": "NVD" if cve else "GITHUB",
                "aliases": [{"ghsaId": _ghsa(e)}] if cve and _ghsa(e) else []}
        rows.append({"component": comp, "vulnerability": vuln, "analysis": {"isSuppressed": False}})
    dup = entries[0]
    rows.append({"component": {"name": dup.component.name, "version": dup.version.raw,
                               "purl": _purl((dup.component, dup.version))},
                 "vulnerability": {"vulnId": _ghsa(dup), "source": "GITHUB", "aliases": [{"cveId": _cve(dup)}]}})
    rows.append({"component": {"name": "mystery-lib", "version": "1.0"},
                 "vulnerability": {"vulnId": "CVE-2020-0001", "source": "NVD"}})
    rows.append({"component": {"name": "log4j-core", "group": "org.apache.logging.log4j", "version": "2.17.0",
                               "purl": _purl((log4j_extra, "2.17.0"))},
                 "vulnerability": {"vulnId": "CVE-2021-44832", "source": "NVD",
                                   "aliases": [{"ghsaId": "GHSA-8489-44mv-ggj8"}]}})
    write_fixture(directory, "GET", f"{DTRACK_URL}/api/v1/finding/project/{uuid}", rows)
    expected["dtrack"] = {"raw": len(rows), "skipped": 2}

    # GitHub: one GraphQL lookup per coordinate; advisories carry vulnerable ranges
    gh_nodes: dict[tuple, list[dict]] = {}
    for comp, _ in coords:
        key = comp.key
        if key in gh_nodes:
            continue
        nodes = []
        for adv in ADVISORIES:
            for eco, name, ranges, _ in adv.affected:
                if eco != comp.ecosystem.value or name.lower() != comp.coordinate.lower():
                    continue
                for intro, fixed in ranges:
                    rng = f">= {intro}, < {fixed}" if intro != "0" else f"< {fixed}"
                    nodes.append({"advisory": {"ghsaId": adv.id,
                                               "identifiers": [{"type": "GHSA", "value": adv.id}] +
                                               [{"type": "CVE", "value": a} for a in adv.aliases if a.startswith("CVE-")],
                                               "withdrawnAt": None},
                                  "vulnerableVersionRange": rng,
                                  "package": {"name": name, "ecosystem": comp.ecosystem.value.upper()}})
        if comp.coordinate == "vite":
            nodes.append({"advisory": {"ghsaId": "GHSA-wwww-xxxx-yyyy", "identifiers": [], "withdrawnAt":
                                       "2025-01-01T00:00:00Z"},
                          "vulnerableVersionRange": "< 99.0.0", "package": {"name": "vite", "ecosystem": "NPM"}})
        if comp.coordinate == "requests":
            nodes.append({"advisory": {"ghsaId": "GHSA-zzzz-zzzz-zzzz", "identifiers": [], "withdrawnAt": None},
                          "vulnerableVersionRange": "~= not a range", "package": {"name": "requests",
                                                                                  "ecosystem": "PIP"}})
        gh_nodes[key] = nodes
        # two pages for log4j so cursor handling is exercised
        if comp.ecosystem is Ecosystem.MAVEN and len(nodes) > 2:
            write_fixture(directory, "POST", GITHUB_GRAPHQL, {"data": {"securityVulnerabilities": {
                "nodes": nodes[:2], "pageInfo": {"hasNextPage": True, "endCursor": "Y3Vyc29yOjI="}}}},
                body=request_body(comp))
            write_fixture(directory, "POST", GITHUB_GRAPHQL, {"data": {"securityVulnerabilities": {
                "nodes": nodes[2:], "pageInfo": {"hasNextPage": False, "endCursor": None}}}},
                body=request_body(comp, "Y3Vyc29yOjI="))
        else:
            write_fixture(directory, "POST", GITHUB_GRAPHQL, {"data": {"securityVulnerabilities": {
                "nodes": nodes, "pageInfo": {"hasNextPage": False, "endCursor": None}}}},
                body=request_body(comp))
    expected["github"] = {"bad_range_per_requests_coordinate": 1}

    # OSS Index: fixed-size batches of purls
    purls = [_purl(c) for c in coords]
    for chunk in batches(purls, OSS_BATCH):
        report = []
        for p in chunk:
            vulns = []
            for e in entries:
                if _purl((e.component, e.version)) == p and _cve(e) and hash_pick(e, "oss", 3):
                    vulns.append({"id": f"sonatype-{_cve(e).lower()}", "cve": _cve(e), "cvssScore": 9.0,
                                  "title": f"[{_cve(e)}] vulnerability"})
            report.append({"coordinates": p, "reference": f"https://ossindex.sonatype.org/component/{p}",
                           "vulnerabilities": vulns})
        write_fixture(directory, "POST", f"{OSS_INDEX_URL}/api/v3/component-report", report,
                      body={"coordinates": chunk})

    # Snyk: packageName/packageManager pairs, one project that cannot be mapped
    snyk_vulns = []
    for i, e in enumerate(entries):
        if i % 5 == 4:
            continue
        manager = {"Maven": "maven", "npm": "npm", "NuGet": "nuget", "PyPI": "pip"}[e.ecosystem.value]
        ids = {"CVE": sorted(c.value for c in e.cves), "GHSA": [_ghsa(e)] if _ghsa(e) else []}
        snyk_vulns.append({"id": f"SNYK-{e.ecosystem.value.upper()}-{abs(hash_int(e.vuln.value)) % 10**7}",
                           "identifiers": ids, "packageName": e.component.coordinate, "version": e.version.raw,
                           "packageManager": manager, "title": "Vulnerability"})
    snyk_vulns.append({"id": "SNYK-GOLANG-1", "identifiers": {"CVE": ["CVE-2023-0001"]},
                       "packageName": "golang.org/x/net", "version": "0.1.0", "packageManager": "golang"})
    snyk_doc = {"ok": False, "vulnerabilities": snyk_vulns, "packageManager": "cyclonedx",
                "dependencyCount": len(coords)}
    write_command_fixture(directory, ["snyk", *SBOM_ARGV], {"sbom": sbom},
                          json.dumps(snyk_doc, indent=2, sort_keys=True), returncode=1)
    expected["snyk"] = {"raw": len(snyk_vulns), "skipped": 1}

    # Trivy: purl-keyed rows with FixedVersion, grouped by ecosystem
    results = []
    for eco in ECOSYSTEMS:
        rows = []
        for e in (x for x in entries if x.ecosystem is eco):
            fixed = _fixed_for(e)
            rows.append({"VulnerabilityID": _cve(e) or e.vuln.value, "VendorIDs": [_ghsa(e)] if _ghsa(e) else [],
                         "PkgName": e.component.coordinate, "InstalledVersion": e.version.raw,
                         "FixedVersion": fixed, "PkgIdentifier": {"PURL": _purl((e.component, e.version))}})
        if eco is Ecosystem.PYPI:
            rows.append({"VulnerabilityID": "CVE-2099-0001", "PkgName": "requests", "InstalledVersion": "2.32.3"})
        if rows:
            results.append({"Target": f"{eco.value} packages", "Class": "lang-pkgs", "Vulnerabilities": rows})
    trivy_doc = {"SchemaVersion": 2, "ArtifactName": "sbom.cdx.json", "ArtifactType": "cyclonedx", "Results": results}
    write_command_fixture(directory, ["trivy", *TRIVY_ARGV], {"sbom": sbom},
                          json.dumps(trivy_doc, indent=2, sort_keys=True))
    expected["trivy"] = {"raw": sum(len(r["Vulnerabilities"]) for r in results), "skipped": 1}
    return expected


def _fixed_for(entry: GroundTruthEntry) -> str:
    for adv in ADVISORIES:
        if adv.id != entry.vuln.value:
            continue
        for eco, name, ranges, _ in adv.affected:
            fixes = [f for _, f in ranges if f]
            return ", ".join(fixes)
    return ""


def hash_int(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def hash_pick(entry: GroundTruthEntry, salt: str, modulo: int) -> bool:
    """Deterministic pseudo-random subset: keeps roughly (modulo-1)/modulo of the entries."""
    return hash_int(f"{salt}|{entry.key}") % modulo != 0


# ================================================================ appendix corpus

TOOLS = ("dtrack", "github", "oss-index", "snyk", "trivy")
ECO_NAMES = ("Maven", "npm", "NuGet", "PyPI")

# per tool and ecosystem: (TP, FP_GT) on the earlier snapshot, then on the later one
COUNTS_S0 = {
    "dtrack": {"Maven": (250, 193), "npm": (250, 40), "NuGet": (235, 0), "PyPI": (172, 89)},
    "github": {"Maven": (233, 375), "npm": (250, 133), "NuGet": (250, 103), "PyPI": (215, 320)},
    "oss-index": {"Maven": (136, 52), "npm": (79, 1), "NuGet": (204, 12), "PyPI": (195, 172)},
    "snyk": {"Maven": (204, 314), "npm": (211, 60), "NuGet": (250, 3), "PyPI": (237, 119)},
    "trivy": {"Maven": (240, 193), "npm": (250, 40), "NuGet": (237, 3), "PyPI": (234, 90)},
}
COUNTS_S1 = {
    "dtrack": {"Maven": (250, 193), "npm": (250, 60), "NuGet": (235, 0), "PyPI": (173, 97)},
    "github": {"Maven": (233, 375), "npm": (250, 193), "NuGet": (250, 103), "PyPI": (216, 304)},
    "oss-index": {"Maven": (136, 52), "npm": (99, 1), "NuGet": (204, 7), "PyPI": (197, 180)},
    "snyk": {"Maven": (204, 314), "npm": (211, 80), "NuGet": (250, 3), "PyPI": (240, 142)},
    "trivy": {"Maven": (250, 193), "npm": (250, 60), "NuGet": (237, 3), "PyPI": (241, 100)},
}
# pooled discordant pairs over one repeat: (tool A, tool B) -> (A only, B only)
DISCORDANT = {
    ("oss-index", "trivy"): (6, 353), ("github", "oss-index"): (365, 31), ("oss-index", "snyk"): (29, 317),
    ("dtrack", "oss-index"): (343, 50), ("dtrack", "trivy"): (16, 70), ("snyk", "trivy"): (36, 95),
    ("github", "snyk"): (97, 51), ("dtrack", "github"): (47, 88), ("github", "trivy"): (35, 48),
    ("dtrack", "snyk"): (96, 91),
}
# sum over instances of (tools detecting the instance)^2, one repeat
SUM_ROW_SQUARES = 19396

# dataset shape of the earlier snapshot: components, CVE-backed entries, distinct CVEs
SHAPE = {"Maven": (99, 240, 42), "npm": (66, 231, 19), "NuGet": (189, 250, 36), "PyPI": (76, 203, 92)}

VITE_VERSIONS = ["0.1.0", "0.1.1", "0.1.2", "0.2.0", "0.3.0", "0.3.1", "0.3.2", "0.4.0", "0.5.0", "0.5.1",
                 "0.5.2", "0.5.3", "0.6.0", "0.6.1", "0.7.0", "0.8.0", "0.8.1", "0.9.0", "0.9.1", "0.10.0"]

# (component, version, id, aliases)
PYPI_REMOVED = [
    ("aiohttp", "3.9.5", "GHSA-fh55-r93g-j68g", ["CVE-2025-69230"]),
    ("aiohttp", "3.9.5", "GHSA-g84x-mcqj-x9qq", ["CVE-2025-69229"]),
    ("aiohttp", "3.9.5", "GHSA-jj3x-wxrx-4x23", ["CVE-2025-69227"]),
    ("aiohttp", "3.9.5", "GHSA-mqqc-3gqh-h2x8", ["CVE-2025-69225"]),
    ("cryptography", "46.0.4", "GHSA-m959-cc7f-wv43", ["CVE-2026-34073"]),
    ("cryptography", "46.0.4", "GHSA-r6ph-v2qm-q3c2", ["CVE-2026-26007"]),
    ("jwcrypto", "1.5.4", "GHSA-j857-7rvv-vj97", ["CVE-2024-28102"]),
    ("pillow", "9.4.0", "GHSA-3f63-hfp8-52jq", ["CVE-2023-50447"]),
    ("pillow", "9.5.0", "GHSA-j7hp-h8jx-5ppr", ["CVE-2023-4863"]),
    ("pillow", "9.5.0", "PYSEC-2023-175", []),
    ("pillow", "9.5.0", "PYSEC-2023-227", ["CVE-2023-44271"]),
    ("werkzeug", "3.1.5", "GHSA-29vq-vm6x", ["CVE-2026-27199"]),
]
PYPI_ADDED = [
    ("aiohttp", "3.9.5", "GHSA-2vrm-gr82-f7m5", ["CVE-2026-34514"]),
    ("aiohttp", "3.9.5", "GHSA-3wq7-rqq7-wx6j", ["CVE-2026-34517"]),
    ("aiohttp", "3.9.5", "GHSA-63hf-3vf5-4wqf", ["CVE-2026-34520"]),
    ("aiohttp", "3.9.5", "GHSA-966j-vmvw-g2g9", ["CVE-2026-34518"]),
    ("cryptography", "46.0.5", "GHSA-p423-j2cm-9vmq", ["CVE-2026-39892"]),
    ("cryptography", "46.0.6", "GHSA-p423-j2cm-9vmq", ["CVE-2026-39892"]),
    ("jwcrypto", "1.5.5", "GHSA-fjrm-76x2-c4q4", ["CVE-2026-39373"]),
    ("jwcrypto", "1.5.6", "GHSA-fjrm-76x2-c4q4", ["CVE-2026-39373"]),
    ("poetry", "2.3.1", "GHSA-2599-h6xx-hpxp", ["CVE-2026-34591"]),
    ("poetry", "2.3.2", "GHSA-2599-h6xx-hpxp", ["CVE-2026-34591"]),
    ("tornado", "6.5.4", "GHSA-fqwm-6jpj-5wxc", ["CVE-2026-35536"]),
    ("tornado", "6.5b1", "GHSA-fqwm-6jpj-5wxc", ["CVE-2026-35536"]),
]
# entries present in both snapshots that keep removed CVEs alive in PyPI
PYPI_STAYING = [
    ("cryptography", "46.0.3", "GHSA-r6ph-v2qm-q3c2", ["CVE-2026-26007"]),
    ("jwcrypto", "1.5.3", "GHSA-j857-7rvv-vj97", ["CVE-2024-28102"]),
    ("pillow", "9.4.0", "PYSEC-2023-227", ["CVE-2023-44271"]),
    ("pillow", "9.3.0", "GHSA-3f63-hfp8-52jq", ["CVE-2023-50447"]),
]
NPM_REMOVED_ID = ("GHSA-vg6x-rcgg-rjx6", ["CVE-2025-24010"])
NPM_ADDED_ID = ("GHSA-4w7w-66w2-5vf9", ["CVE-2026-39365"])
# the one CVE shared between two ecosystems
NUGET_SHARED = ("SkiaSharp", "2.88.5", "GHSA-j7hp-h8jx-5ppr", ["CVE-2023-4863"])

NAMED_COMPONENTS = {
    "Maven": ["org.springframework:spring-expression", LOG4J],
    "npm": ["vite", "esbuild"],
    "NuGet": ["Microsoft.Data.SqlClient", "Microsoft.AspNetCore.Identity", "SkiaSharp"],
    "PyPI": ["requests", "keras", "aiohttp", "cryptography", "jwcrypto", "pillow", "werkzeug", "poetry", "tornado"],
}
# version prefix for filler entries on named components
FILLER_PREFIX = {"aiohttp": "3.8.", "cryptography": "41.0.", "jwcrypto": "1.4.", "pillow": "8.4.",
                 "werkzeug": "2.3.", "poetry": "1.8.", "tornado": "6.3.", "vite": "5.0.", "SkiaSharp": "2.80."}

_GHSA_ALPHABET = "23456789cfghjmpqrvwx"


def synth_ghsa(tag: str) -> str:
    h = hash_int("ghsa|" + tag)
    chars = []
    for _ in range(12):
        h, r = divmod(h, len(_GHSA_ALPHABET))
        chars.append(_GHSA_ALPHABET[r])
    s = "".join(chars)
    return f"GHSA-{s[:4]}-{s[4:8]}-{s[8:]}"


def _entry(eco: str, comp: str, version: str, vid: str, aliases, retrieved: str) -> GroundTruthEntry:
    return GroundTruthEntry.build(canonicalize_component(eco, comp), version, vid, aliases,
                                  parse_timestamp(retrieved))


def _component_names(eco: str, n: int) -> list[str]:
    names = list(NAMED_COMPONENTS[eco])
    i = 0
    while len(names) < n:
        i += 1
        if eco == "Maven":
            names.append(f"org.example.lib{i:03d}:module-{i:03d}")
        elif eco == "NuGet":
            names.append(f"Example.Package{i:03d}")
        elif eco == "npm":
            names.append(f"example-pkg-{i:03d}")
        else:
            names.append(f"example-dist-{i:03d}")
    return names


def build_s0(rng: random.Random) -> list[GroundTruthEntry]:
    ts = "2026-03-28T09:00:00Z"
    out: list[GroundTruthEntry] = []
    for eco in ECO_NAMES:
        n_comp, n_cvef, n_cves = SHAPE[eco]
        named: list[tuple] = []
        if eco == "npm":
            named = [("vite", v, *NPM_REMOVED_ID) for v in VITE_VERSIONS]
        elif eco == "NuGet":
            named = [NUGET_SHARED]
        elif eco == "PyPI":
            named = PYPI_REMOVED + PYPI_STAYING
        named_cves = {a for *_, aliases in named for a in aliases}
        named_cvef = sum(1 for *_, aliases in named if aliases)
        comps = _component_names(eco, n_comp)
        filler = 250 - len(named)
        # every component without a named entry needs at least one filler entry
        has_named = {c for c, *_ in named}
        per_comp = {c: (0 if c in has_named else 1) for c in comps}
        # poetry, tornado, werkzeug and the like must stay present once their named entries change
        for c in ("werkzeug", "poetry", "tornado", "aiohttp", "vite", "SkiaSharp"):
            if c in per_comp:
                per_comp[c] = max(per_comp[c], 1)
        remaining = filler - sum(per_comp.values())
        weights = [1.0 / (1 + i) ** 0.7 for i in range(len(comps))]
        for c in rng.choices(comps, weights=weights, k=remaining):
            per_comp[c] += 1
        # filler CVEs are numbered per ecosystem so no two ecosystems share one by accident
        base = 10000 * (1 + ECO_NAMES.index(eco))
        pool = [f"CVE-2019-{base + 1000 + 7 * i}" for i in range(n_cves - len(named_cves))]
        assert len(set(pool)) == len(pool) and not set(pool) & named_cves
        filler_cvef = n_cvef - named_cvef
        slots = []
        for c in comps:
            prefix = FILLER_PREFIX.get(c, "1.")
            count = per_comp[c]
            n_versions = min(10, max(1, -(-count // rng.randint(2, 6))))
            for j in range(count):
                v = j % n_versions
                version = f"{prefix}{v}" if c in FILLER_PREFIX else f"1.{v}.0"
                slots.append((c, version))
        slots.sort(key=lambda s: (s[0], s[1]))
        cve_slots = set(rng.sample(range(len(slots)), filler_cvef))
        k = 0
        for idx, (c, version) in enumerate(slots):
            if idx in cve_slots:
                cve = pool[k % len(pool)]
                k += 1
                out.append(_entry(eco, c, version, synth_ghsa(cve), [cve], ts))
            else:
                vid = (f"PYSEC-2024-{100 + idx}" if eco == "PyPI" and idx % 2 else synth_ghsa(f"{eco}|{idx}"))
                out.append(_entry(eco, c, version, vid, [], ts))
        for c, version, vid, aliases in named:
            out.append(_entry(eco, c, version, vid, aliases, ts))
    return out


def build_s1(s0: list[GroundTruthEntry]) -> list[GroundTruthEntry]:
    ts = "2026-04-10T09:00:00Z"
    removed = {("PyPI", canonicalize_component("PyPI", c).key, v, vid) for c, v, vid, _ in PYPI_REMOVED}
    removed |= {("npm", canonicalize_component("npm", "vite").key, v, NPM_REMOVED_ID[0]) for v in VITE_VERSIONS}
    out = []
    gained = False
    for e in s0:
        if e.key in removed:
            continue
        if not gained and e.ecosystem is Ecosystem.PYPI and not e.cves and e.vuln.value.startswith("PYSEC-2024"):
            # an advisory without CVE gains a CVE alias already used elsewhere in the ecosystem
            used_here = {c.value for x in s0 if x.coordinate == e.coordinate for c in x.cves}
            cve = next(c.value for x in s0 if x.ecosystem is Ecosystem.PYPI and x.key not in removed
                       for c in sorted(x.cves) if c.value not in used_here and c.value.startswith("CVE-2019-"))
            e = GroundTruthEntry.build(e.component, e.version, e.vuln, [*e.aliases, cve], e.retrieved_at)
            gained = True
        out.append(GroundTruthEntry.build(e.component, e.version, e.vuln, e.aliases, parse_timestamp(ts)))
    for c, v, vid, aliases in PYPI_ADDED:
        out.append(_entry("PyPI", c, v, vid, aliases, ts))
    for v in VITE_VERSIONS:
        out.append(_entry("npm", "vite", v, NPM_ADDED_ID[0], NPM_ADDED_ID[1], ts))
    return out


def solve_patterns() -> Optional[dict[str, list[int]]]:
    """Per ecosystem, how many instances show each of the 32 detect/miss patterns over the five tools.

    Constraints: 250 instances per ecosystem, per-tool true positives, pooled pairwise discordance
    and the sum of squared row totals. Returns None when no integer solution exists.
    """
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp

    patterns = list(range(32))

    def bit(p, tool):
        return (p >> TOOLS.index(tool)) & 1

    n = len(ECO_NAMES) * 32
    rows, lo, hi = [], [], []

    def add(coeffs, value):
        rows.append(coeffs)
        lo.append(value)
        hi.append(value)

    for ei, eco in enumerate(ECO_NAMES):
        row = np.zeros(n)
        row[ei * 32:(ei + 1) * 32] = 1
        add(row, 250)
        for tool in TOOLS:
            row = np.zeros(n)
            for p in patterns:
                row[ei * 32 + p] = bit(p, tool)
            add(row, COUNTS_S0[tool][eco][0])
    for (a, b), (n10, n01) in DISCORDANT.items():
        for want, target in (((1, 0), n10), ((0, 1), n01)):
            row = np.zeros(n)
            for ei in range(len(ECO_NAMES)):
                for p in patterns:
                    if (bit(p, a), bit(p, b)) == want:
                        row[ei * 32 + p] = 1
            add(row, target)
    row = np.zeros(n)
    for ei in range(len(ECO_NAMES)):
        for p in patterns:
            row[ei * 32 + p] = bin(p).count("1") ** 2
    add(row, SUM_ROW_SQUARES)
    # a mild preference for patterns where detections agree keeps the matrix realistic
    cost = np.array([0.0 if bin(p).count("1") in (0, 5) else 1.0 for _ in ECO_NAMES for p in patterns])
    res = milp(cost, constraints=LinearConstraint(np.array(rows), lo, hi), integrality=np.ones(n),
               bounds=Bounds(0, 250))
    if res.x is None:
        return None
    x = np.round(res.x).astype(int)
    return {eco: list(x[ei * 32:(ei + 1) * 32]) for ei, eco in enumerate(ECO_NAMES)}


def _finding(tool: str, e: GroundTruthEntry) -> dict:
    return NormalizedFinding(ToolId.parse(tool), e.ecosystem, e.component, e.version, e.vuln, e.aliases).to_dict()


_FP_VERSION = {"Maven": "{v}-{i}", "npm": "{v}-fp.{i}", "NuGet": "{v}-fp{i}", "PyPI": "{v}.post{i}"}


def _fp_findings(tool: str, eco: str, count: int, entries: list[GroundTruthEntry], tag: str) -> list[dict]:
    """Findings that match no entry: unknown advisories on input coordinates, or versions outside the input."""
    coords = sorted({e.coordinate: e for e in entries}.values(), key=lambda e: e.key)
    out = []
    for i in range(count):
        base = coords[(i * 7) % len(coords)]
        outside = i % 3 == 0
        version = _FP_VERSION[eco].format(v=base.version.raw, i=i) if outside else base.version.raw
        f = NormalizedFinding(ToolId.parse(tool), base.ecosystem, base.component, VersionRef(version),
                              VulnId.parse(synth_ghsa(f"fp|{tag}|{tool}|{eco}|{i}")), in_input=not outside)
        out.append(f.to_dict())
    return out


def write_findings(directory: Path, s0: list[GroundTruthEntry], s1: list[GroundTruthEntry],
                   patterns: Optional[dict[str, list[int]]], rng: random.Random) -> None:
    by_eco0 = {eco: sorted((e for e in s0 if e.ecosystem.value == eco), key=lambda e: e.key) for eco in ECO_NAMES}
    detected0: dict[str, set] = {t: set() for t in TOOLS}
    for eco in ECO_NAMES:
        entries = list(by_eco0[eco])
        rng.shuffle(entries)
        if patterns is not None:
            i = 0
            for p, count in enumerate(patterns[eco]):
                for e in entries[i:i + count]:
                    for t in TOOLS:
                        if (p >> TOOLS.index(t)) & 1:
                            detected0[t].add(e.key)
                i += count
        else:
            for t in TOOLS:
                for e in entries[:COUNTS_S0[t][eco][0]]:
                    detected0[t].add(e.key)

    s0_keys = {e.key for e in s0}
    s1_keys = {e.key for e in s1}
    for t in TOOLS:
        lines0, lines1 = [], []
        for eco in ECO_NAMES:
            entries0 = by_eco0[eco]
            lines0 += [_finding(t, e) for e in entries0 if e.key in detected0[t]]
            lines0 += _fp_findings(t, eco, COUNTS_S0[t][eco][1], entries0, "s0")

            entries1 = sorted((e for e in s1 if e.ecosystem.value == eco), key=lambda e: e.key)
            keep = [e for e in entries1 if e.key in detected0[t]]
            # prefer newly added entries when a tool gains detections
            fresh = sorted((e for e in entries1 if e.key not in detected0[t]), key=lambda e: (e.key in s0_keys, e.key))
            target = COUNTS_S1[t][eco][0]
            chosen = keep[:target] + fresh[:max(0, target - len(keep))]
            assert len(chosen) == target, (t, eco)
            lines1 += [_finding(t, e) for e in chosen]
            lines1 += _fp_findings(t, eco, COUNTS_S1[t][eco][1], entries1, "s1")
            assert all(e.key in s1_keys for e in chosen)
        for name, lines in (("s0", lines0), ("s1", lines1)):
            path = directory / "findings" / name / f"{t}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            lines.sort(key=lambda d: (d["ecosystem"], json.dumps(d["component"], sort_keys=True), d["version"],
                                      d["vuln"]))
            path.write_text("".join(canonical_json(d).decode("utf-8") + "\n" for d in lines), encoding="utf-8")


def build_appendix(directory: Path) -> dict:
    rng = random.Random(20260328)
    s0 = build_s0(rng)
    s1 = build_s1(s0)
    snap0 = Snapshot.from_entries(s0, created_at=parse_timestamp("2026-03-28T09:00:00Z"))
    snap1 = Snapshot.from_entries(s1, created_at=parse_timestamp("2026-04-10T09:00:00Z"))
    save_snapshot(snap0, directory / "s0")
    save_snapshot(snap1, directory / "s1")
    patterns = solve_patterns()
    if patterns is None:
        print("warning: no consistent detection-pattern matrix; tools detect independent prefixes", file=sys.stderr)
    else:
        (directory / "patterns.json").write_text(json.dumps({k: [int(v) for v in vs] for k, vs in patterns.items()},
                                                            indent=1) + "\n", encoding="utf-8")
    write_findings(directory, s0, s1, patterns, rng)
    return {"s0": snap0.digest, "s1": snap1.digest, "patterns": patterns is not None}


# ================================================================ main

def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(ROOT / "tests" / "fixtures"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    for name in ("replay", "replay-drift", "appendix"):
        if (out / name).exists():
            shutil.rmtree(out / name)

    snap = record_build(out / "replay", ADVISORIES)
    expected = record_tools(out / "replay", snap)
    (out / "replay" / "expected-tools.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n",
                                                        encoding="utf-8")
    drift = record_build(out / "replay-drift", ADVISORIES + [DRIFT_ADVISORY])
    assert drift.digest != snap.digest and len(drift) == len(snap) + 1
    summary = {"replay": snap.digest, "replay-drift": drift.digest, "appendix": build_appendix(out / "appendix")}
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
