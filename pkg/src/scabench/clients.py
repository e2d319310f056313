"""OSV and package-registry clients on top of :class:`~scabench.transport.Transport`."""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Optional, Sequence
from urllib.parse import quote

from .errors import DecodeError, NotFoundError, TransportError, VersionParseError
from .model import ComponentRef, Ecosystem, VersionRef, VulnId, parse_timestamp, vuln_ids
from .transport import Response, Transport
from .versions import parse_version

log = logging.getLogger(__name__)

OSV_API = "https://api.osv.dev/v1"


@dataclass(frozen=True)
class OsvVulnRecord:
    id: VulnId
    aliases: frozenset[VulnId] = frozenset()
    affected: tuple = ()
    modified: Optional[str] = None
    fetched_at: Optional[datetime] = field(default=None, compare=False)

    @classmethod
    def from_json(cls, data: dict, fetched_at: Optional[datetime] = None) -> "OsvVulnRecord":
        if not data.get("id"):
            raise DecodeError("OSV record without id")
        return cls(
            id=VulnId.parse(data["id"]),
            aliases=vuln_ids(data.get("aliases") or ()),
            affected=tuple(data.get("affected") or ()),
            modified=data.get("modified"),
            fetched_at=fetched_at,
        )


@dataclass(frozen=True)
class RegistryRelease:
    component: ComponentRef
    version: VersionRef
    yanked: bool = False


def _map_ordered(fn, items: Sequence, concurrency: int) -> list:
    """``list(map(fn, items))`` with bounded parallelism; output keeps input order."""
    if concurrency <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(fn, items))


def _json(resp: Response, what: str) -> Any:
    try:
        return resp.json()
    except ValueError as exc:
        raise DecodeError(f"malformed JSON from {what}") from exc


class OsvClient:
    def __init__(self, transport: Transport, *, base_url: str = OSV_API, batch_size: int = 100,
                 concurrency: int = 4):
        self.transport = transport
        self.base_url = base_url.rstrip("/")
        self.batch_size = batch_size
        self.concurrency = concurrency
        self._cache: dict[str, OsvVulnRecord] = {}

    @staticmethod
    def _query(component: ComponentRef, version: VersionRef, page_token: Optional[str] = None) -> dict:
        query: dict = {
            "package": {"name": component.coordinate, "ecosystem": component.ecosystem.value},
            "version": version.raw,
        }
        if page_token:
            query["page_token"] = page_token
        return query

    def query_batch(self, items: Sequence[tuple[ComponentRef, VersionRef]]
                    ) -> list[tuple[tuple[ComponentRef, VersionRef], list[OsvVulnRecord]]]:
        """Affected-by lookups for many (component, version) pairs.

        Results align with ``items``. Each returned record is fetched in full so
        alias sets are complete; ids come back in the order OSV listed them.
        """
        items = list(items)
        if not items:
            raise ValueError("query_batch needs at least one item")
        chunks = [items[i:i + self.batch_size] for i in range(0, len(items), self.batch_size)]
        id_lists: list[list[str]] = []
        fetched: list[Optional[datetime]] = []
        for ids, ts in _map_ordered(self._run_chunk, chunks, self.concurrency):
            id_lists.extend(ids)
            fetched.extend(ts)

        wanted = sorted({i for ids in id_lists for i in ids} - set(self._cache))
        for record in _map_ordered(self.get_vuln, wanted, self.concurrency):
            self._cache[record.id.value] = record

        out = []
        for item, ids, ts in zip(items, id_lists, fetched):
            records = []
            for vid in ids:
                rec = self._cache[vid]
                records.append(OsvVulnRecord(rec.id, rec.aliases, rec.affected, rec.modified, ts))
            out.append((item, records))
        return out

    def _run_chunk(self, chunk: list[tuple[ComponentRef, VersionRef]]) -> tuple[list[list[str]], list]:
        ids: list[list[str]] = [[] for _ in chunk]
        stamps: list[Optional[datetime]] = [None] * len(chunk)
        pending = {i: None for i in range(len(chunk))}
        while pending:
            order = sorted(pending)
            body = {"queries": [self._query(*chunk[i], pending[i]) for i in order]}
            resp = self.transport.post(f"{self.base_url}/querybatch", body)
            if not resp.ok:
                raise TransportError(f"OSV querybatch returned HTTP {resp.status}")
            results = _json(resp, "OSV querybatch").get("results")
            if not isinstance(results, list) or len(results) != len(order):
                raise DecodeError("OSV querybatch result count does not match the query count")
            next_pending = {}
            for i, result in zip(order, results):
                stamps[i] = stamps[i] or resp.fetched_at
                for vuln in (result or {}).get("vulns") or ():
                    if vuln["id"] not in ids[i]:
                        ids[i].append(vuln["id"])
                token = (result or {}).get("next_page_token")
                if token:
                    next_pending[i] = token
            pending = next_pending
        return ids, stamps

    def query(self, component: ComponentRef, version: VersionRef) -> list[OsvVulnRecord]:
        """Single-item lookup through the non-batched endpoint."""
        out: list[OsvVulnRecord] = []
        token = None
        while True:
            resp = self.transport.post(f"{self.base_url}/query", self._query(component, version, token))
            if not resp.ok:
                raise TransportError(f"OSV query returned HTTP {resp.status}")
            data = _json(resp, "OSV query")
            for vuln in data.get("vulns") or ():
                out.append(OsvVulnRecord.from_json(vuln, resp.fetched_at))
            token = data.get("next_page_token")
            if not token:
                return out

    def get_vuln(self, vuln_id: str) -> OsvVulnRecord:
        if vuln_id in self._cache:
            return self._cache[vuln_id]
        resp = self.transport.get(f"{self.base_url}/vulns/{quote(vuln_id, safe='')}")
        if resp.status == 404:
            raise NotFoundError(f"OSV has no record {vuln_id}")
        if not resp.ok:
            raise TransportError(f"OSV vuln fetch returned HTTP {resp.status}")
        return OsvVulnRecord.from_json(_json(resp, f"OSV vuln {vuln_id}"), resp.fetched_at)


# ---------------------------------------------------------------- registries

class RegistryClient:
    """Version listings from npm, PyPI, Maven Central and NuGet."""

    NPM = "https://registry.npmjs.org"
    PYPI = "https://pypi.org/pypi"
    MAVEN = "https://repo1.maven.org/maven2"
    MAVEN_SEARCH = "https://search.maven.org/solrsearch/select"
    NUGET = "https://api.nuget.org/v3/registration5-semver1"

    def __init__(self, transport: Transport, *, maven_timestamps: bool = True, concurrency: int = 4):
        self.transport = transport
        self.maven_timestamps = maven_timestamps
        self.concurrency = concurrency

    def list_versions(self, component: ComponentRef) -> list[RegistryRelease]:
        fetch = {
            Ecosystem.NPM: self._npm,
            Ecosystem.PYPI: self._pypi,
            Ecosystem.MAVEN: self._maven,
            Ecosystem.NUGET: self._nuget,
        }[component.ecosystem]
        releases = fetch(component)
        return _sorted_releases(component.ecosystem, releases)

    def list_many(self, components: Sequence[ComponentRef]) -> list[list[RegistryRelease]]:
        return _map_ordered(self.list_versions, list(components), self.concurrency)

    def _get_json(self, url: str, component: ComponentRef, **kwargs) -> Any:
        resp = self.transport.get(url, **kwargs)
        if resp.status == 404:
            raise NotFoundError(f"{component} not found in registry")
        if not resp.ok:
            raise TransportError(f"registry returned HTTP {resp.status} for {url}")
        return _json(resp, url)

    def _npm(self, component: ComponentRef) -> list[RegistryRelease]:
        data = self._get_json(f"{self.NPM}/{quote(component.name, safe='@')}", component)
        versions = data.get("versions")
        if not isinstance(versions, dict):
            raise DecodeError(f"npm document for {component} has no versions map")
        times = data.get("time") or {}
        return [
            RegistryRelease(component, VersionRef(raw, parse_timestamp(times.get(raw)), False))
            for raw in versions
        ]

    def _pypi(self, component: ComponentRef) -> list[RegistryRelease]:
        data = self._get_json(f"{self.PYPI}/{component.name}/json", component)
        releases = data.get("releases")
        if not isinstance(releases, dict):
            raise DecodeError(f"PyPI document for {component} has no releases map")
        out = []
        for raw, files in releases.items():
            stamps = [parse_timestamp(f.get("upload_time_iso_8601") or f.get("upload_time")) for f in files or ()]
            stamps = [s for s in stamps if s is not None]
            yanked = bool(files) and all(f.get("yanked") for f in files)
            out.append(RegistryRelease(component, VersionRef(raw, min(stamps) if stamps else None), yanked))
        return out

    def _maven(self, component: ComponentRef) -> list[RegistryRelease]:
        path = f"{component.group.replace('.', '/')}/{component.name}"
        resp = self.transport.get(f"{self.MAVEN}/{path}/maven-metadata.xml")
        if resp.status == 404:
            raise NotFoundError(f"{component} not found on Maven Central")
        if not resp.ok:
            raise TransportError(f"Maven Central returned HTTP {resp.status}")
        try:
            root = ET.fromstring(resp.body)
        except ET.ParseError as exc:
            raise DecodeError(f"malformed maven-metadata.xml for {component}") from exc
        raws = [v.text.strip() for v in root.iter("version") if v.text and v.text.strip()]
        stamps = self._maven_stamps(component) if self.maven_timestamps else {}
        return [RegistryRelease(component, VersionRef(raw, stamps.get(raw))) for raw in dict.fromkeys(raws)]

    def _maven_stamps(self, component: ComponentRef) -> dict[str, datetime]:
        params = {"q": f"g:{component.group} AND a:{component.name}", "core": "gav", "rows": "200", "wt": "json"}
        try:
            data = self._get_json(self.MAVEN_SEARCH, component, params=params)
        except (NotFoundError, TransportError, DecodeError) as exc:
            log.info("no Maven timestamps for %s: %s", component, exc)
            return {}
        out = {}
        for doc in (data.get("response") or {}).get("docs") or ():
            if "v" in doc and "timestamp" in doc:
                out[doc["v"]] = datetime.fromtimestamp(doc["timestamp"] / 1000, tz=timezone.utc)
        return out

    def _nuget(self, component: ComponentRef) -> list[RegistryRelease]:
        index = self._get_json(f"{self.NUGET}/{component.name.lower()}/index.json", component)
        out = []
        for page in index.get("items") or ():
            leaves = page.get("items")
            if leaves is None:
                leaves = self._get_json(page["@id"], component).get("items") or ()
            for leaf in leaves:
                entry = leaf.get("catalogEntry") or {}
                raw = entry.get("version")
                if not raw:
                    raise DecodeError(f"NuGet catalog entry without version for {component}")
                published = parse_timestamp(entry.get("published"))
                if published is not None and published.year <= 1900:
                    published = None  # unlisted packages carry a 1900-01-01 sentinel
                listed = entry.get("listed", True)
                out.append(RegistryRelease(component, VersionRef(raw, published), not listed))
        return out


def _sorted_releases(ecosystem: Ecosystem, releases: Iterable[RegistryRelease]) -> list[RegistryRelease]:
    keyed = []
    seen = set()
    for rel in releases:
        if rel.version.raw in seen:
            continue
        seen.add(rel.version.raw)
        try:
            parsed = parse_version(ecosystem, rel.version.raw)
        except VersionParseError:
            log.info("skipping unparseable %s version %r of %s", ecosystem, rel.version.raw, rel.component)
            continue
        version = VersionRef(rel.version.raw, rel.version.released_at, parsed.is_prerelease)
        keyed.append((parsed, RegistryRelease(rel.component, version, rel.yanked)))
    keyed.sort(key=lambda pair: pair[0])
    return [rel for _, rel in keyed]
