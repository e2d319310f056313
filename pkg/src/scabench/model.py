"""Domain types shared by every stage of the pipeline.

Everything here is an immutable value. Each type knows how to turn itself
into a plain dict (``to_dict``) and back (``from_dict``); :func:`canonical_json`
gives the byte form used for hashing and persistence.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable, Optional

from .errors import CoordinateError, DataError


class Ecosystem(str, enum.Enum):
    MAVEN = "Maven"
    NPM = "npm"
    NUGET = "NuGet"
    PYPI = "PyPI"

    @classmethod
    def parse(cls, value: "str | Ecosystem") -> "Ecosystem":
        if isinstance(value, Ecosystem):
            return value
        lowered = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == lowered:
                return member
        if lowered in ("pip", "python"):
            return cls.PYPI
        raise DataError(f"unknown ecosystem: {value!r}")

    def __str__(self) -> str:
        return self.value


ECOSYSTEMS: tuple[Ecosystem, ...] = (Ecosystem.MAVEN, Ecosystem.NPM, Ecosystem.NUGET, Ecosystem.PYPI)


class ToolId(str, enum.Enum):
    DTRACK = "dtrack"
    SNYK = "snyk"
    OSS_INDEX = "oss-index"
    GITHUB = "github"
    TRIVY = "trivy"
    REPLAY = "replay"

    @classmethod
    def parse(cls, value: "str | ToolId") -> "ToolId":
        if isinstance(value, ToolId):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DataError(f"unknown tool: {value!r}") from None

    def __str__(self) -> str:
        return self.value


class VulnScheme(str, enum.Enum):
    CVE = "CVE"
    GHSA = "GHSA"
    OSV = "OSV"
    OTHER = "other"


# Prefixes of OSV-native id families (e.g. PYSEC-2023-175).
_OSV_NATIVE_PREFIXES = ("PYSEC-", "GO-", "RUSTSEC-", "OSV-", "MAL-", "GSD-", "RSEC-", "PSF-")


def canonical_json(obj: Any) -> bytes:
    """UTF-8 JSON with sorted keys and no insignificant whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def format_timestamp(ts: Optional[datetime]) -> Optional[str]:
    if ts is None:
        return None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(value: Optional[str]) -> Optional[datetime]:
    if value is None or value == "":
        return None
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    # Python 3.10 fromisoformat only accepts 0, 3 or 6 fractional digits.
    match = re.match(r"^(.*T\d\d:\d\d:\d\d)\.(\d+)(.*)$", text)
    if match:
        frac = (match.group(2) + "000000")[:6]
        text = f"{match.group(1)}.{frac}{match.group(3)}"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True, eq=False)
class ComponentRef:
    """A package within one ecosystem.

    Equality and hashing go through :attr:`key`, so NuGet ids compare
    case-insensitively while the original casing stays available for display.
    """

    ecosystem: Ecosystem
    name: str
    group: Optional[str] = None

    @property
    def key(self) -> tuple[str, str, str]:
        name = self.name.lower() if self.ecosystem is Ecosystem.NUGET else self.name
        return (self.ecosystem.value, self.group or "", name)

    @property
    def coordinate(self) -> str:
        if self.ecosystem is Ecosystem.MAVEN:
            return f"{self.group}:{self.name}"
        return self.name

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ComponentRef):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __lt__(self, other: "ComponentRef") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return f"{self.ecosystem.value}/{self.coordinate}"

    def to_dict(self) -> dict:
        return {"ecosystem": self.ecosystem.value, "name": self.name, "group": self.group}

    @classmethod
    def from_dict(cls, data: dict) -> "ComponentRef":
        return cls(Ecosystem.parse(data["ecosystem"]), data["name"], data.get("group"))


_PYPI_SEPARATORS = re.compile(r"[-_.]+")


def canonicalize_component(ecosystem: "Ecosystem | str", raw_name: str) -> ComponentRef:
    ecosystem = Ecosystem.parse(ecosystem)
    name = (raw_name or "").strip()
    if not name:
        raise CoordinateError("component name must be non-empty")
    if ecosystem is Ecosystem.MAVEN:
        parts = name.split(":")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise CoordinateError(f"Maven coordinate must be group:artifact, got {raw_name!r}")
        return ComponentRef(ecosystem, parts[1].strip(), parts[0].strip())
    if ecosystem is Ecosystem.PYPI:
        return ComponentRef(ecosystem, _PYPI_SEPARATORS.sub("-", name).lower())
    if ecosystem is Ecosystem.NPM:
        return ComponentRef(ecosystem, name.lower())
    return ComponentRef(ecosystem, name)


@dataclass(frozen=True)
class VersionRef:
    raw: str
    released_at: Optional[datetime] = field(default=None, compare=False)
    prerelease: bool = field(default=False, compare=False)

    def __str__(self) -> str:
        return self.raw

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "released_at": format_timestamp(self.released_at),
            "prerelease": self.prerelease,
        }

    @classmethod
    def from_dict(cls, data: "dict | str") -> "VersionRef":
        if isinstance(data, str):
            return cls(data)
        return cls(data["raw"], parse_timestamp(data.get("released_at")), bool(data.get("prerelease", False)))


@dataclass(frozen=True, order=True)
class VulnId:
    value: str
    scheme: VulnScheme = field(compare=False, default=VulnScheme.OTHER)

    @classmethod
    def parse(cls, value: "str | VulnId") -> "VulnId":
        if isinstance(value, VulnId):
            return value
        text = str(value).strip()
        if not text:
            raise DataError("empty vulnerability identifier")
        upper = text.upper()
        if upper.startswith("CVE-"):
            scheme = VulnScheme.CVE
        elif upper.startswith("GHSA-"):
            scheme = VulnScheme.GHSA
        elif upper.startswith(_OSV_NATIVE_PREFIXES):
            scheme = VulnScheme.OSV
        else:
            scheme = VulnScheme.OTHER
        return cls(text, scheme)

    def __str__(self) -> str:
        return self.value


def vuln_ids(values: Iterable["str | VulnId"]) -> frozenset[VulnId]:
    return frozenset(VulnId.parse(v) for v in values if v)


def canonical_vuln(entry_id: VulnId, aliases: Iterable[VulnId], osv_returned: VulnId) -> tuple[VulnId, frozenset[VulnId]]:
    """Pick the id OSV returned as canonical; everything else becomes an alias."""
    pool = {entry_id, *aliases}
    if osv_returned not in pool:
        raise DataError(f"{osv_returned} is neither the record id nor one of its aliases")
    return osv_returned, frozenset(pool - {osv_returned})


class Basis(str, enum.Enum):
    EXACT = "exact"
    RANGE = "range"


@dataclass(frozen=True)
class GroundTruthEntry:
    ecosystem: Ecosystem
    component: ComponentRef
    version: VersionRef
    vuln: VulnId
    aliases: frozenset[VulnId] = frozenset()
    cves: frozenset[VulnId] = frozenset()
    retrieved_at: Optional[datetime] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.component.ecosystem is not self.ecosystem:
            raise DataError(f"component {self.component} does not belong to {self.ecosystem}")
        if any(c.scheme is not VulnScheme.CVE for c in self.cves):
            raise DataError("cves may only hold CVE identifiers")
        if not self.cves <= self.aliases | {self.vuln}:
            raise DataError(f"cves of {self.vuln} are not among its identifiers")

    @property
    def key(self) -> tuple:
        return (self.ecosystem.value, self.component.key, self.version.raw, self.vuln.value)

    @property
    def identifiers(self) -> frozenset[VulnId]:
        return self.aliases | {self.vuln}

    @property
    def coordinate(self) -> tuple:
        return (self.ecosystem.value, self.component.key, self.version.raw)

    def to_dict(self, with_retrieved_at: bool = True) -> dict:
        data = {
            "ecosystem": self.ecosystem.value,
            "component": self.component.to_dict(),
            "version": self.version.to_dict(),
            "vuln": self.vuln.value,
            "aliases": sorted(a.value for a in self.aliases),
            "cves": sorted(c.value for c in self.cves),
        }
        if with_retrieved_at:
            data["retrieved_at"] = format_timestamp(self.retrieved_at)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruthEntry":
        return cls(
            ecosystem=Ecosystem.parse(data["ecosystem"]),
            component=ComponentRef.from_dict(data["component"]),
            version=VersionRef.from_dict(data["version"]),
            vuln=VulnId.parse(data["vuln"]),
            aliases=vuln_ids(data.get("aliases", ())),
            cves=vuln_ids(data.get("cves", ())),
            retrieved_at=parse_timestamp(data.get("retrieved_at")),
        )

    @classmethod
    def build(cls, component: ComponentRef, version: "VersionRef | str", vuln: "VulnId | str",
              aliases: Iterable["str | VulnId"] = (), retrieved_at: Optional[datetime] = None) -> "GroundTruthEntry":
        """Convenience constructor that derives ``cves`` from the identifiers."""
        vuln = VulnId.parse(vuln)
        alias_set = vuln_ids(aliases) - {vuln}
        version = version if isinstance(version, VersionRef) else VersionRef(version)
        cves = frozenset(i for i in alias_set | {vuln} if i.scheme is VulnScheme.CVE)
        return cls(component.ecosystem, component, version, vuln, alias_set, cves, retrieved_at)


@dataclass(frozen=True)
class NormalizedFinding:
    tool: ToolId
    ecosystem: Ecosystem
    component: ComponentRef
    version: VersionRef
    vuln: VulnId
    aliases: frozenset[VulnId] = frozenset()
    basis: Basis = Basis.EXACT
    # Comparator text (e.g. "<1.4.2") when basis is RANGE.
    affected: Optional[str] = None
    in_input: bool = True

    @property
    def key(self) -> tuple:
        return (self.tool.value, self.ecosystem.value, self.component.key, self.version.raw, self.vuln.value)

    @property
    def identifiers(self) -> frozenset[VulnId]:
        return self.aliases | {self.vuln}

    @property
    def coordinate(self) -> tuple:
        return (self.ecosystem.value, self.component.key, self.version.raw)

    def to_dict(self) -> dict:
        return {
            "tool": self.tool.value,
            "ecosystem": self.ecosystem.value,
            "component": self.component.to_dict(),
            "version": self.version.raw,
            "vuln": self.vuln.value,
            "aliases": sorted(a.value for a in self.aliases),
            "basis": self.basis.value,
            "affected": self.affected,
            "in_input": self.in_input,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizedFinding":
        return cls(
            tool=ToolId.parse(data.get("tool", "replay")),
            ecosystem=Ecosystem.parse(data["ecosystem"]),
            component=ComponentRef.from_dict(data["component"]),
            version=VersionRef.from_dict(data["version"]),
            vuln=VulnId.parse(data["vuln"]),
            aliases=vuln_ids(data.get("aliases", ())),
            basis=Basis(data.get("basis", "exact")),
            affected=data.get("affected"),
            in_input=bool(data.get("in_input", True)),
        )


def primary_identifier(ids: Iterable["str | VulnId"]) -> tuple[VulnId, frozenset[VulnId]]:
    """Choose the identifier a finding is filed under: a CVE, else a GHSA, else the first native id."""
    parsed = sorted(vuln_ids(ids))
    if not parsed:
        raise DataError("finding carries no identifier")
    for scheme in (VulnScheme.CVE, VulnScheme.GHSA, VulnScheme.OSV, VulnScheme.OTHER):
        for candidate in parsed:
            if candidate.scheme is scheme:
                return candidate, frozenset(parsed) - {candidate}
    raise AssertionError("unreachable")


def dedupe_findings(findings: Iterable[NormalizedFinding]) -> list[NormalizedFinding]:
    """Collapse findings sharing (tool, e, c, v, u); aliases are unioned.

    Returned in canonical key order.
    """
    merged: dict[tuple, NormalizedFinding] = {}
    for finding in findings:
        prev = merged.get(finding.key)
        if prev is None:
            merged[finding.key] = finding
        elif not finding.aliases <= prev.aliases:
            merged[finding.key] = replace(prev, aliases=prev.aliases | finding.aliases)
    return [merged[k] for k in sorted(merged)]


def sort_entries(entries: Iterable[GroundTruthEntry]) -> list[GroundTruthEntry]:
    return sorted(entries, key=lambda e: e.key)
