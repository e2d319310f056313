"""Ground-truth construction: registry versions -> OSV lookups -> balanced snapshot."""

from __future__ import annotations

import hashlib
import json
import logging
import statistics
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .clients import OsvClient, RegistryClient, RegistryRelease
from .errors import DataError, UsageError
from .model import (
    ECOSYSTEMS,
    ComponentRef,
    Ecosystem,
    GroundTruthEntry,
    VersionRef,
    canonical_json,
    canonical_vuln,
    canonicalize_component,
    format_timestamp,
    parse_timestamp,
    sort_entries,
)

log = logging.getLogger(__name__)

# Fallback component list when a config names none.
DEFAULT_COMPONENTS: dict[Ecosystem, tuple[str, ...]] = {
    Ecosystem.MAVEN: ("org.springframework:spring-expression", "org.apache.logging.log4j:log4j-core"),
    Ecosystem.NPM: ("esbuild", "vite"),
    Ecosystem.NUGET: ("Microsoft.Data.SqlClient", "Microsoft.AspNetCore.Identity"),
    Ecosystem.PYPI: ("requests", "keras"),
}


@dataclass(frozen=True)
class BuildConfig:
    components: Mapping[Ecosystem, tuple[ComponentRef, ...]]
    version_cap: int = 10
    date_window: Optional[tuple[datetime, datetime]] = None
    target_entries: Mapping[Ecosystem, int] = field(default_factory=lambda: {e: 250 for e in ECOSYSTEMS})
    include_prereleases: bool = False
    per_version_advisory_cap: Optional[int] = None
    # Per-ecosystem override of version_cap.
    version_caps: Mapping[Ecosystem, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.version_cap < 1 or any(c < 1 for c in self.version_caps.values()):
            raise UsageError("version cap must be at least 1")
        if self.date_window is not None and self.date_window[0] > self.date_window[1]:
            raise UsageError("date window start is after its end")
        if any(t < 0 for t in self.target_entries.values()):
            raise UsageError("target entry counts must be non-negative")
        if self.per_version_advisory_cap is not None and self.per_version_advisory_cap < 1:
            raise UsageError("per-version advisory cap must be at least 1")

    def cap_for(self, ecosystem: Ecosystem) -> int:
        return self.version_caps.get(ecosystem, self.version_cap)

    def target_for(self, ecosystem: Ecosystem) -> int:
        return self.target_entries.get(ecosystem, 0)

    def to_dict(self) -> dict:
        return {
            "components": {e.value: [c.coordinate for c in comps] for e, comps in sorted(self.components.items())},
            "version_cap": self.version_cap,
            "version_caps": {e.value: c for e, c in sorted(self.version_caps.items())},
            "date_window": None if self.date_window is None else [format_timestamp(t) for t in self.date_window],
            "target_entries": {e.value: t for e, t in sorted(self.target_entries.items())},
            "include_prereleases": self.include_prereleases,
            "per_version_advisory_cap": self.per_version_advisory_cap,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BuildConfig":
        comps_raw = data.get("components")
        if comps_raw is None:
            comps_raw = {e.value: list(names) for e, names in DEFAULT_COMPONENTS.items()}
        components = {}
        for eco_name, names in comps_raw.items():
            eco = Ecosystem.parse(eco_name)
            components[eco] = tuple(canonicalize_component(eco, n) for n in names)
        window = data.get("date_window")
        if window is not None:
            window = (parse_timestamp(window[0]), parse_timestamp(window[1]))
        targets = data.get("target_entries", 250)
        if isinstance(targets, int):
            targets = {e: targets for e in components}
        else:
            targets = {Ecosystem.parse(k): int(v) for k, v in targets.items()}
        return cls(
            components=components,
            version_cap=int(data.get("version_cap", 10)),
            version_caps={Ecosystem.parse(k): int(v) for k, v in (data.get("version_caps") or {}).items()},
            date_window=window,
            target_entries=targets,
            include_prereleases=bool(data.get("include_prereleases", False)),
            per_version_advisory_cap=data.get("per_version_advisory_cap"),
        )


@dataclass(frozen=True)
class EcosystemStats:
    ecosystem: str
    unique_components: int
    osv_entries: int
    cve_backed_findings: int
    distinct_cves: int
    comp_per_osv: float
    cvef_per_osv: float
    v_share: float
    c_share: float
    max_c: int
    avg_c: float
    min_c: int
    med_c: float
    max_cv: int
    avg_cv: float
    min_cv: int
    med_cv: float


@dataclass(frozen=True)
class SnapshotStats:
    rows: tuple[EcosystemStats, ...]
    total: EcosystemStats
    # Sum convention (per-ecosystem CVE counts added up) lives in total.distinct_cves.
    global_distinct_cves: int

    def row(self, ecosystem: "Ecosystem | str") -> EcosystemStats:
        name = Ecosystem.parse(ecosystem).value
        for r in self.rows:
            if r.ecosystem == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "total": asdict(self.total),
            "global_distinct_cves": self.global_distinct_cves,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SnapshotStats":
        return cls(
            rows=tuple(EcosystemStats(**r) for r in data["rows"]),
            total=EcosystemStats(**data["total"]),
            global_distinct_cves=int(data["global_distinct_cves"]),
        )


@dataclass(frozen=True)
class Snapshot:
    entries: tuple[GroundTruthEntry, ...]
    config: Optional[BuildConfig] = None
    created_at: Optional[datetime] = None
    digest: str = ""
    stats: Optional[SnapshotStats] = None

    @classmethod
    def from_entries(cls, entries: Iterable[GroundTruthEntry], config: Optional[BuildConfig] = None,
                     created_at: Optional[datetime] = None) -> "Snapshot":
        unique: dict[tuple, GroundTruthEntry] = {}
        for entry in entries:
            unique.setdefault(entry.key, entry)
        ordered = tuple(sort_entries(unique.values()))
        return cls(ordered, config, created_at, hash_entries(ordered), compute_stats(ordered))

    def __len__(self) -> int:
        return len(self.entries)

    def coordinates(self) -> list[tuple[ComponentRef, VersionRef]]:
        """Unique (component, version) pairs in canonical order."""
        seen: dict[tuple, tuple[ComponentRef, VersionRef]] = {}
        for e in self.entries:
            seen.setdefault(e.coordinate, (e.component, e.version))
        return [seen[k] for k in sorted(seen)]

    def by_ecosystem(self, ecosystem: Ecosystem) -> list[GroundTruthEntry]:
        return [e for e in self.entries if e.ecosystem is ecosystem]


# ---------------------------------------------------------------- selection

def _even_indices(n: int, k: int) -> list[int]:
    if n <= k:
        return list(range(n))
    return [(i * n) // k for i in range(k)]


def select_versions(component: ComponentRef, releases: Sequence[RegistryRelease], cfg: BuildConfig) -> list[VersionRef]:
    """Pick the versions of ``component`` that feed OSV lookups, oldest first.

    ``releases`` must already be sorted ascending by ecosystem order.
    """
    survivors = []
    for rel in releases:
        if rel.yanked:
            continue
        if rel.version.prerelease and not cfg.include_prereleases:
            continue
        if cfg.date_window is not None:
            ts = rel.version.released_at
            if ts is None or not (cfg.date_window[0] <= ts <= cfg.date_window[1]):
                continue
        survivors.append(rel.version)
    cap = cfg.cap_for(component.ecosystem)
    if component.ecosystem is Ecosystem.NUGET:
        return [survivors[i] for i in _even_indices(len(survivors), cap)]
    return survivors[-cap:] if len(survivors) > cap else survivors


# ---------------------------------------------------------------- building

def build_snapshot(cfg: BuildConfig, osv: OsvClient, registry: RegistryClient,
                   created_at: Optional[datetime] = None) -> Snapshot:
    """Run the full collection for every configured ecosystem.

    Any client error propagates, so a snapshot is either complete or absent.
    """
    collected: list[GroundTruthEntry] = []
    for eco in ECOSYSTEMS:
        components = list(cfg.components.get(eco, ()))
        target = cfg.target_for(eco)
        if not components or target == 0:
            continue
        listings = registry.list_many(components)
        items = [(comp, v) for comp, rels in zip(components, listings) for v in select_versions(comp, rels, cfg)]
        log.info("%s: %d components, %d versions selected", eco, len(components), len(items))
        if not items:
            continue
        eco_entries: list[GroundTruthEntry] = []
        seen: set[tuple] = set()
        for (comp, version), records in osv.query_batch(items):
            admitted = 0
            for rec in records:
                vuln, aliases = canonical_vuln(rec.id, rec.aliases, rec.id)
                entry = GroundTruthEntry.build(comp, version, vuln, aliases, rec.fetched_at)
                if entry.key in seen:
                    continue
                seen.add(entry.key)
                eco_entries.append(entry)
                admitted += 1
                if cfg.per_version_advisory_cap is not None and admitted >= cfg.per_version_advisory_cap:
                    break
            if len(eco_entries) >= target:
                break
        collected.extend(balance(eco_entries, target))
    return Snapshot.from_entries(collected, cfg, created_at or datetime.now(timezone.utc))


def balance(entries: Sequence[GroundTruthEntry], target: int) -> list[GroundTruthEntry]:
    """Keep the first ``target`` entries in collection order."""
    return list(entries[:target])


# ---------------------------------------------------------------- hashing

def hash_entries(entries: Iterable[GroundTruthEntry]) -> str:
    ordered = sort_entries(entries)
    payload = canonical_json([e.to_dict(with_retrieved_at=False) for e in ordered])
    return hashlib.sha256(payload).hexdigest()


def hash_snapshot(snapshot: Snapshot) -> str:
    return hash_entries(snapshot.entries)


# ---------------------------------------------------------------- statistics

def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _freq(counts: Iterable[int]) -> tuple[int, float, int, float]:
    values = list(counts)
    if not values:
        return 0, 0.0, 0, 0.0
    return max(values), sum(values) / len(values), min(values), float(statistics.median(values))


def _row(name: str, entries: Sequence[GroundTruthEntry], total_entries: int, total_components: int,
         distinct_cves: Optional[int] = None) -> EcosystemStats:
    components = Counter(e.component for e in entries)
    comp_versions = Counter((e.component, e.version.raw) for e in entries)
    cve_backed = sum(1 for e in entries if e.cves)
    cves = {c.value for e in entries for c in e.cves}
    n = len(entries)
    max_c, avg_c, min_c, med_c = _freq(components.values())
    max_cv, avg_cv, min_cv, med_cv = _freq(comp_versions.values())
    return EcosystemStats(
        ecosystem=name,
        unique_components=len(components),
        osv_entries=n,
        cve_backed_findings=cve_backed,
        distinct_cves=len(cves) if distinct_cves is None else distinct_cves,
        comp_per_osv=_ratio(len(components), n),
        cvef_per_osv=_ratio(cve_backed, n),
        v_share=100.0 * _ratio(n, total_entries),
        c_share=100.0 * _ratio(len(components), total_components),
        max_c=max_c, avg_c=avg_c, min_c=min_c, med_c=med_c,
        max_cv=max_cv, avg_cv=avg_cv, min_cv=min_cv, med_cv=med_cv,
    )


def compute_stats(entries: Iterable[GroundTruthEntry]) -> SnapshotStats:
    entries = list(entries)
    grouped: dict[Ecosystem, list[GroundTruthEntry]] = defaultdict(list)
    for e in entries:
        grouped[e.ecosystem].append(e)
    total_entries = len(entries)
    total_components = len({e.component for e in entries})
    rows = tuple(
        _row(eco.value, grouped[eco], total_entries, total_components) for eco in ECOSYSTEMS if grouped.get(eco)
    )
    cve_sum = sum(r.distinct_cves for r in rows)
    total = _row("TOTAL", entries, total_entries, total_components, distinct_cves=cve_sum)
    global_cves = len({c.value for e in entries for c in e.cves})
    return SnapshotStats(rows, total, global_cves)


# ---------------------------------------------------------------- persistence

ENTRIES_FILE = "entries.jsonl"
STATS_FILE = "stats.json"
MANIFEST_FILE = "manifest.json"


def entries_jsonl(entries: Iterable[GroundTruthEntry]) -> str:
    return "".join(canonical_json(e.to_dict()).decode("utf-8") + "\n" for e in sort_entries(entries))


def save_snapshot(snapshot: Snapshot, directory: "str | Path") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / ENTRIES_FILE).write_text(entries_jsonl(snapshot.entries), encoding="utf-8")
    stats = snapshot.stats or compute_stats(snapshot.entries)
    (directory / STATS_FILE).write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    manifest = {
        "digest": snapshot.digest,
        "created_at": format_timestamp(snapshot.created_at),
        "entry_count": len(snapshot.entries),
        "config": snapshot.config.to_dict() if snapshot.config else None,
    }
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return directory


def read_entries(path: "str | Path") -> list[GroundTruthEntry]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(GroundTruthEntry.from_dict(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def load_snapshot(path: "str | Path") -> Snapshot:
    """Load from a snapshot directory or a bare entries JSONL file."""
    path = Path(path)
    entries_path = path / ENTRIES_FILE if path.is_dir() else path
    entries = read_entries(entries_path)
    config = created = None
    manifest_path = entries_path.parent / MANIFEST_FILE
    if path.is_dir() and manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        created = parse_timestamp(manifest.get("created_at"))
        if manifest.get("config"):
            config = BuildConfig.from_dict(manifest["config"])
    snapshot = Snapshot.from_entries(entries, config, created)
    if path.is_dir() and manifest_path.exists():
        recorded = json.loads(manifest_path.read_text(encoding="utf-8")).get("digest")
        if recorded and recorded != snapshot.digest:
            raise DataError(f"snapshot at {path} does not match its manifest digest")
    return snapshot

