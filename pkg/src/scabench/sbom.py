"""Package URLs and deterministic CycloneDX 1.5 documents."""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass
from typing import Optional
from urllib.parse import quote, unquote

from .errors import CoordinateError, DataError
from .groundtruth import Snapshot
from .model import ComponentRef, Ecosystem, VersionRef, canonicalize_component, format_timestamp

PURL_TYPES = {
    Ecosystem.MAVEN: "maven",
    Ecosystem.NPM: "npm",
    Ecosystem.PYPI: "pypi",
    Ecosystem.NUGET: "nuget",
}
_TYPE_TO_ECOSYSTEM = {v: k for k, v in PURL_TYPES.items()}

CYCLONEDX_SPEC_VERSION = "1.5"
TOOL_NAME = "scabench"
TOOL_VERSION = "0.1.0"


def _enc(segment: str) -> str:
    return quote(segment, safe="")


@dataclass(frozen=True)
class PackageUrl:
    type: str
    name: str
    version: Optional[str] = None
    namespace: Optional[str] = None

    def __str__(self) -> str:
        out = f"pkg:{self.type}/"
        if self.namespace:
            out += "/".join(_enc(seg) for seg in self.namespace.split("/")) + "/"
        out += _enc(self.name)
        if self.version is not None:
            out += "@" + _enc(self.version)
        return out

    @classmethod
    def parse(cls, text: str) -> "PackageUrl":
        if not text or not text.startswith("pkg:"):
            raise CoordinateError(f"not a package URL: {text!r}")
        rest = text[4:].lstrip("/")
        rest = rest.split("#", 1)[0].split("?", 1)[0]
        if "/" not in rest:
            raise CoordinateError(f"package URL without name: {text!r}")
        purl_type, rest = rest.split("/", 1)
        version = None
        if "@" in rest:
            # '@' inside the namespace is always percent-encoded, so the last one splits off the version
            rest, version = rest.rsplit("@", 1)
            version = unquote(version)
        segments = [unquote(s) for s in rest.strip("/").split("/") if s]
        if not segments:
            raise CoordinateError(f"package URL without name: {text!r}")
        namespace = "/".join(segments[:-1]) or None
        return cls(purl_type.lower(), segments[-1], version, namespace)

    def ecosystem(self) -> Ecosystem:
        try:
            return _TYPE_TO_ECOSYSTEM[self.type]
        except KeyError:
            raise DataError(f"purl type {self.type!r} is outside the supported ecosystems") from None

    def component(self) -> ComponentRef:
        eco = self.ecosystem()
        if eco is Ecosystem.MAVEN:
            if not self.namespace:
                raise CoordinateError(f"Maven purl without group: {self}")
            return canonicalize_component(eco, f"{self.namespace}:{self.name}")
        name = f"{self.namespace}/{self.name}" if self.namespace else self.name
        return canonicalize_component(eco, name)


def to_purl(ecosystem: Ecosystem, component: ComponentRef, version: "VersionRef | str | None") -> PackageUrl:
    raw = version.raw if isinstance(version, VersionRef) else version
    purl_type = PURL_TYPES[ecosystem]
    if ecosystem is Ecosystem.MAVEN:
        if not component.group:
            raise CoordinateError(f"Maven component {component.name} has no group")
        return PackageUrl(purl_type, component.name, raw, component.group)
    if ecosystem is Ecosystem.NPM and component.name.startswith("@") and "/" in component.name:
        scope, name = component.name.split("/", 1)
        return PackageUrl(purl_type, name, raw, scope)
    return PackageUrl(purl_type, component.name, raw)


def from_purl(text: str) -> tuple[Ecosystem, ComponentRef, VersionRef]:
    purl = PackageUrl.parse(text)
    if purl.version is None:
        raise CoordinateError(f"purl without version: {text}")
    return purl.ecosystem(), purl.component(), VersionRef(purl.version)


def _serial(digest: str) -> str:
    return f"urn:uuid:{uuid.uuid5(uuid.NAMESPACE_URL, 'scabench:snapshot:' + digest)}"


def sbom_document(snapshot: Snapshot) -> dict:
    if not snapshot.entries:
        raise DataError("cannot emit an SBOM for an empty snapshot")
    components = {}
    for comp, version in snapshot.coordinates():
        purl = str(to_purl(comp.ecosystem, comp, version))
        entry = {"type": "library", "bom-ref": purl}
        if comp.group:
            entry["group"] = comp.group
        entry["name"] = comp.name
        entry["version"] = version.raw
        entry["purl"] = purl
        components[purl] = entry
    stamps = [e.retrieved_at for e in snapshot.entries if e.retrieved_at is not None]
    timestamp = format_timestamp(max(stamps)) if stamps else "1970-01-01T00:00:00Z"
    return {
        "bomFormat": "CycloneDX",
        "specVersion": CYCLONEDX_SPEC_VERSION,
        "serialNumber": _serial(snapshot.digest),
        "version": 1,
        "metadata": {
            "timestamp": timestamp,
            "tools": {"components": [{"type": "application", "name": TOOL_NAME, "version": TOOL_VERSION}]},
            "component": {
                "type": "application",
                "bom-ref": f"ground-truth-{snapshot.digest[:12]}",
                "name": f"ground-truth-{snapshot.digest[:12]}",
                "version": snapshot.digest[:12],
            },
        },
        "components": [components[p] for p in sorted(components)],
    }


def emit_sbom(snapshot: Snapshot) -> bytes:
    return (json.dumps(sbom_document(snapshot), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def sbom_filename(snapshot: Snapshot) -> str:
    return f"sbom-{snapshot.digest[:12]}.cdx.json"


def sbom_coordinates(document: "bytes | dict") -> list[tuple[Ecosystem, ComponentRef, VersionRef]]:
    if isinstance(document, (bytes, str)):
        document = json.loads(document)
    return [from_purl(c["purl"]) for c in document.get("components", ())]
