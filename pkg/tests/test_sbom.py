import json
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st
from jsonschema import Draft7Validator, FormatChecker
from referencing import Registry, Resource

from scabench.cli import build_from_config
from scabench.errors import CoordinateError, DataError
from scabench.groundtruth import Snapshot
from scabench.model import Ecosystem, GroundTruthEntry, canonicalize_component
from scabench.sbom import PackageUrl, emit_sbom, from_purl, sbom_coordinates, sbom_document, to_purl

from conftest import SCHEMAS

T0 = datetime(2026, 3, 28, 12, tzinfo=timezone.utc)
SCHEMA_BASE = "http://cyclonedx.org/schema/"


def cyclonedx_validator():
    resources = []
    for name in ("spdx.SNAPSHOT.schema.json", "jsf-0.82.SNAPSHOT.schema.json"):
        resources.append((SCHEMA_BASE + name, Resource.from_contents(json.loads((SCHEMAS / name).read_text()))))
    registry = Registry().with_resources(resources)
    schema = json.loads((SCHEMAS / "bom-1.5.SNAPSHOT.schema.json").read_text())
    return Draft7Validator(schema, registry=registry, format_checker=FormatChecker())


@pytest.fixture
def snapshot(replay_config, no_network):
    return build_from_config(replay_config, T0)


def test_sbom_validates(snapshot):
    doc = json.loads(emit_sbom(snapshot))
    errors = sorted(cyclonedx_validator().iter_errors(doc), key=str)
    assert not errors, errors[0].message
    assert doc["specVersion"] == "1.5"


def test_schema_rejects_broken_document(snapshot):
    doc = sbom_document(snapshot)
    doc["components"][0]["type"] = "not-a-type"
    assert not cyclonedx_validator().is_valid(doc)


def test_sbom_byte_identical(snapshot, replay_config):
    again = build_from_config(replay_config, datetime(2030, 1, 1, tzinfo=timezone.utc))
    assert emit_sbom(snapshot) == emit_sbom(again)


def test_sbom_covers_coordinates(snapshot):
    coords = sbom_coordinates(emit_sbom(snapshot))
    assert len(coords) == len(snapshot.coordinates())
    assert {(c.key, v.raw) for _, c, v in coords} == {(c.key, v.raw) for c, v in snapshot.coordinates()}


def test_sbom_serial_follows_digest(snapshot):
    doc = sbom_document(snapshot)
    other = Snapshot.from_entries(snapshot.entries[1:])
    assert doc["serialNumber"] != sbom_document(other)["serialNumber"]
    assert doc["metadata"]["timestamp"] == "2026-03-28T12:00:00Z"


def test_empty_snapshot_has_no_sbom():
    with pytest.raises(DataError):
        emit_sbom(Snapshot.from_entries([]))


@pytest.mark.parametrize("eco, name, version, text", [
    ("npm", "vite", "0.1.0", "pkg:npm/vite@0.1.0"),
    ("npm", "@babel/core", "7.0.0", "pkg:npm/%40babel/core@7.0.0"),
    ("Maven", "org.apache.logging.log4j:log4j-core", "2.14.1",
     "pkg:maven/org.apache.logging.log4j/log4j-core@2.14.1"),
    ("PyPI", "requests", "2.31.0", "pkg:pypi/requests@2.31.0"),
    ("NuGet", "Newtonsoft.Json", "13.0.1", "pkg:nuget/Newtonsoft.Json@13.0.1"),
    ("npm", "vite", "1.0.0+build.1", "pkg:npm/vite@1.0.0%2Bbuild.1"),
])
def test_purl_examples(eco, name, version, text):
    comp = canonicalize_component(eco, name)
    purl = to_purl(Ecosystem.parse(eco), comp, version)
    assert str(purl) == text
    e, c, v = from_purl(text)
    assert (e, c, v.raw) == (Ecosystem.parse(eco), comp, version)


@pytest.mark.parametrize("bad", ["npm/vite@1", "pkg:", "pkg:npm", "pkg:maven/log4j-core@1.0", "pkg:npm/vite"])
def test_bad_purls(bad):
    with pytest.raises(CoordinateError):
        from_purl(bad)


def test_unsupported_purl_type():
    with pytest.raises(DataError):
        from_purl("pkg:golang/github.com/x/y@1.0.0")


def test_purl_qualifiers_ignored():
    assert from_purl("pkg:maven/g/a@1.0?type=jar#sub")[2].raw == "1.0"
    assert PackageUrl.parse("pkg:NPM/x@1").type == "npm"


segment = st.text(st.characters(codec="utf-8", exclude_characters="/:"), min_size=1, max_size=12).filter(
    lambda s: s.strip() == s and s not in (".", ".."))
version_text = st.text(st.characters(codec="utf-8", exclude_characters="/"), min_size=1, max_size=12).filter(
    lambda s: s.strip() == s)


@given(st.sampled_from(["npm", "PyPI", "NuGet", "Maven"]), segment, segment, version_text)
def test_purl_round_trip(eco, group, name, version):
    eco = Ecosystem.parse(eco)
    raw = f"{group}:{name}" if eco is Ecosystem.MAVEN else name
    try:
        comp = canonicalize_component(eco, raw)
    except CoordinateError:
        return
    e, c, v = from_purl(str(to_purl(eco, comp, version)))
    assert (e, c.key, v.raw) == (eco, comp.key, version)


@given(st.lists(st.tuples(st.sampled_from(["vite", "esbuild", "@scope/pkg"]), st.sampled_from(["1.0.0", "2.0.0"]),
                          st.sampled_from(["GHSA-a", "GHSA-b"])), min_size=1, max_size=10))
def test_sbom_deterministic_under_input_order(rows):
    entries = [GroundTruthEntry.build(canonicalize_component("npm", n), v, g) for n, v, g in rows]
    a = emit_sbom(Snapshot.from_entries(entries))
    b = emit_sbom(Snapshot.from_entries(list(reversed(entries))))
    assert a == b
    assert len(json.loads(a)["components"]) == len({(n, v) for n, v, _ in rows})
