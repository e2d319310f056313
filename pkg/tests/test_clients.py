import pytest

from scabench.clients import OsvClient, RegistryClient
from scabench.errors import FixtureMissError, NotFoundError
from scabench.model import VersionRef, canonicalize_component
from scabench.transport import Transport

from conftest import REPLAY


def _transport(gen, page_size=2):
    upstream = gen.Upstream(gen.PACKAGES, gen.ADVISORIES, page_size=page_size)
    return Transport(session=upstream, clock=lambda: gen.FIXED_CLOCK), upstream


def test_pagination_collects_every_page(fixture_gen):
    t, _ = _transport(fixture_gen, page_size=1)
    log4j = canonicalize_component("Maven", fixture_gen.LOG4J)
    [(_, records)] = OsvClient(t).query_batch([(log4j, VersionRef("2.14.1"))])
    assert [r.id.value for r in records] == sorted(
        ["GHSA-jfh8-c2jp-5v3q", "GHSA-7rjr-3q55-vv33", "GHSA-p6xc-xr62-6r2g", "GHSA-8489-44mv-ggj8"])
    assert all(r.fetched_at == fixture_gen.FIXED_CLOCK for r in records)
    assert any(a.value == "CVE-2021-44228" for r in records for a in r.aliases)


def test_batch_split_is_invisible(fixture_gen):
    req = canonicalize_component("PyPI", "requests")
    vite = canonicalize_component("npm", "vite")
    versions = ["2.30.0", "2.31.0", "2.32.3", "9.9.9"]
    items = [(req if i % 2 else vite, VersionRef(versions[i % 4] if i % 2 else "4.5.1")) for i in range(300)]
    results = []
    for size in (7, 100, 300):
        t, _ = _transport(fixture_gen)
        results.append(OsvClient(t, batch_size=size).query_batch(items))
    assert results[0] == results[1] == results[2]
    assert len(results[0]) == 300


def test_query_batch_fetches_each_record_once(fixture_gen):
    t, upstream = _transport(fixture_gen)
    vite = canonicalize_component("npm", "vite")
    OsvClient(t, concurrency=1).query_batch([(vite, VersionRef(v)) for v in ("4.5.0", "4.5.1", "5.0.10")])
    fetches = [line for line in upstream.log if "/vulns/" in line]
    assert len(fetches) == len(set(fetches)) == 2


def test_missing_record_is_not_found(fixture_gen):
    t, _ = _transport(fixture_gen)
    with pytest.raises(NotFoundError):
        OsvClient(t).get_vuln("GHSA-none-none-none")


def test_pypi_marks_yanked(fixture_gen):
    t, _ = _transport(fixture_gen)
    rels = RegistryClient(t).list_versions(canonicalize_component("PyPI", "requests"))
    by = {r.version.raw: r for r in rels}
    assert by["2.32.0"].yanked and not by["2.32.1"].yanked
    assert by["3.0.0.dev0"].version.prerelease
    assert [r.version.raw for r in rels][-2:] == ["2.32.4", "3.0.0.dev0"]


def test_nuget_second_page_and_sentinel(fixture_gen):
    t, _ = _transport(fixture_gen)
    rels = RegistryClient(t).list_versions(canonicalize_component("NuGet", "Microsoft.Data.SqlClient"))
    by = {r.version.raw: r for r in rels}
    assert set(by) == {"5.1.0", "5.1.1", "5.2.0-preview1", "5.1.2", "5.1.3", "5.1.4", "5.1.5"}
    assert by["5.1.5"].yanked and by["5.1.5"].version.released_at is None
    assert by["5.2.0-preview1"].version.prerelease
    assert [r.version.raw for r in rels][-1] == "5.2.0-preview1"


def test_maven_timestamps_optional(fixture_gen):
    comp = canonicalize_component("Maven", fixture_gen.LOG4J)
    t, _ = _transport(fixture_gen)
    with_ts = {r.version.raw: r.version.released_at for r in RegistryClient(t).list_versions(comp)}
    assert with_ts["2.0-beta9"] is None and with_ts["2.17.1"].year == 2021
    t, upstream = _transport(fixture_gen)
    without = RegistryClient(t, maven_timestamps=False).list_versions(comp)
    assert all(r.version.released_at is None for r in without)
    assert not any("search.maven.org" in line for line in upstream.log)


def test_npm_unknown_package(fixture_gen):
    t, _ = _transport(fixture_gen)
    with pytest.raises(NotFoundError):
        RegistryClient(t).list_versions(canonicalize_component("npm", "left-pad"))


def test_list_many_keeps_order(fixture_gen):
    t, _ = _transport(fixture_gen)
    comps = [canonicalize_component("npm", "vite"), canonicalize_component("PyPI", "requests"),
             canonicalize_component("NuGet", "Newtonsoft.Json")]
    out = RegistryClient(t, concurrency=3).list_many(comps)
    assert [rels[0].component for rels in out] == comps


def test_replay_corpus_serves_clients_offline(no_network):
    t = Transport.replay(REPLAY)
    rels = RegistryClient(t).list_versions(canonicalize_component("npm", "vite"))
    assert len(rels) == 7
    with pytest.raises(FixtureMissError):
        RegistryClient(t).list_versions(canonicalize_component("npm", "react"))
