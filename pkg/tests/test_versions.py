import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from packaging.version import Version

from scabench.errors import UsageError, VersionParseError
from scabench.model import ECOSYSTEMS, Ecosystem
from scabench.versions import (
    compare,
    event_range,
    is_prerelease,
    parse_range,
    parse_version,
    render_range,
    satisfies,
    sort_versions,
)

# ---------------------------------------------------------------- generators


def _npm(rng):
    v = ".".join(str(rng.randint(0, 3)) for _ in range(3))
    if rng.random() < 0.5:
        v += "-" + rng.choice(["alpha", "beta", "rc", "rc.1", "rc.2", "alpha.1", "1", "2", "0a", "beta.11", "x.7"])
    if rng.random() < 0.2:
        v += "+" + rng.choice(["build", "sha.5114f85", "001"])
    return v


def _nuget(rng):
    v = ".".join(str(rng.randint(0, 3)) for _ in range(rng.randint(1, 4)))
    if rng.random() < 0.5:
        v += "-" + rng.choice(["alpha", "Alpha", "beta", "BETA.2", "preview1", "preview.1", "rc.1", "1"])
    return v


def _pypi(rng):
    v = ("1!" if rng.random() < 0.05 else "") + ".".join(str(rng.randint(0, 3)) for _ in range(rng.randint(1, 3)))
    if rng.random() < 0.4:
        v += rng.choice(["a", "b", "rc", "alpha", "c"]) + str(rng.randint(0, 2))
    if rng.random() < 0.3:
        v += ".post" + str(rng.randint(0, 2))
    if rng.random() < 0.3:
        v += ".dev" + str(rng.randint(0, 2))
    if rng.random() < 0.1:
        v += "+" + rng.choice(["local", "ubuntu.1", "7"])
    return v


def _maven(rng):
    parts = [str(rng.randint(0, 3)) for _ in range(rng.randint(1, 3))]
    v = ".".join(parts)
    # several qualifier segments, so strings, sublists and zeros meet at the same position
    for _ in range(rng.randint(0, 3)):
        v += rng.choice(["-", ".", ""]) + rng.choice(["alpha", "beta-1", "rc1", "RC2", "SNAPSHOT", "sp", "ga", "m3",
                                                      "final", "a1", "foo", "1", "0", "cr", "x"])
    return v


GENERATORS = {Ecosystem.NPM: _npm, Ecosystem.NUGET: _nuget, Ecosystem.PYPI: _pypi, Ecosystem.MAVEN: _maven}
N_CASES = 10_000


def _corpus(eco, seed, n):
    rng = random.Random(seed)
    return [parse_version(eco, GENERATORS[eco](rng)) for _ in range(n)]


# ---------------------------------------------------------------- fixed examples


def test_prerelease_chain():
    chain = ["1.4.0-alpha", "1.4.0-beta", "1.4.0-rc.1", "1.4.0"]
    for eco in (Ecosystem.NPM, Ecosystem.NUGET):
        parsed = [parse_version(eco, s) for s in chain]
        assert all(compare(a, b) == -1 for a, b in zip(parsed, parsed[1:]))
    for base in ("0.0.1", "2.10.3", "10.0.0"):
        parsed = [parse_version("npm", f"{base}{suffix}") for suffix in ("-alpha", "-beta", "-rc.1", "")]
        assert parsed == sorted(parsed)


@pytest.mark.parametrize("version, expr, expected", [
    ("1.4.1", "<1.4.2", True),
    ("1.4.2", "<1.4.2", False),
    ("1.2.0", ">=1.2.0,<1.3.5", True),
    ("1.3.4", ">= 1.2.0, < 1.3.5", True),
    ("1.3.5", ">=1.2.0,<1.3.5", False),
    ("2.0.1", "<=2.0.1", True),
    ("2.0.2", "<=2.0.1", False),
    ("3.0.0", ">=3.0.0", True),
    ("2.9.9", ">=3.0.0", False),
])
def test_range_rows(version, expr, expected):
    assert satisfies("npm", version, expr) is expected


def test_parse_examples():
    v = parse_version("npm", "1.4.0-alpha.1")
    assert v.release == (1, 4, 0) and v.prerelease == ("alpha", 1)
    t = parse_version("PyPI", "6.5b1")
    assert t.release == (6, 5) and t.prerelease == ("b", 1) and t.is_prerelease
    assert compare(t, parse_version("PyPI", "6.5.4")) == -1
    assert parse_version("Maven", "1.0").prerelease is None
    assert compare(parse_version("npm", "2.0.0"), parse_version("npm", "2.0.0")) == 0


@pytest.mark.parametrize("eco, raw, pre", [
    ("npm", "1.4.0-rc.1", True), ("Maven", "2.3.1", False), ("PyPI", "6.5b1", True), ("PyPI", "3.0.0.dev0", True),
    ("PyPI", "1.0.post1", False), ("Maven", "2.0-beta9", True), ("Maven", "1.0-SNAPSHOT", True),
    ("Maven", "1.0-sp1", False), ("NuGet", "5.2.0-preview1", True), ("NuGet", "13.0.1", False),
])
def test_is_prerelease(eco, raw, pre):
    assert is_prerelease(eco, raw) is pre


def test_build_metadata_ignored():
    assert parse_version("npm", "1.0.0+a") == parse_version("npm", "1.0.0+b")
    assert parse_version("NuGet", "1.0.0+a") == parse_version("NuGet", "1.0.0")


def test_nuget_legacy_and_case():
    assert parse_version("NuGet", "1.0") == parse_version("NuGet", "1.0.0.0")
    assert parse_version("NuGet", "1.0.0-BETA") == parse_version("NuGet", "1.0.0-beta")
    assert parse_version("NuGet", "1.0.0.1") > parse_version("NuGet", "1.0.0")


@pytest.mark.parametrize("eco, bad", [("npm", "1.0"), ("npm", "01.0.0"), ("NuGet", "1.2.3.4.5"),
                                      ("PyPI", "not a version"), ("Maven", "1 0"), ("npm", "")])
def test_parse_errors(eco, bad):
    with pytest.raises(VersionParseError) as err:
        parse_version(eco, bad)
    assert str(Ecosystem.parse(eco)) in str(err.value)


def test_cross_ecosystem_comparison_is_usage_error():
    with pytest.raises(UsageError):
        compare(parse_version("npm", "1.0.0"), parse_version("NuGet", "1.0.0"))


def test_empty_range_is_usage_error():
    with pytest.raises(UsageError):
        satisfies("npm", "1.0.0", "")


# Ordering lists from Maven's own ComparableVersion test suite, ascending.
MAVEN_QUALIFIER_ORDER = ["1-alpha2snapshot", "1-alpha2", "1-alpha-123", "1-beta-2", "1-beta123", "1-m2", "1-m11",
                         "1-rc", "1-cr2", "1-rc123", "1-SNAPSHOT", "1", "1-sp", "1-sp2", "1-sp123", "1-abc",
                         "1-def", "1-pom-1", "1-1-snapshot", "1-1", "1-2", "1-123"]
MAVEN_NUMBER_ORDER = ["2.0", "2-1", "2.0.a", "2.0.0.a", "2.0.2", "2.0.123", "2.1.0", "2.1-a", "2.1b", "2.1-c", "2.1-1",
                      "2.1.0.1", "2.2", "2.123", "11.a2", "11.a11", "11.b2", "11.b11", "11.m2", "11.m11", "11",
                      "11.a", "11b", "11c", "11m"]
MAVEN_EQUAL = [["1", "1.0", "1.0.0", "1-0", "1.0-0", "1-ga", "1.0.final", "1-release", "1.ga", "1.0-GA"],
               ["1a", "1-a", "1.0-a", "1.0.0-a", "1.0a", "1.0.0a", "1A"],
               ["1x", "1-x", "1.0-x", "1.0.0-x", "1.0x", "1X"],
               ["1a1", "1-alpha-1", "1A1"], ["1b2", "1-beta-2"], ["1m3", "1-milestone-3"],
               ["1cr", "1rc", "1-CR"]]


@pytest.mark.parametrize("order", [MAVEN_QUALIFIER_ORDER, MAVEN_NUMBER_ORDER])
def test_maven_comparable_version_order(order):
    parsed = [parse_version("Maven", s) for s in order]
    for i, a in enumerate(parsed):
        for b in parsed[i + 1:]:
            assert compare(a, b) == -1, (a.raw, b.raw)


@pytest.mark.parametrize("group", MAVEN_EQUAL)
def test_maven_equivalences(group):
    parsed = [parse_version("Maven", s) for s in group]
    assert all(p == parsed[0] and hash(p) == hash(parsed[0]) for p in parsed)


@pytest.mark.parametrize("low, mid, high", [
    ("1.0.alpha", "1", "1.sp"),
    ("1-alpha", "1", "1.sp"),
    ("0ga-cr", "0", "0-a"),
])
def test_maven_cycles_are_broken(low, mid, high):
    # each triple is cyclic under upstream's kind-first rule
    a, b, c = (parse_version("Maven", s) for s in (low, mid, high))
    assert a < b < c and a < c


def test_sort_versions():
    assert sort_versions("PyPI", ["2.32.4", "3.0.0.dev0", "2.32.0", "2.4"]) == ["2.4", "2.32.0", "2.32.4", "3.0.0.dev0"]


# ---------------------------------------------------------------- ordering laws


@pytest.mark.parametrize("eco", ECOSYSTEMS, ids=str)
def test_ordering_laws_pairs(eco):
    a = _corpus(eco, 1, N_CASES)
    b = _corpus(eco, 2, N_CASES)
    for x, y in zip(a, b):
        assert compare(x, x) == 0
        c = compare(x, y)
        assert compare(y, x) == -c
        if c == 0:
            assert hash(x) == hash(y)


@pytest.mark.parametrize("eco", ECOSYSTEMS, ids=str)
def test_ordering_laws_triples(eco):
    xs, ys, zs = (_corpus(eco, s, N_CASES) for s in (3, 4, 5))
    for x, y, z in zip(xs, ys, zs):
        if compare(x, y) <= 0 and compare(y, z) <= 0:
            assert compare(x, z) <= 0
        if compare(x, y) == 0 and compare(y, z) == 0:
            assert compare(x, z) == 0


@pytest.mark.parametrize("eco", ECOSYSTEMS, ids=str)
def test_sorted_corpus_is_monotone(eco):
    ordered = sorted(_corpus(eco, 6, 2000))
    assert all(compare(a, b) <= 0 for a, b in zip(ordered, ordered[1:]))


def test_pypi_random_corpus_matches_packaging():
    rng = random.Random(7)
    raws = [_pypi(rng) for _ in range(N_CASES)]
    for a, b in zip(raws, raws[1:]):
        ours = compare(parse_version("PyPI", a), parse_version("PyPI", b))
        va, vb = Version(a), Version(b)
        assert ours == (va > vb) - (va < vb), (a, b)
    assert all(parse_version("PyPI", r).is_prerelease == Version(r).is_prerelease for r in raws)


pep440 = st.builds(
    lambda epoch, rel, pre, post, dev, local: f"{epoch}{rel}{pre}{post}{dev}{local}",
    st.sampled_from(["", "", "", "1!", "2!"]),
    st.lists(st.integers(0, 12), min_size=1, max_size=4).map(lambda p: ".".join(map(str, p))),
    st.one_of(st.just(""), st.tuples(st.sampled_from(["a", "b", "rc", "alpha", "beta", "c", "pre", "preview"]),
                                     st.sampled_from(["", ".", "-", "_"]),
                                     st.integers(0, 5)).map(lambda t: f"{t[1]}{t[0]}{t[2]}")),
    st.one_of(st.just(""), st.integers(0, 3).map(lambda n: f".post{n}"), st.integers(0, 3).map(lambda n: f"-{n}"),
              st.just(".rev1")),
    st.one_of(st.just(""), st.integers(0, 3).map(lambda n: f".dev{n}"), st.just("dev")),
    st.one_of(st.just(""), st.sampled_from(["+abc", "+1", "+ubuntu.2", "+1.a", "+a.1"])),
)


@settings(max_examples=500)
@given(pep440, pep440)
def test_pep440_order_matches_packaging(a, b):
    ours = compare(parse_version("PyPI", a), parse_version("PyPI", b))
    va, vb = Version(a), Version(b)
    assert ours == (va > vb) - (va < vb)


# ---------------------------------------------------------------- ranges

npm_versions = st.builds(lambda a, b, c, pre: f"{a}.{b}.{c}{pre}", st.integers(0, 4), st.integers(0, 4),
                         st.integers(0, 4), st.sampled_from(["", "", "-alpha", "-rc.1"]))


@given(npm_versions, npm_versions, npm_versions)
def test_event_range_equals_comparators(intro, fixed, v):
    events = event_range("npm", intro, fixed)
    expected = satisfies("npm", v, f">={intro}") and satisfies("npm", v, f"<{fixed}")
    assert satisfies("npm", v, events) is expected


@given(npm_versions, npm_versions)
def test_event_range_unbounded_below(fixed, v):
    assert satisfies("npm", v, event_range("npm", "0", fixed)) is satisfies("npm", v, f"<{fixed}")


@given(npm_versions, npm_versions)
def test_last_affected_is_inclusive(last, v):
    assert satisfies("npm", v, event_range("npm", "0", last_affected=last)) is satisfies("npm", v, f"<={last}")


@given(st.lists(st.tuples(st.sampled_from(["<", "<=", ">", ">=", "="]), npm_versions), min_size=1, max_size=3),
       npm_versions)
def test_render_round_trip(clauses, v):
    text = ",".join(op + ver for op, ver in clauses)
    r = parse_range("npm", text)
    again = parse_range("npm", render_range(r))
    assert [(c.op, c.bound) for c in again.clauses] == [(c.op, c.bound) for c in r.clauses]
    assert satisfies("npm", v, again) is satisfies("npm", v, r)


@pytest.mark.parametrize("eco", ECOSYSTEMS, ids=str)
def test_version_reparse(eco):
    for v in _corpus(eco, 8, 500):
        assert parse_version(eco, str(v)) == v
