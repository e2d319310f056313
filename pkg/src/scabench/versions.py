"""Per-ecosystem version grammars, ordering and comparator ranges.

Ordering works through a sort key computed once at parse time, so
``compare`` is a plain tuple comparison. The grammars:

* npm    - SemVer 2.0 (a leading ``v``/``=`` is tolerated).
* PyPI   - the Python packaging version scheme (epochs, pre/post/dev, local).
* Maven  - the ``ComparableVersion`` item-list algorithm, with cross-kind
  comparisons made transitive (see ``_maven_key``).
* NuGet  - SemVer 2.0 with up to four numeric parts; labels compare
  case-insensitively.

Range text is a comma-separated conjunction of ``<``, ``<=``, ``>``, ``>=``,
``=`` clauses. OSV-style event ranges (introduced/fixed/last_affected) are
supported as a second form and evaluated half-open.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Any, Optional

from .errors import UsageError, VersionParseError
from .model import Ecosystem


@total_ordering
@dataclass(frozen=True, eq=False)
class ParsedVersion:
    ecosystem: Ecosystem
    release: tuple[int, ...]
    prerelease: Optional[tuple] = None
    metadata: str = ""
    raw: str = ""
    sort_key: Any = field(default=None, repr=False)
    # PyPI only: a .devN segment marks a development release.
    dev: bool = False

    @property
    def is_prerelease(self) -> bool:
        return self.prerelease is not None or self.dev

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParsedVersion):
            return NotImplemented
        return compare(self, other) == 0

    def __lt__(self, other: "ParsedVersion") -> bool:
        return compare(self, other) < 0

    def __hash__(self) -> int:
        return hash((self.ecosystem, self.sort_key))

    def __str__(self) -> str:
        return self.raw


def parse_version(ecosystem: "Ecosystem | str", text: str) -> ParsedVersion:
    ecosystem = Ecosystem.parse(ecosystem)
    if text is None or not str(text).strip():
        raise VersionParseError(ecosystem, str(text), "empty version")
    parser = _PARSERS[ecosystem]
    return parser(str(text))


def compare(a: ParsedVersion, b: ParsedVersion) -> int:
    """-1, 0 or 1; both versions must come from the same ecosystem."""
    if a.ecosystem is not b.ecosystem:
        raise UsageError(f"cannot compare {a.ecosystem} version with {b.ecosystem} version")
    if a.sort_key == b.sort_key:
        return 0
    return -1 if a.sort_key < b.sort_key else 1


def is_prerelease(ecosystem: "Ecosystem | str", version: "ParsedVersion | str") -> bool:
    if isinstance(version, str):
        version = parse_version(ecosystem, version)
    return version.is_prerelease


def sort_versions(ecosystem: "Ecosystem | str", raws) -> list[str]:
    return sorted(raws, key=lambda r: parse_version(ecosystem, r).sort_key)


# ---------------------------------------------------------------- semver (npm)

_SEMVER = re.compile(
    r"^[v=]?\s*(?P<release>0|[1-9]\d*)\.(?P<minor>0|[1-9]\d*)\.(?P<patch>0|[1-9]\d*)"
    r"(?:-(?P<pre>[0-9A-Za-z-]+(?:\.[0-9A-Za-z-]+)*))?"
    r"(?:\+(?P<meta>[0-9A-Za-z-]+(?:\.[0-9A-Za-z-]+)*))?$"
)


def _identifiers(pre: str, fold_case: bool) -> tuple:
    out = []
    for part in pre.split("."):
        if part.isdigit():
            out.append(int(part))
        else:
            out.append(part.lower() if fold_case else part)
    return tuple(out)


def _pre_key(pre: Optional[tuple]) -> tuple:
    # A release sorts after all of its prereleases; numeric ids sort before
    # alphanumeric ones.
    if pre is None:
        return (1,)
    return (0, tuple((0, p, "") if isinstance(p, int) else (1, 0, p) for p in pre))


def _parse_npm(text: str) -> ParsedVersion:
    m = _SEMVER.match(text.strip())
    if not m:
        raise VersionParseError(Ecosystem.NPM, text, "not a semantic version")
    release = (int(m["release"]), int(m["minor"]), int(m["patch"]))
    pre = _identifiers(m["pre"], fold_case=False) if m["pre"] else None
    return ParsedVersion(Ecosystem.NPM, release, pre, m["meta"] or "", text, (release, _pre_key(pre)))


# ---------------------------------------------------------------- NuGet

_NUGET = re.compile(
    r"^[vV]?(?P<release>\d+(?:\.\d+){0,3})"
    r"(?:-(?P<pre>[0-9A-Za-z-]+(?:\.[0-9A-Za-z-]+)*))?"
    r"(?:\+(?P<meta>[0-9A-Za-z-]+(?:\.[0-9A-Za-z-]+)*))?$"
)


def _parse_nuget(text: str) -> ParsedVersion:
    m = _NUGET.match(text.strip())
    if not m:
        raise VersionParseError(Ecosystem.NUGET, text, "not a NuGet version")
    release = tuple(int(p) for p in m["release"].split("."))
    padded = release + (0,) * (4 - len(release))
    pre = _identifiers(m["pre"], fold_case=True) if m["pre"] else None
    return ParsedVersion(Ecosystem.NUGET, release, pre, m["meta"] or "", text, (padded, _pre_key(pre)))


# ---------------------------------------------------------------- PyPI

_PEP440 = re.compile(
    r"""^\s*v?
    (?:(?P<epoch>[0-9]+)!)?
    (?P<release>[0-9]+(?:\.[0-9]+)*)
    (?P<pre>[-_.]?(?P<pre_l>alpha|a|beta|b|preview|pre|c|rc)[-_.]?(?P<pre_n>[0-9]+)?)?
    (?P<post>(?:-(?P<post_n1>[0-9]+))|(?:[-_.]?(?P<post_l>post|rev|r)[-_.]?(?P<post_n2>[0-9]+)?))?
    (?P<dev>[-_.]?(?P<dev_l>dev)[-_.]?(?P<dev_n>[0-9]+)?)?
    (?:\+(?P<local>[a-z0-9]+(?:[-_.][a-z0-9]+)*))?
    \s*$""",
    re.VERBOSE | re.IGNORECASE,
)

_PRE_LABELS = {"a": "a", "alpha": "a", "b": "b", "beta": "b", "c": "rc", "rc": "rc", "pre": "rc", "preview": "rc"}
_PRE_RANK = {"a": 0, "b": 1, "rc": 2}
_INF = float("inf")
_NINF = float("-inf")


def _parse_pypi(text: str) -> ParsedVersion:
    m = _PEP440.match(text)
    if not m:
        raise VersionParseError(Ecosystem.PYPI, text, "not a valid Python package version")
    epoch = int(m["epoch"] or 0)
    release = tuple(int(p) for p in m["release"].split("."))
    pre = None
    if m["pre"]:
        label = _PRE_LABELS[m["pre_l"].lower()]
        pre = (label, int(m["pre_n"] or 0))
    post = None
    if m["post"]:
        post = int(m["post_n1"] or m["post_n2"] or 0)
    dev = int(m["dev_n"] or 0) if m["dev"] else None
    local = m["local"]

    trimmed = list(release)
    while len(trimmed) > 1 and trimmed[-1] == 0:
        trimmed.pop()

    # dev releases without pre/post sort before any prerelease of the same release
    if pre is None and post is None and dev is not None:
        pre_key: tuple = (_NINF,)
    elif pre is None:
        pre_key = (_INF,)
    else:
        pre_key = (_PRE_RANK[pre[0]], pre[1])
    post_key = (_NINF,) if post is None else (post,)
    dev_key = (_INF,) if dev is None else (dev,)
    if local is None:
        local_key: tuple = ((_NINF, ""),)
    else:
        local_key = tuple(
            (int(p), "") if p.isdigit() else (_NINF, p.lower()) for p in re.split(r"[-_.]", local)
        )
    key = (epoch, tuple(trimmed), pre_key, post_key, dev_key, local_key)
    return ParsedVersion(Ecosystem.PYPI, release, pre, local or "", text, key, dev=dev is not None)


# ---------------------------------------------------------------- Maven

# Qualifier order of ComparableVersion; unknown qualifiers sort after "sp".
_MAVEN_QUALIFIERS = ("alpha", "beta", "milestone", "rc", "snapshot", "", "sp")
_MAVEN_ALIASES = {"ga": "", "final": "", "release": "", "cr": "rc"}
_MAVEN_RELEASE_RANK = _MAVEN_QUALIFIERS.index("")
_MAVEN_PRE_QUALIFIERS = frozenset(_MAVEN_QUALIFIERS[:_MAVEN_RELEASE_RANK])


def _maven_qualifier(value: str, followed_by_digit: bool) -> str:
    if followed_by_digit and len(value) == 1:
        value = {"a": "alpha", "b": "beta", "m": "milestone"}.get(value, value)
    return _MAVEN_ALIASES.get(value, value)


def _qualifier_rank(value: str) -> str:
    if value in _MAVEN_QUALIFIERS:
        return str(_MAVEN_QUALIFIERS.index(value))
    return f"{len(_MAVEN_QUALIFIERS)}-{value}"


class _Item:
    """An int, a qualifier string or a sublist of the ComparableVersion parse tree."""

    __slots__ = ("kind", "value")

    INT, STR, LIST = 0, 1, 2

    def __init__(self, kind: int, value):
        self.kind = kind
        self.value = value

    def is_null(self) -> bool:
        if self.kind == _Item.INT:
            return self.value == 0
        if self.kind == _Item.STR:
            return self.value == ""
        return len(self.value) == 0

    def __repr__(self) -> str:
        return f"_Item({self.kind}, {self.value!r})"


# Upstream fixes number > list > string between items of different kinds regardless of
# how each compares with the end of the version, which makes the order cyclic
# (1.0.alpha < 1 < 1.sp < 1.0.alpha). The key below first asks on which side of
# "end of version" the remaining sequence falls and only then applies the kind order.
_KIND_RANK = {_Item.STR: 0, _Item.LIST: 1, _Item.INT: 2}
_RELEASE_RANK = str(_MAVEN_RELEASE_RANK)


def _item_side(item: _Item) -> int:
    if item.kind == _Item.INT:
        return 1 if item.value else 0
    if item.kind == _Item.STR:
        rank = _qualifier_rank(item.value)
        return (rank > _RELEASE_RANK) - (rank < _RELEASE_RANK)
    return _seq_side(item.value)


def _seq_side(items: list) -> int:
    for item in items:
        side = _item_side(item)
        if side:
            return side
    return 0


def _maven_key(items: list) -> tuple:
    side = _seq_side(items)
    if side == 0:
        return (0,)
    head = items[0]
    if head.kind == _Item.INT:
        value: Any = head.value
    elif head.kind == _Item.STR:
        value = _qualifier_rank(head.value)
    else:
        value = _maven_key(head.value)
    return (side, _KIND_RANK[head.kind], value, _maven_key(items[1:]))


def _maven_items(text: str) -> _Item:
    version = text.lower()
    root = current = _Item(_Item.LIST, [])
    stack = [root]
    is_digit = False
    start = 0

    def parse_item(digit: bool, buf: str) -> _Item:
        if digit:
            return _Item(_Item.INT, int(buf))
        return _Item(_Item.STR, _maven_qualifier(buf, False))

    def push_list() -> _Item:
        nonlocal current
        sub = _Item(_Item.LIST, [])
        current.value.append(sub)
        current = sub
        stack.append(sub)
        return sub

    for i, ch in enumerate(version):
        if ch in ".-":
            if i == start:
                current.value.append(_Item(_Item.INT, 0))
            else:
                current.value.append(parse_item(is_digit, version[start:i]))
            start = i + 1
            if ch == "-":
                push_list()
        elif ch.isdigit():
            if not is_digit and i > start:
                current.value.append(_Item(_Item.STR, _maven_qualifier(version[start:i], True)))
                start = i
                push_list()
            is_digit = True
        else:
            if is_digit and i > start:
                current.value.append(parse_item(True, version[start:i]))
                start = i
                push_list()
            is_digit = False
    if len(version) > start:
        current.value.append(parse_item(is_digit, version[start:]))

    while stack:
        _normalize(stack.pop())
    return root


def _normalize(item: _Item) -> None:
    items = item.value
    for i in range(len(items) - 1, -1, -1):
        last = items[i]
        if last.is_null():
            del items[i]
        elif last.kind != _Item.LIST:
            break


def _flatten_maven(item: _Item) -> list:
    out: list = []
    for sub in item.value:
        if sub.kind == _Item.LIST:
            out.extend(_flatten_maven(sub))
        else:
            out.append(sub.value)
    return out


_MAVEN_SHAPE = re.compile(r"^[0-9A-Za-z][0-9A-Za-z._+\-]*$")


def _parse_maven(text: str) -> ParsedVersion:
    stripped = text.strip()
    if not _MAVEN_SHAPE.match(stripped):
        raise VersionParseError(Ecosystem.MAVEN, text, "unexpected characters")
    items = _maven_items(stripped)
    flat = _flatten_maven(items)
    release = []
    for value in flat:
        if isinstance(value, int):
            release.append(value)
        else:
            break
    rest = tuple(flat[len(release):])
    pre = rest if any(isinstance(v, str) and v in _MAVEN_PRE_QUALIFIERS for v in rest) else None
    return ParsedVersion(Ecosystem.MAVEN, tuple(release), pre, "", text, _maven_key(items.value))


_PARSERS = {
    Ecosystem.NPM: _parse_npm,
    Ecosystem.NUGET: _parse_nuget,
    Ecosystem.PYPI: _parse_pypi,
    Ecosystem.MAVEN: _parse_maven,
}


# ---------------------------------------------------------------- ranges

_OPS = ("<=", ">=", "<", ">", "=")
_CLAUSE = re.compile(r"^(<=|>=|==|<|>|=)?\s*(\S.*)$")


@dataclass(frozen=True)
class Clause:
    op: str
    bound: ParsedVersion

    def holds(self, v: ParsedVersion) -> bool:
        c = compare(v, self.bound)
        return {
            "<": c < 0,
            "<=": c <= 0,
            ">": c > 0,
            ">=": c >= 0,
            "=": c == 0,
        }[self.op]

    def __str__(self) -> str:
        return f"{self.op}{self.bound.raw}"


@dataclass(frozen=True)
class VersionRange:
    ecosystem: Ecosystem
    clauses: tuple[Clause, ...] = ()
    introduced: Optional[ParsedVersion] = None
    fixed: Optional[ParsedVersion] = None
    last_affected: Optional[ParsedVersion] = None
    # An event range whose introduced event is "0" (no lower bound).
    events: bool = False

    def is_empty(self) -> bool:
        return not self.clauses and not self.events

    def as_clauses(self) -> tuple[Clause, ...]:
        if not self.events:
            return self.clauses
        out = []
        if self.introduced is not None:
            out.append(Clause(">=", self.introduced))
        if self.fixed is not None:
            out.append(Clause("<", self.fixed))
        if self.last_affected is not None:
            out.append(Clause("<=", self.last_affected))
        return tuple(out)

    def __str__(self) -> str:
        return render_range(self)


def parse_range(ecosystem: "Ecosystem | str", text: str) -> VersionRange:
    ecosystem = Ecosystem.parse(ecosystem)
    clauses = []
    for chunk in (text or "").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        m = _CLAUSE.match(chunk)
        if not m:
            raise UsageError(f"bad range clause {chunk!r}")
        op = m.group(1) or "="
        if op == "==":
            op = "="
        clauses.append(Clause(op, parse_version(ecosystem, m.group(2).strip())))
    return VersionRange(ecosystem, tuple(clauses))


def event_range(ecosystem: "Ecosystem | str", introduced: Optional[str] = None, fixed: Optional[str] = None,
                last_affected: Optional[str] = None) -> VersionRange:
    """OSV-style events; ``introduced`` of ``"0"`` or None means unbounded below."""
    ecosystem = Ecosystem.parse(ecosystem)
    lo = None if introduced in (None, "0") else parse_version(ecosystem, introduced)
    hi = None if fixed is None else parse_version(ecosystem, fixed)
    last = None if last_affected is None else parse_version(ecosystem, last_affected)
    return VersionRange(ecosystem, (), lo, hi, last, events=True)


def render_range(r: VersionRange) -> str:
    clauses = r.as_clauses()
    return ", ".join(str(c) for c in clauses)


def satisfies(ecosystem: "Ecosystem | str", version: "ParsedVersion | str", r: "VersionRange | str") -> bool:
    ecosystem = Ecosystem.parse(ecosystem)
    if isinstance(version, str):
        version = parse_version(ecosystem, version)
    if isinstance(r, str):
        r = parse_range(ecosystem, r)
    if r.is_empty():
        raise UsageError("range has no clauses")
    if r.ecosystem is not ecosystem or version.ecosystem is not ecosystem:
        raise UsageError("range and version belong to different ecosystems")
    return all(c.holds(version) for c in r.as_clauses())
