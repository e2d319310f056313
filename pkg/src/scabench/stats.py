"""Paired significance tests over a binary detection matrix.

Cochran's Q for the omnibus question, two-sided exact McNemar for each tool
pair, Holm's step-down adjustment across the pairs. No continuity corrections.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import UsageError
from .evaluation import DetectionMatrix


@dataclass(frozen=True)
class OmnibusResult:
    q_statistic: float
    degrees_freedom: int
    p_value: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PairwiseComparison:
    tool_a: str
    tool_b: str
    n10: int
    n01: int
    p_raw: float
    p_adj: float

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_adj < alpha

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- chi-square tail

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _log_lower_series(a: float, x: float) -> float:
    """log P(a, x) by the power series; good for x < a + 1."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return math.log(total) - x + a * math.log(x) - math.lgamma(a)


def _log_upper_cf(a: float, x: float) -> float:
    """log Q(a, x) by the Legendre continued fraction (modified Lentz); good for x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.log(h) - x + a * math.log(x) - math.lgamma(a)


def log_gammaincc(a: float, x: float) -> float:
    """Natural log of the regularized upper incomplete gamma Q(a, x)."""
    if a <= 0:
        raise ValueError("shape must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        lower = math.exp(_log_lower_series(a, x))
        return math.log1p(-lower) if lower < 1.0 else -math.inf
    return _log_upper_cf(a, x)


def chi2_logsf(x: float, df: int) -> float:
    if df < 1:
        raise ValueError("degrees of freedom must be at least 1")
    if x <= 0:
        return 0.0
    return log_gammaincc(df / 2.0, x / 2.0)


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution (underflows to 0.0 far out)."""
    return math.exp(chi2_logsf(x, df))


# ---------------------------------------------------------------- tests

def cochran_q(m: "DetectionMatrix | np.ndarray") -> OmnibusResult:
    cells = np.asarray(m.cells if isinstance(m, DetectionMatrix) else m, dtype=np.int64)
    if cells.ndim != 2 or cells.shape[1] < 2:
        raise UsageError("Cochran's Q needs at least two tools")
    if cells.shape[0] < 1:
        raise UsageError("Cochran's Q needs at least one instance")
    k = cells.shape[1]
    col = cells.sum(axis=0)
    row = cells.sum(axis=1)
    n = int(row.sum())
    denom = k * n - int((row * row).sum())
    if denom == 0:
        return OmnibusResult(0.0, k - 1, 1.0)
    numer = (k - 1) * (k * int((col * col).sum()) - n * n)
    q = numer / denom
    return OmnibusResult(float(q), k - 1, chi2_sf(q, k - 1))


def mcnemar_exact(n10: int, n01: int) -> float:
    """Two-sided exact McNemar p-value: doubled smaller binomial tail, capped at 1."""
    if n10 < 0 or n01 < 0:
        raise ValueError("discordant counts must be non-negative")
    n = n10 + n01
    if n == 0:
        return 1.0
    k = min(n10, n01)
    tail = sum(math.comb(n, i) for i in range(k + 1))
    p = Fraction(2 * tail, 2 ** n)
    return float(min(Fraction(1), p))


def holm_adjust(p_raw: Mapping[Hashable, float]) -> dict[Hashable, float]:
    """Holm step-down adjusted p-values; ties keep their input order."""
    if any(not 0.0 <= p <= 1.0 for p in p_raw.values()):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p_raw)
    ranked = sorted(enumerate(p_raw.items()), key=lambda t: (t[1][1], t[0]))
    out: dict[Hashable, float] = {}
    running = 0.0
    for rank, (_, (key, p)) in enumerate(ranked, start=1):
        running = max(running, min(1.0, (m - rank + 1) * p))
        out[key] = running
    return {key: out[key] for key in p_raw}


def discordant(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    return int(np.count_nonzero(a & ~b)), int(np.count_nonzero(~a & b))


def pairwise_table(m: DetectionMatrix) -> list[PairwiseComparison]:
    tools = m.tools
    if len(tools) < 2:
        raise UsageError("pairwise comparison needs at least two tools")
    raw = {}
    counts = {}
    for i in range(len(tools)):
        for j in range(i + 1, len(tools)):
            pair = (tools[i], tools[j])
            n10, n01 = discordant(m.cells[:, i], m.cells[:, j])
            counts[pair] = (n10, n01)
            raw[pair] = mcnemar_exact(n10, n01)
    adjusted = holm_adjust(raw)
    rows = [PairwiseComparison(a, b, *counts[(a, b)], raw[(a, b)], adjusted[(a, b)]) for a, b in raw]
    order = {pair: idx for idx, pair in enumerate(raw)}
    rows.sort(key=lambda r: (r.p_raw, order[(r.tool_a, r.tool_b)]))
    return rows


def significance_matrix(rows: Sequence[PairwiseComparison], alpha: float = 0.05) -> list[dict]:
    """Flat records for plotting a tool-by-tool significance grid."""
    return [
        {"tool_a": r.tool_a, "tool_b": r.tool_b, "p_adj": r.p_adj, "significant": r.significant(alpha)}
        for r in rows
    ]
