"""Significance tests behind the feature tables and feature-set comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import stdtr

EXACT_WILCOXON_MAX_N = 25
ARROW_LEVELS = (0.0001, 0.001, 0.01, 0.05)


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    statistic: float
    p_value: float
    corrected_p: float
    direction: str

    def corrected(self, m: int) -> "TestResult":
        return replace(self, corrected_p=bonferroni([self.p_value], m)[0])

    @property
    def arrows(self) -> str:
        return significance_arrows(self.corrected_p, self.direction)


def _direction(x: float) -> str:
    return "+" if x > 0 else "-" if x < 0 else "0"


def _result(stat: float, p: float, sign: float) -> TestResult:
    p = min(1.0, max(0.0, p))
    return TestResult(stat, p, p, _direction(sign))


def _two_sided_t(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return float(2.0 * stdtr(df, -abs(t)))


def t_test(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Welch's unequal-variance two-sample t test, two-sided."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 values")
    diff = a.mean() - b.mean()
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return _result(0.0, 1.0, 0.0)
        return _result(math.copysign(math.inf, diff), 0.0, diff)
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return _result(float(t), _two_sided_t(t, df), t)


def pearson(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Pearson r with a two-sided p value from the t transform (n - 2 df)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("samples must have equal length")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("correlation undefined for a zero-variance sample")
    r = max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy)))
    if abs(r) == 1.0:
        return _result(r, 0.0, r)
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return _result(r, _two_sided_t(t, n - 2), r)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _signed_rank_distribution(doubled_ranks: Sequence[int]) -> np.ndarray:
    """Counts of each attainable 2*T+ over all 2^n sign assignments."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Paired Wilcoxon signed-rank test on a - b, two-sided.

    Zero differences are dropped and tied magnitudes get average ranks.  For
    n <= 25 the p value comes from the exact permutation distribution of the
    positive-rank sum; above that, from the normal approximation with tie
    correction.  The statistic is the positive-rank sum T+.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return _result(0.0, 1.0, 0.0)
    ranks = _average_ranks(np.abs(d))
    t_plus = float(ranks[d > 0].sum())
    expected = n * (n + 1) / 4
    if n <= EXACT_WILCOXON_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _signed_rank_distribution(doubled)
        probs = counts / counts.sum()
        t2 = int(round(2 * t_plus))
        lower = probs[:t2 + 1].sum()
        upper = probs[t2:].sum()
        p = 2 * min(lower, upper)
    else:
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48
        z = (t_plus - expected) / math.sqrt(var)
        p = math.erfc(abs(z) / math.sqrt(2))
    return _result(t_plus, float(p), t_plus - expected)


def bonferroni(p_values: Sequence[float], m: int | None = None) -> list[float]:
    p_values = list(p_values)
    if m is None:
        m = len(p_values)
    if m < len(p_values):
        raise ValueError("m must be at least the number of tests")
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p value {p} outside [0, 1]")
    return [min(1.0, m * p) for p in p_values]


def significance_arrows(p: float, direction: str) -> str:
    """Four arrows for p < 1e-4 down to one for p < 0.05; dashes otherwise."""
    n = sum(1 for level in ARROW_LEVELS if p < level)
    if n == 0 or direction == "0":
        return "------"
    return ("↑" if direction == "+" else "↓") * n
