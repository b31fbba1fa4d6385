"""Metrics and rank-based significance machinery: F1-macro, pseudo-dataset
rank tables (one row per dataset x model-size pair), mean ranks, the Friedman
test and the Wilcoxon signed-rank test.

Both tests switch between an exact permutation computation at small sample
sizes and the usual asymptotic approximation above it. The exact paths count
outcomes with integer arithmetic so results are reproducible bit for bit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .numerics import chi2_sf, normal_sf

WILCOXON_EXACT_MAX_N = 25
FRIEDMAN_EXACT_MAX_N = 8
FRIEDMAN_EXACT_MAX_K = 4


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str  # "exact" | "asymptotic"


@dataclass(frozen=True)
class RankTable:
    """Rows are pseudo-dataset ids, columns are methods, cells are
    trial-averaged metric values."""

    rows: list[str]
    methods: list[str]
    values: np.ndarray
    orientation: str  # "higher_better" | "lower_better"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.rows), len(self.methods)):
            raise ValueError("values shape must be (n_rows, n_methods)")
        if not np.isfinite(v).all():
            raise ValueError("rank table has missing/non-finite cells")
        if self.orientation not in ("higher_better", "lower_better"):
            raise ValueError(f"bad orientation '{self.orientation}'")
        object.__setattr__(self, "values", v)

    def subset(self, methods: list[str]) -> "RankTable":
        idx = [self.methods.index(m) for m in methods]
        return RankTable(self.rows, list(methods), self.values[:, idx], self.orientation)


def f1_macro(y_true, y_pred, n_classes: int) -> float:
    """Unweighted mean of per-class F1; a class with no true or predicted
    instances contributes 0."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if len(y_true) and max(int(y_true.max()), int(y_pred.max())) >= n_classes:
        raise ValueError("label id out of range")
    total = 0.0
    for c in range(n_classes):
        tp = float(((y_pred == c) & (y_true == c)).sum())
        fp = float(((y_pred == c) & (y_true != c)).sum())
        fn = float(((y_pred != c) & (y_true == c)).sum())
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        total += 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return total / n_classes


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------


def _row_ranks(row: np.ndarray, higher_better: bool) -> np.ndarray:
    """Rank 1 = best; ties share the average of the ranks they cover."""
    key = -row if higher_better else row
    order = np.argsort(key, kind="stable")
    k = len(row)
    ranks = np.empty(k)
    i = 0
    while i < k:
        j = i
        while j + 1 < k and key[order[j + 1]] == key[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def rank_matrix(t: RankTable) -> np.ndarray:
    hb = t.orientation == "higher_better"
    return np.stack([_row_ranks(t.values[i], hb) for i in range(len(t.rows))])


def mean_ranks(t: RankTable) -> dict[str, float]:
    if len(t.methods) < 2 or len(t.rows) < 1:
        raise ValueError("need at least 2 methods and 1 row")
    means = rank_matrix(t).mean(axis=0)
    return {m: float(means[j]) for j, m in enumerate(t.methods)}


# ---------------------------------------------------------------------------
# Friedman test
# ---------------------------------------------------------------------------


def _doubled_rank_rows(t: RankTable) -> np.ndarray:
    """Per-row ranks doubled to exact integers (tie averages are half-integers)."""
    R = rank_matrix(t)
    R2 = np.rint(R * 2).astype(np.int64)
    return R2


def _friedman_statistic(R: np.ndarray) -> tuple[float, float]:
    """Tie-corrected chi-square statistic and the correction factor C."""
    n, k = R.shape
    mean_ranks_ = R.mean(axis=0)
    chi2 = 12.0 * n / (k * (k + 1)) * float(((mean_ranks_ - (k + 1) / 2.0) ** 2).sum())
    tie_sum = 0
    for i in range(n):
        _, counts = np.unique(R[i], return_counts=True)
        tie_sum += int((counts**3 - counts).sum())
    c = 1.0 - tie_sum / (n * k * (k * k - 1))
    return chi2, c


def _friedman_exact_count(rows2: np.ndarray, s2_obs: int) -> tuple[int, int]:
    """Count rank assignments (all k!^n orderings, ties kept as-is) whose
    column-sum dispersion reaches the observed value. Dynamic programming
    over column-sum vectors is an exact fold of that enumeration."""
    n, k = rows2.shape
    states: dict[tuple, int] = {(0,) * k: 1}
    for i in range(n):
        perms = list(itertools.permutations(rows2[i].tolist()))
        nxt: dict[tuple, int] = {}
        for state, cnt in states.items():
            for p in perms:
                key = tuple(s + v for s, v in zip(state, p))
                nxt[key] = nxt.get(key, 0) + cnt
        states = nxt
    target_mean = n * (k + 1)
    hits = 0
    total = 0
    for state, cnt in states.items():
        total += cnt
        s2 = sum((s - target_mean) ** 2 for s in state)
        if s2 >= s2_obs:
            hits += cnt
    return hits, total


def friedman_test(t: RankTable, methods: list[str] | None = None) -> TestResult:
    """Friedman test over the table columns (optionally a subset). Exact
    permutation p-value for n <= 8 rows and k <= 4 methods, otherwise the
    tie-corrected chi-square approximation with k-1 degrees of freedom."""
    if methods is not None:
        t = t.subset(methods)
    n, k = len(t.rows), len(t.methods)
    if k < 2:
        raise ValueError("friedman_test needs at least 2 methods")
    if n < 2:
        raise ValueError("friedman_test needs at least 2 rows")

    R = rank_matrix(t)
    chi2, c = _friedman_statistic(R)
    if c <= 0.0:  # every row fully tied
        return TestResult(statistic=0.0, p_value=1.0, n_effective=n, method="exact")
    statistic = chi2 / c

    if n <= FRIEDMAN_EXACT_MAX_N and k <= FRIEDMAN_EXACT_MAX_K:
        rows2 = _doubled_rank_rows(t)
        col2 = rows2.sum(axis=0)
        s2_obs = int(((col2 - n * (k + 1)) ** 2).sum())
        hits, total = _friedman_exact_count(rows2, s2_obs)
        return TestResult(statistic=float(statistic), p_value=hits / total,
                          n_effective=n, method="exact")
    return TestResult(statistic=float(statistic), p_value=chi2_sf(statistic, k - 1),
                      n_effective=n, method="asymptotic")


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test
# ---------------------------------------------------------------------------


def _signed_rank_setup(a, b, zero_method):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 1:
        raise ValueError("need two paired vectors of equal positive length")
    d = a - b
    if zero_method == "drop":
        d = d[d != 0.0]
        if len(d) == 0:
            return 0, None, None
        ranks2 = _row_ranks(np.abs(d), higher_better=False) * 2.0
        r2 = np.rint(ranks2).astype(np.int64)
    elif zero_method == "pratt":
        # zeros participate in the ranking, then their ranks are discarded
        if not (d != 0.0).any():
            return 0, None, None
        ranks2 = _row_ranks(np.abs(d), higher_better=False) * 2.0
        r2_all = np.rint(ranks2).astype(np.int64)
        r2 = r2_all[d != 0.0]
        d = d[d != 0.0]
    else:
        raise ValueError("zero_method must be 'drop' or 'pratt'")
    w_plus2 = int(r2[d > 0].sum())
    w_minus2 = int(r2[d < 0].sum())
    return len(d), r2, (w_plus2, w_minus2)


def _wplus_counts(r2: np.ndarray) -> list[int]:
    """Exact null distribution of 2*W+ as integer subset-sum counts."""
    total = int(r2.sum())
    counts = [0] * (total + 1)
    counts[0] = 1
    top = 0
    for r in r2.tolist():
        top += r
        for s in range(top, r - 1, -1):
            if counts[s - r]:
                counts[s] += counts[s - r]
    return counts


def wilcoxon_signed_rank(scores_a, scores_b, zero_method: str = "drop") -> TestResult:
    """Two-sided Wilcoxon signed-rank test on paired scores.

    Zero differences are dropped by default ("pratt" keeps them in the
    ranking and then discards their ranks); |d| is ranked with average ties
    and the statistic is W = min(W+, W-). The p-value is exact (all 2^n sign
    patterns, counted by subset-sum convolution) up to n = 25 effective
    pairs, then a normal approximation with a continuity correction and
    moments computed from the actual ranks (which subsumes the tie-variance
    correction).
    """
    n, r2, ws = _signed_rank_setup(scores_a, scores_b, zero_method)
    if n == 0:
        return TestResult(statistic=0.0, p_value=1.0, n_effective=0, method="exact")
    w_plus2, w_minus2 = ws
    w2 = min(w_plus2, w_minus2)
    statistic = w2 / 2.0

    if n <= WILCOXON_EXACT_MAX_N:
        counts = _wplus_counts(r2)
        c_le = sum(counts[: w2 + 1])
        p = min(1.0, 2 * c_le / (1 << n))
        return TestResult(statistic=statistic, p_value=p, n_effective=n, method="exact")

    r = r2.astype(np.float64) / 2.0
    mu = float(r.sum()) / 2.0
    sigma2 = float((r**2).sum()) / 4.0
    if sigma2 <= 0:
        return TestResult(statistic=statistic, p_value=1.0, n_effective=n, method="asymptotic")
    z = (mu - statistic - 0.5) / np.sqrt(sigma2)
    p = min(1.0, 2.0 * normal_sf(float(z)))
    return TestResult(statistic=statistic, p_value=p, n_effective=n, method="asymptotic")
