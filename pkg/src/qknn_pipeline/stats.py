"""Wilcoxon signed-rank test for paired samples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

EXACT_MAX_N = 25
MIN_RECOMMENDED_N = 5
# differences are rounded to this many decimals so run-averaged accuracies
# that agree up to float noise count as equal
DIFF_DECIMALS = 12


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    statistic: float
    n: int
    n_zero: int
    method: str
    degenerate: bool = False
    small_sample: bool = False


def average_ranks(values) -> np.ndarray:
    """Ranks starting at 1, tied values sharing the mean of their positions."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.shape[0])
    start = 0
    while start < values.shape[0]:
        stop = start
        while stop + 1 < values.shape[0] and sorted_vals[stop + 1] == sorted_vals[start]:
            stop += 1
        ranks[order[start : stop + 1]] = 0.5 * (start + stop) + 1.0
        start = stop + 1
    return ranks


def exact_null_distribution(ranks) -> np.ndarray:
    """Counts of every achievable doubled positive-rank sum over all 2**n sign patterns."""
    doubled = np.rint(2 * np.asarray(ranks, dtype=float)).astype(int)
    counts = np.zeros(int(doubled.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.shape[0] - r]
        counts = counts + shifted
    return counts


def _exact_p(ranks, w_plus) -> float:
    counts = exact_null_distribution(ranks)
    total = int(counts.sum())
    t = int(round(2 * w_plus))
    lower = int(counts[: t + 1].sum())
    upper = int(counts[t:].sum())
    return min(1.0, 2 * min(lower, upper) / total)


def _normal_p(abs_diff, ranks, w_plus) -> float:
    n = ranks.shape[0]
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(abs_diff, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_sizes**3 - tie_sizes) / 48.0
    if var <= 0:
        return 1.0
    z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def wilcoxon_signed_rank(x, y, exact_max_n: int = EXACT_MAX_N) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test of ``x - y``.

    Zero differences are discarded and tied magnitudes get average ranks.  The
    null distribution is enumerated exactly up to ``exact_max_n`` nonzero
    pairs; beyond that a normal approximation with tie and continuity
    corrections is used.  Samples with fewer than 5 nonzero pairs still get an
    exact p-value but are flagged ``small_sample``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise DimensionError(f"paired samples differ in length: {x.shape[0]} vs {y.shape[0]}")
    diff = np.round(x - y, DIFF_DECIMALS)
    nonzero = diff[diff != 0]
    n, n_zero = nonzero.shape[0], int(diff.shape[0] - nonzero.shape[0])
    if n == 0:
        return WilcoxonResult(1.0, 0.0, 0, n_zero, "degenerate", degenerate=True, small_sample=True)
    abs_diff = np.abs(nonzero)
    ranks = average_ranks(abs_diff)
    w_plus = float(ranks[nonzero > 0].sum())
    if n <= exact_max_n:
        p, method = _exact_p(ranks, w_plus), "exact"
    else:
        p, method = _normal_p(abs_diff, ranks, w_plus), "normal"
    return WilcoxonResult(p, w_plus, n, n_zero, method, small_sample=n < MIN_RECOMMENDED_N)
