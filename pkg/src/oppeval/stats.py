"""Related-samples nonparametric comparison across preictal definitions.

Friedman's two-way analysis of variance by ranks (with the standard tie
correction) tests whether the per-subject score distributions differ
across the four definitions; Dunn's z on the mean ranks with Bonferroni
adjustment localizes which pairs differ.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import chi2, norm

from . import ValidationError

ALPHA = 0.05


@dataclass
class PairwiseComparison:
    group_a: int
    group_b: int
    z: float
    p_raw: float
    p_adjusted: float
    reject: bool


@dataclass
class StatReport:
    statistic: float
    df: int
    p_value: float
    mean_ranks: dict[int, float]
    n_subjects: int
    pairwise: list[PairwiseComparison] = field(default_factory=list)


def _rank_row(row: np.ndarray) -> np.ndarray:
    """Ranks 1..k with average ranks assigned to ties."""
    order = np.argsort(row, kind="mergesort")
    ranks = np.empty(row.size, dtype=np.float64)
    i = 0
    sorted_row = row[order]
    while i < row.size:
        j = i
        while j + 1 < row.size and sorted_row[j + 1] == sorted_row[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def friedman(scores: np.ndarray, group_labels: list[int] | None = None,
             alpha: float = ALPHA) -> StatReport:
    """Friedman omnibus test plus Bonferroni-adjusted pairwise comparisons.

    `scores` is a [subjects x groups] matrix of related samples (one row
    per subject). Rows are ranked with average ranks on ties and the
    chi-square statistic uses the tie correction

        C = 1 - sum(t^3 - t) / (n * k * (k^2 - 1)),

    summed over the tie groups of every row. Fully tied data (C = 0) has
    no rank variation at all, so the statistic is 0 with p = 1. Pairwise
    comparisons use Dunn's z on mean ranks, z = (Ra - Rb)/sqrt(k(k+1)/(6n)),
    two-sided, with p multiplied by the number of pairs and capped at 1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValidationError("scores must be a [subjects x groups] matrix")
    n, k = scores.shape
    if n < 2:
        raise ValidationError(f"need at least 2 subjects, got {n}")
    if k < 2:
        raise ValidationError(f"need at least 2 groups, got {k}")
    if group_labels is None:
        group_labels = list(range(k))
    if len(group_labels) != k:
        raise ValidationError("group_labels length must match the group count")

    ranks = np.vstack([_rank_row(row) for row in scores])
    rank_sums = ranks.sum(axis=0)
    mean_ranks = rank_sums / n

    tie_term = 0.0
    for row in scores:
        _, counts = np.unique(row, return_counts=True)
        tie_term += float(np.sum(counts.astype(np.float64) ** 3 - counts))
    correction = 1.0 - tie_term / (n * k * (k * k - 1.0))

    raw_stat = 12.0 / (n * k * (k + 1)) * float(rank_sums @ rank_sums) - 3.0 * n * (k + 1)
    if correction <= 0.0:
        statistic, p_value = 0.0, 1.0
    else:
        statistic = raw_stat / correction
        p_value = float(chi2.sf(statistic, df=k - 1))

    se = np.sqrt(k * (k + 1) / (6.0 * n))
    pairs = list(combinations(range(k), 2))
    pairwise = []
    for ia, ib in pairs:
        z = (mean_ranks[ia] - mean_ranks[ib]) / se
        p_raw = 2.0 * float(norm.sf(abs(z)))
        p_adj = min(1.0, p_raw * len(pairs))
        pairwise.append(PairwiseComparison(
            group_a=group_labels[ia], group_b=group_labels[ib],
            z=float(z), p_raw=p_raw, p_adjusted=p_adj, reject=p_adj < alpha,
        ))

    return StatReport(
        statistic=float(statistic), df=k - 1, p_value=p_value,
        mean_ranks={group_labels[i]: float(mean_ranks[i]) for i in range(k)},
        n_subjects=n, pairwise=pairwise,
    )
