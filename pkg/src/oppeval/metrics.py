"""Segment-wise classification metrics: confusion counts, AUC, false alarm rate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ValidationError


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    sen: float
    spe: float
    acc: float
    f1: float
    auc: float = float("nan")
    far_per_hour: float = float("nan")

    @property
    def n_segments(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else float("nan")


def confusion_metrics(predictions, labels, threshold: float = 0.5) -> MetricsReport:
    """Threshold predictions and compute the standard confusion-derived metrics.

    A score exactly at the threshold classifies as positive (round-half-up,
    matching an output "rounded to the nearest integer"). With one-class
    label vectors the undefined ratio (sen or spe) is reported as NaN
    rather than silently zeroed.
    """
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ValidationError(f"length mismatch: {p.shape} vs {y.shape}")
    hard = p >= threshold
    pos = y == 1
    tp = int(np.sum(hard & pos))
    fp = int(np.sum(hard & ~pos))
    tn = int(np.sum(~hard & ~pos))
    fn = int(np.sum(~hard & pos))
    return metrics_from_counts(tp, fp, tn, fn)


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> MetricsReport:
    sen = _safe_div(tp, tp + fn)
    spe = _safe_div(tn, tn + fp)
    acc = _safe_div(tp + tn, tp + fp + tn + fn)
    f1 = _safe_div(2 * tp, 2 * tp + fp + fn)
    return MetricsReport(tp=tp, fp=fp, tn=tn, fn=fn, sen=sen, spe=spe, acc=acc, f1=f1)


def auc(predictions, labels) -> float:
    """Area under the ROC curve via the rank (Mann-Whitney) formulation.

    Scores are sorted once; tied scores receive average ranks, which counts
    cross-class ties as half-concordant. Equivalent to the probability
    that a random positive outranks a random negative.
    """
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUC needs both classes present")

    order = np.argsort(p, kind="mergesort")
    sorted_p = p[order]
    ranks = np.empty(p.size, dtype=np.float64)
    i = 0
    while i < p.size:
        j = i
        while j + 1 < p.size and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average of ranks i+1..j+1
        i = j + 1

    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def far_epoch(predictions, labels, segment_s: float = 5.0,
              threshold: float = 0.5) -> float:
    """False alarm rate per hour, counted at the individual segment level.

    Every interictal segment whose score crosses the threshold is one false
    positive; the rate divides the count by the interictal hours covered.
    """
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels)
    inter = y == 0
    n_inter = int(inter.sum())
    if n_inter == 0:
        raise ValidationError("no interictal segments; FAR undefined")
    false_pos = int(np.sum((p >= threshold) & inter))
    hours = n_inter * segment_s / 3600.0
    return false_pos / hours


def aggregate_segmentwise(reports: list[MetricsReport]) -> MetricsReport:
    """Pool confusion counts across reports, then recompute the ratios.

    Pooling before the division weighs each test seizure by its segment
    count instead of averaging per-seizure ratios.
    """
    if not reports:
        raise ValidationError("nothing to aggregate")
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    tn = sum(r.tn for r in reports)
    fn = sum(r.fn for r in reports)
    return metrics_from_counts(tp, fp, tn, fn)
