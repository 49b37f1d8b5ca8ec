"""Rank and linear correlation metrics.

Spearman uses fractional (average) ranks for ties, so both metrics reduce to
a Pearson correlation: of the ranks in one case, of the raw values in the
other. No logistic remapping is applied before the linear correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError


@dataclass(frozen=True)
class MetricReport:
    srcc: float
    plcc: float
    n: int


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise UndefinedMetricError(f"shape mismatch: {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise UndefinedMetricError("correlation needs at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.dot(da, da))
    vb = float(np.dot(db, db))
    if va == 0.0 or vb == 0.0:
        raise UndefinedMetricError("correlation undefined for constant input")
    return float(np.dot(da, db)) / np.sqrt(va * vb)


def srcc(pred, gt) -> float:
    """Spearman rank correlation with average ranks for ties."""
    return _pearson(average_ranks(np.asarray(pred)), average_ranks(np.asarray(gt)))


def plcc(pred, gt) -> float:
    """Pearson linear correlation."""
    return _pearson(np.asarray(pred), np.asarray(gt))


def metric_report(pred, gt) -> MetricReport:
    pred = np.asarray(pred, dtype=np.float64)
    return MetricReport(srcc=srcc(pred, gt), plcc=plcc(pred, gt), n=len(pred))
