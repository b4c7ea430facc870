"""Ranking metrics and cross-task aggregates.

AUC is the tie-aware rank statistic: the probability that a uniformly
random positive outscores a uniformly random negative, ties counting one
half. GAUC averages per-group AUC weighted by group sample count, skipping
groups that lack both classes. Aggregates reduce per-task metrics to the
four summary numbers used to compare a method against the single-task
reference: plain means (AV) and mean per-task relative improvements (RI).
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import UndefinedMetricError


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, ties sharing their average rank."""
    order = np.argsort(scores, kind="stable")
    ordered = scores[order]
    is_start = np.empty(len(scores), dtype=bool)
    is_start[0] = True
    is_start[1:] = ordered[1:] != ordered[:-1]
    seg_ids = np.cumsum(is_start) - 1
    counts = np.bincount(seg_ids)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    avg = starts + (counts + 1) / 2.0
    ranks = np.empty(len(scores))
    ranks[order] = avg[seg_ids]
    return ranks


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Requires at least one positive and one negative label; otherwise the
    metric is undefined and UndefinedMetricError is raised.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"scores and labels differ in length ({scores.shape} vs {labels.shape})")
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise ValueError("labels must be binary")
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC undefined with {n_pos} positives and {n_neg} negatives"
        )
    ranks = _average_ranks(scores)
    u_stat = ranks[labels == 1.0].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


def gauc(scores, labels, group_ids) -> float:
    """Sample-count-weighted mean of per-group AUC.

    Groups containing only one class are excluded from both the numerator
    and the weight mass. Raises UndefinedMetricError when no group has both
    classes.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    group_ids = np.asarray(group_ids).ravel()
    if not scores.shape == labels.shape == group_ids.shape:
        raise ValueError("scores, labels and group_ids must have matching lengths")
    total = 0.0
    weight = 0.0
    for gid in np.unique(group_ids):
        mask = group_ids == gid
        group_labels = labels[mask]
        if group_labels.min() == group_labels.max():
            continue
        total += mask.sum() * auc(scores[mask], group_labels)
        weight += mask.sum()
    if weight == 0.0:
        raise UndefinedMetricError("no group contains both classes; GAUC undefined")
    return float(total / weight)


@dataclass(frozen=True)
class MetricTable:
    """Per-task AUC/GAUC for a method and the single-task reference, plus
    the four aggregates. Relative improvements are stored as fractions;
    use the *_percent properties at reporting boundaries."""

    task_names: tuple[str, ...]
    method_auc: tuple[float, ...]
    method_gauc: tuple[float, ...]
    single_auc: tuple[float, ...]
    single_gauc: tuple[float, ...]
    av_auc: float
    av_gauc: float
    ri_auc: float
    ri_gauc: float

    @property
    def ri_auc_percent(self) -> float:
        return 100.0 * self.ri_auc

    @property
    def ri_gauc_percent(self) -> float:
        return 100.0 * self.ri_gauc

    def to_dict(self) -> dict:
        return {
            "task_names": list(self.task_names),
            "method_auc": list(self.method_auc),
            "method_gauc": list(self.method_gauc),
            "single_auc": list(self.single_auc),
            "single_gauc": list(self.single_gauc),
            "av_auc": self.av_auc,
            "av_gauc": self.av_gauc,
            "ri_auc_percent": self.ri_auc_percent,
            "ri_gauc_percent": self.ri_gauc_percent,
        }


def _relative_improvement(method: np.ndarray, single: np.ndarray) -> float:
    if np.any(single == 0.0):
        raise ValueError("single-task reference values must be nonzero")
    return float(np.mean((method - single) / single))


def aggregate(
    method_auc,
    single_auc,
    method_gauc=None,
    single_gauc=None,
    task_names=None,
) -> MetricTable:
    """Build a MetricTable from per-task metric vectors.

    GAUC columns default to the AUC columns when not supplied, which keeps
    AUC-only comparisons expressible with the same record.
    """
    method_auc = np.asarray(method_auc, dtype=np.float64)
    single_auc = np.asarray(single_auc, dtype=np.float64)
    if method_auc.shape != single_auc.shape or method_auc.ndim != 1:
        raise ValueError("method and single metric vectors must be 1-D with equal length")
    method_gauc = method_auc if method_gauc is None else np.asarray(method_gauc, dtype=np.float64)
    single_gauc = single_auc if single_gauc is None else np.asarray(single_gauc, dtype=np.float64)
    if method_gauc.shape != method_auc.shape or single_gauc.shape != single_auc.shape:
        raise ValueError("GAUC vectors must match AUC vectors in length")
    if task_names is None:
        task_names = tuple(f"task_{i}" for i in range(method_auc.shape[0]))
    return MetricTable(
        task_names=tuple(task_names),
        method_auc=tuple(method_auc.tolist()),
        method_gauc=tuple(method_gauc.tolist()),
        single_auc=tuple(single_auc.tolist()),
        single_gauc=tuple(single_gauc.tolist()),
        av_auc=float(np.mean(method_auc)),
        av_gauc=float(np.mean(method_gauc)),
        ri_auc=_relative_improvement(method_auc, single_auc),
        ri_gauc=_relative_improvement(method_gauc, single_gauc),
    )
