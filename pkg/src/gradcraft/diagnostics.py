"""Balance measurement over crafting steps.

Snapshots capture how unbalanced the raw gradients were, what conflicts
remained after adjustment, and whether the projection contract (every
post-projection similarity meeting its target) held at this step.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .crafting import detect_conflicts
from .gradients import GradientSet


@dataclass(frozen=True)
class BalanceSnapshot:
    """One step's balance diagnostics.

    norm_ratio is max/min over the adjusted nonzero task norms (1.0 when
    fewer than two nonzero gradients exist). post_craft_min_alignment is
    the worst signed gap inner(deconflicted_i, adjusted_j) - z_ij over all
    conflicting pairs (0.0 when there are none); values >= -tol * scale
    certify the projection contract. alignment_scale is the max(1, |z|,
    |raw inner|) normalizer matching the projection residual convention.
    """

    step: int
    norm_ratio: float
    conflict_count: int
    min_pairwise_cosine: float
    post_craft_min_alignment: float
    alignment_scale: float

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "norm_ratio": self.norm_ratio,
            "conflict_count": self.conflict_count,
            "min_pairwise_cosine": self.min_pairwise_cosine,
            "post_craft_min_alignment": self.post_craft_min_alignment,
            "alignment_scale": self.alignment_scale,
        }


def snapshot(
    gs_before: GradientSet,
    gs_adjusted: GradientSet,
    crafted: np.ndarray,
    *,
    epsilon: float = 0.0,
    conflict_tol: float = 0.0,
    step: int = 0,
) -> BalanceSnapshot:
    """Measure balance for one crafting step.

    ``crafted`` holds the per-task deconflicted gradients (T, d) in the
    same task order as the gradient sets.
    """
    crafted = np.asarray(crafted, dtype=np.float64)
    if crafted.shape != gs_adjusted.grads.shape:
        raise ValueError(
            f"crafted shape {crafted.shape} does not match gradients {gs_adjusted.grads.shape}"
        )
    adjusted_norms = gs_adjusted.norms()
    nonzero = adjusted_norms[adjusted_norms > 0.0]
    ratio = float(nonzero.max() / nonzero.min()) if nonzero.size >= 2 else 1.0

    conflicts = detect_conflicts(gs_adjusted, conflict_tol)
    n_tasks = gs_adjusted.n_tasks
    min_cos = 1.0
    for i in range(n_tasks):
        for j in range(i + 1, n_tasks):
            denom = adjusted_norms[i] * adjusted_norms[j]
            if denom > 0.0:
                cos = linalg.inner(gs_adjusted.grads[i], gs_adjusted.grads[j]) / denom
                min_cos = min(min_cos, cos)

    min_alignment = 0.0
    scale = 1.0
    for i in range(n_tasks):
        for j in np.flatnonzero(conflicts[i]):
            target = epsilon * adjusted_norms[i] * adjusted_norms[j]
            achieved = linalg.inner(crafted[i], gs_adjusted.grads[j])
            raw = linalg.inner(gs_adjusted.grads[i], gs_adjusted.grads[j])
            min_alignment = min(min_alignment, achieved - target)
            scale = max(scale, abs(target), abs(raw))

    return BalanceSnapshot(
        step=int(step),
        norm_ratio=ratio,
        conflict_count=int(conflicts.sum()) // 2,
        min_pairwise_cosine=float(min_cos),
        post_craft_min_alignment=float(min_alignment),
        alignment_scale=float(scale),
    )


@dataclass(frozen=True)
class TrajectorySummary:
    steps: int
    mean_norm_ratio: float
    max_norm_ratio: float
    mean_conflict_count: float
    max_conflict_count: int
    min_pairwise_cosine: float
    worst_alignment: float
    violation_fraction: float

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "mean_norm_ratio": self.mean_norm_ratio,
            "max_norm_ratio": self.max_norm_ratio,
            "mean_conflict_count": self.mean_conflict_count,
            "max_conflict_count": self.max_conflict_count,
            "min_pairwise_cosine": self.min_pairwise_cosine,
            "worst_alignment": self.worst_alignment,
            "violation_fraction": self.violation_fraction,
        }


def trajectory_summary(snapshots, residual_tol: float = 1e-6) -> TrajectorySummary:
    """Aggregate snapshots across a run.

    A step violates the projection contract when its worst alignment gap
    falls below -residual_tol * alignment_scale; the fraction of violating
    steps must be 0 for a passing run.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("trajectory_summary requires at least one snapshot")
    ratios = np.array([s.norm_ratio for s in snapshots])
    conflicts = np.array([s.conflict_count for s in snapshots])
    cosines = np.array([s.min_pairwise_cosine for s in snapshots])
    aligns = np.array([s.post_craft_min_alignment for s in snapshots])
    scales = np.array([s.alignment_scale for s in snapshots])
    violations = aligns < -residual_tol * scales
    return TrajectorySummary(
        steps=len(snapshots),
        mean_norm_ratio=float(ratios.mean()),
        max_norm_ratio=float(ratios.max()),
        mean_conflict_count=float(conflicts.mean()),
        max_conflict_count=int(conflicts.max()),
        min_pairwise_cosine=float(cosines.min()),
        worst_alignment=float(aligns.min()),
        violation_fraction=float(violations.mean()),
    )
