"""Gradient crafting kernel.

The crafting step runs in two stages. Magnitude adjustment blends every
task gradient toward the maximum task norm under a proximity factor tau,
bounding the post-adjustment norm spread by 1/tau without changing any
direction. Direction deconfliction then rebuilds each task gradient so its
inner product with every conflicting task gradient equals a small
nonnegative target, by solving one Gram system per task in closed form.
All tasks are projected against the same adjusted set, so the outcome does
not depend on task order.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .exceptions import DegenerateGradientSetError
from .gradients import GradientSet
from .validation import check_nonnegative, check_unit_interval, check_vector


@dataclass(frozen=True)
class CraftReport:
    """Per-step diagnostics emitted alongside the combined update."""

    norms_before: np.ndarray
    norms_after_adjust: np.ndarray
    conflict_matrix: np.ndarray
    per_task_conflict_counts: np.ndarray
    projection_residuals: np.ndarray
    jitter_levels: np.ndarray
    combined_norm: float

    def to_dict(self) -> dict:
        return {
            "norms_before": self.norms_before.tolist(),
            "norms_after_adjust": self.norms_after_adjust.tolist(),
            "conflict_matrix": self.conflict_matrix.astype(bool).tolist(),
            "per_task_conflict_counts": self.per_task_conflict_counts.tolist(),
            "projection_residuals": self.projection_residuals.tolist(),
            "jitter_levels": self.jitter_levels.tolist(),
            "combined_norm": self.combined_norm,
        }


@dataclass(frozen=True)
class CraftResult:
    """Outcome of one crafting step, in the caller's task order."""

    task_names: tuple[str, ...]
    combined: np.ndarray
    per_task: np.ndarray
    adjusted: GradientSet = field(repr=False)
    report: CraftReport = field(repr=False)


def adjust_magnitudes(gs: GradientSet, tau: float) -> GradientSet:
    """Blend each gradient toward the maximum task norm.

    Each task gradient is scaled by tau * (max_norm / own_norm) + (1 - tau),
    a nonnegative factor, so directions are preserved and for tau > 0 the
    ratio of largest to smallest adjusted norm is at most 1/tau. tau = 0
    returns the input unchanged and tau = 1 equalizes all norms to the max.

    Zero gradients are excluded from the max, left as zero vectors, and do
    not count toward the ratio bound. An all-zero set cannot be adjusted.
    """
    tau = check_unit_interval(tau, "tau")
    norms = gs.norms()
    nonzero = norms > 0.0
    if not np.any(nonzero):
        raise DegenerateGradientSetError("cannot adjust magnitudes of an all-zero gradient set")
    max_norm = float(np.max(norms[nonzero]))
    factors = np.ones_like(norms)
    # Tasks already at the max norm keep factor exactly 1.0; the blended
    # expression tau + (1 - tau) can round one ulp away from 1 otherwise.
    blend = norms[nonzero] < max_norm
    scaled = tau * (max_norm / norms[nonzero]) + (1.0 - tau)
    factors[nonzero] = np.where(blend, scaled, 1.0)
    return gs.replace_grads(gs.grads * factors[:, None])


def detect_conflicts(gs: GradientSet, conflict_tol: float = 0.0) -> np.ndarray:
    """Boolean T x T matrix marking pairs whose inner product is < -conflict_tol.

    The diagonal is False and the matrix is symmetric by construction.
    Exactly orthogonal pairs are not conflicts under the default tol of 0.
    """
    n_tasks = gs.n_tasks
    out = np.zeros((n_tasks, n_tasks), dtype=bool)
    for i in range(n_tasks):
        for j in range(i + 1, n_tasks):
            hit = linalg.inner(gs.grads[i], gs.grads[j]) < -conflict_tol
            out[i, j] = hit
            out[j, i] = hit
    return out


def project_task(g_i, conflict_set, epsilon: float) -> tuple[np.ndarray, float, float]:
    """Deconflict one task gradient against its conflicting gradients.

    Builds the similarity targets z_j = epsilon * |g_i| * |c_j| for every
    conflicting gradient c_j, solves the Gram system
    (C C^T) w = -C g_i^T + z, and returns g_i + w^T C, whose inner product
    with each c_j equals z_j up to solver precision.

    Returns (deconflicted, residual, jitter) where residual is the max
    absolute deviation |<deconflicted, c_j> - z_j| and jitter is the
    diagonal regularization the solver needed (0.0 normally). An empty
    conflict set returns g_i unchanged with residual 0.
    """
    g_i = check_vector(g_i, "g_i")
    epsilon = check_nonnegative(epsilon, "epsilon")
    conflicts = np.asarray(conflict_set, dtype=np.float64)
    if conflicts.size == 0:
        return g_i, 0.0, 0.0
    if conflicts.ndim != 2 or conflicts.shape[1] != g_i.shape[0]:
        raise ValueError(
            f"conflict set shape {conflicts.shape} does not match gradient dimension {g_i.shape[0]}"
        )
    own_norm = linalg.norm(g_i)
    targets = epsilon * own_norm * np.array([linalg.norm(c) for c in conflicts])
    rhs = targets - np.array([linalg.inner(c, g_i) for c in conflicts])
    weights, jitter = linalg.solve_spd(linalg.gram(conflicts), rhs)
    deconflicted = g_i + np.add.reduce(weights[:, None] * conflicts, axis=0)
    achieved = np.array([linalg.inner(c, deconflicted) for c in conflicts])
    residual = float(np.max(np.abs(achieved - targets)))
    return deconflicted, residual, jitter


def combine(grads) -> np.ndarray:
    """Mean of the task gradients, reduced in the given order."""
    arr = np.asarray(grads, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("combine requires a non-empty stack of gradients")
    return np.add.reduce(arr, axis=0) / arr.shape[0]


def craft_global(
    gs: GradientSet,
    *,
    tau: float = 0.0,
    epsilon: float = 0.0,
    conflict_tol: float = 0.0,
    adjust: bool = True,
    project: bool = True,
) -> CraftResult:
    """One full crafting step: adjust, detect, project per task, combine.

    Work happens in lexicographic task-name order regardless of the input
    order, and results are scattered back, so permuting the tasks permutes
    the per-task outputs and leaves the combined update bit-identical.
    Every task is projected against the same adjusted gradients; no task
    sees another task's deconflicted output.
    """
    order = np.argsort(np.asarray(gs.task_names))
    work = GradientSet(
        tuple(gs.task_names[i] for i in order), gs.grads[order]
    )
    norms_before = work.norms()
    adjusted = adjust_magnitudes(work, tau) if adjust else work
    norms_after = adjusted.norms() if adjust else norms_before
    conflicts = detect_conflicts(adjusted, conflict_tol)

    n_tasks = work.n_tasks
    per_task = np.empty_like(work.grads)
    residuals = np.zeros(n_tasks)
    jitters = np.zeros(n_tasks)
    for i in range(n_tasks):
        if project and conflicts[i].any():
            deconflicted, residual, jitter = project_task(
                adjusted.grads[i], adjusted.grads[conflicts[i]], epsilon
            )
            per_task[i] = deconflicted
            residuals[i] = residual
            jitters[i] = jitter
        else:
            per_task[i] = adjusted.grads[i]
    combined = combine(per_task)

    inverse = np.empty_like(order)
    inverse[order] = np.arange(n_tasks)
    report = CraftReport(
        norms_before=norms_before[inverse],
        norms_after_adjust=norms_after[inverse],
        conflict_matrix=conflicts[np.ix_(inverse, inverse)],
        per_task_conflict_counts=conflicts.sum(axis=1)[inverse],
        projection_residuals=residuals[inverse],
        jitter_levels=jitters[inverse],
        combined_norm=linalg.norm(combined),
    )
    return CraftResult(
        task_names=gs.task_names,
        combined=combined,
        per_task=per_task[inverse],
        adjusted=GradientSet(gs.task_names, adjusted.grads[inverse]),
        report=report,
    )


def craft_pairwise(
    gs: GradientSet,
    *,
    tau: float = 0.0,
    adjust: bool = False,
    rng_seed: int = 0,
) -> CraftResult:
    """Sequential pairwise projection surgery (the PCGrad recipe).

    For each task, the other tasks are visited in an order drawn from
    rng_seed; whenever the running gradient still conflicts with a visited
    task's (adjusted) gradient, the component along it is removed using the
    squared-norm projection. Unlike the global step, later projections can
    reintroduce earlier conflicts, so the residual reported per task is the
    worst remaining negative inner product against its original conflict
    set (0 when fully resolved). With adjust=True the surgery runs on
    magnitude-adjusted gradients.
    """
    norms_before = gs.norms()
    adjusted = adjust_magnitudes(gs, tau) if adjust else gs
    norms_after = adjusted.norms() if adjust else norms_before
    conflicts = detect_conflicts(adjusted, 0.0)

    n_tasks = gs.n_tasks
    rng = np.random.default_rng(rng_seed)
    per_task = np.empty_like(gs.grads)
    residuals = np.zeros(n_tasks)
    for i in range(n_tasks):
        current = adjusted.grads[i].copy()
        for j in rng.permutation(n_tasks):
            if j == i:
                continue
            other = adjusted.grads[j]
            dot = linalg.inner(current, other)
            if dot < 0.0:
                denom = linalg.inner(other, other)
                if denom > 0.0:
                    current -= (dot / denom) * other
        per_task[i] = current
        if conflicts[i].any():
            remaining = [linalg.inner(current, adjusted.grads[j]) for j in np.flatnonzero(conflicts[i])]
            residuals[i] = max(0.0, -min(remaining))
    combined = combine(per_task)

    report = CraftReport(
        norms_before=norms_before,
        norms_after_adjust=norms_after,
        conflict_matrix=conflicts,
        per_task_conflict_counts=conflicts.sum(axis=1),
        projection_residuals=residuals,
        jitter_levels=np.zeros(n_tasks),
        combined_norm=linalg.norm(combined),
    )
    return CraftResult(
        task_names=gs.task_names,
        combined=combined,
        per_task=per_task,
        adjusted=adjusted,
        report=report,
    )
