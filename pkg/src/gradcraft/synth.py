"""Synthetic multi-task problems with controllable conflict and imbalance.

Two generator families share one spec. The quadratic generator builds an
analytic landscape whose task gradients at the origin have an exact
pairwise angle and an exact largest-to-smallest norm ratio; every task
starts at the same loss value, so imbalance comes purely from curvature, as
with sparse-feedback tasks whose losses are flat but comparable. The
classification generator draws correlated linear concepts and realizes
imbalance through positive-label sparsity.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .landscape import QuadraticLandscape
from .validation import check_positive_int


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Knobs shared by the synthetic generators.

    conflict_angle (radians) sets the pairwise angle between task gradient
    directions at the origin in quadratic mode and, through its cosine, the
    default pairwise correlation of the task concepts in classification
    mode; an explicit label_correlation matrix overrides the latter.
    norm_ratio >= 1 is the target ratio of largest to smallest task
    gradient scale. d_in is the parameter dimension in quadratic mode and
    the feature dimension in classification mode.
    """

    n_tasks: int
    conflict_angle: float = math.pi / 2
    norm_ratio: float = 1.0
    samples: int = 1000
    d_in: int = 8
    group_count: int = 10
    seed: int = 0
    label_correlation: tuple | None = None
    logit_scale: float = 20.0
    group_effect: float = 0.3

    def __post_init__(self):
        check_positive_int(self.n_tasks, "n_tasks")
        check_positive_int(self.samples, "samples")
        check_positive_int(self.d_in, "d_in")
        check_positive_int(self.group_count, "group_count")
        if not 0.0 <= self.conflict_angle <= math.pi:
            raise ValueError(f"conflict_angle must lie in [0, pi], got {self.conflict_angle}")
        if not self.norm_ratio >= 1.0:
            raise ValueError(f"norm_ratio must be >= 1, got {self.norm_ratio}")
        if not self.logit_scale > 0:
            raise ValueError("logit_scale must be > 0")
        if self.label_correlation is not None:
            corr = np.asarray(self.label_correlation, dtype=np.float64)
            if corr.shape != (self.n_tasks, self.n_tasks):
                raise ValueError(
                    f"label_correlation must be ({self.n_tasks}, {self.n_tasks}), got {corr.shape}"
                )
            object.__setattr__(self, "label_correlation", tuple(map(tuple, corr.tolist())))


@dataclass(frozen=True)
class LabeledBatch:
    features: np.ndarray = field(repr=False)   # (n, d_in)
    labels: np.ndarray = field(repr=False)     # (n, T) in {0, 1}
    group_ids: np.ndarray = field(repr=False)  # (n,) ints for GAUC grouping

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        group_ids = np.asarray(self.group_ids, dtype=np.int64)
        if features.ndim != 2 or labels.ndim != 2 or features.shape[0] != labels.shape[0]:
            raise ValueError("features and labels must be 2-D with matching sample counts")
        if group_ids.shape != (features.shape[0],):
            raise ValueError("group_ids must have one entry per sample")
        if not np.all((labels == 0.0) | (labels == 1.0)):
            raise ValueError("labels must be binary")
        if np.any(group_ids < 0):
            raise ValueError("group_ids must be nonnegative")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "group_ids", group_ids)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class SplitBatches:
    train: LabeledBatch
    valid: LabeledBatch
    test: LabeledBatch


def _equiangular_directions(n_tasks: int, angle: float, dim: int) -> np.ndarray:
    """Unit vectors with every pairwise angle equal to ``angle``.

    Uses the symmetric construction u_i = a e_i + b (e_0 + ... + e_{T-1}),
    which is exact for the antipodal two-task case. Feasibility requires
    cos(angle) >= -1/(T-1).
    """
    if dim < n_tasks:
        raise ValueError(f"need dimension >= n_tasks to place directions, got d={dim}, T={n_tasks}")
    out = np.zeros((n_tasks, dim))
    if n_tasks == 1:
        out[0, 0] = 1.0
        return out
    if dim < 2 and angle != 0.0:
        raise ValueError("nonzero conflict_angle requires dimension >= 2")
    cos = math.cos(angle)
    disc = 1.0 + (n_tasks - 1) * cos
    if disc < -1e-12:
        raise ValueError(
            f"pairwise angle {angle} is infeasible for {n_tasks} tasks "
            f"(requires cos >= -1/(T-1))"
        )
    a = math.sqrt(1.0 - cos)
    b = (-a + math.sqrt(max(disc, 0.0))) / n_tasks
    out[:, :n_tasks] = b
    for i in range(n_tasks):
        out[i, i] += a
    return out


def _norm_targets(n_tasks: int, norm_ratio: float) -> np.ndarray:
    """Per-task gradient scales, geometric from norm_ratio down to 1."""
    if n_tasks == 1:
        return np.ones(1)
    exponents = (n_tasks - 1 - np.arange(n_tasks)) / (n_tasks - 1)
    return norm_ratio**exponents


def gen_quadratic(spec: SyntheticTaskSpec) -> QuadraticLandscape:
    """Quadratic landscape whose origin gradients realize the spec exactly.

    With u_i the equiangular unit directions, n_i the target norms and
    R = norm_ratio, task i has center -R u_i / n_i, identity curvature and
    scale n_i^2 / R, so at theta = 0 gradient i equals n_i u_i and every
    task starts at the same loss R/2. Gradient imbalance therefore comes
    from curvature, not loss level, and no center sits closer than
    distance 1 to the origin, keeping small random inits a mild
    perturbation of the same trajectory.
    """
    dim = spec.d_in
    directions = _equiangular_directions(spec.n_tasks, spec.conflict_angle, dim)
    norms = _norm_targets(spec.n_tasks, spec.norm_ratio)
    centers = -spec.norm_ratio * directions / norms[:, None]
    curvatures = np.broadcast_to(np.eye(dim), (spec.n_tasks, dim, dim)).copy()
    return QuadraticLandscape(
        centers=centers,
        curvatures=curvatures,
        scales=norms**2 / spec.norm_ratio,
        task_names=tuple(f"task_{i}" for i in range(spec.n_tasks)),
    )


def _correlation_matrix(spec: SyntheticTaskSpec) -> np.ndarray:
    if spec.label_correlation is not None:
        corr = np.asarray(spec.label_correlation, dtype=np.float64)
    else:
        corr = np.full((spec.n_tasks, spec.n_tasks), math.cos(spec.conflict_angle))
        np.fill_diagonal(corr, 1.0)
    if np.max(np.abs(corr - corr.T)) != 0.0:
        raise ValueError("label_correlation must be symmetric")
    eigvals, eigvecs = np.linalg.eigh(corr)
    if eigvals.min() < -1e-8:
        raise ValueError(
            f"label_correlation is not positive semidefinite (min eigenvalue {eigvals.min():g})"
        )
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def gen_classification(spec: SyntheticTaskSpec) -> SplitBatches:
    """Correlated multi-task binary classification data, split 8:1:1.

    Per-task concept vectors have pairwise cosines from the correlation
    matrix and norm logit_scale; labels are Bernoulli draws from the
    sigmoid of concept logits plus a per-group intercept. Positive rates
    fall geometrically from 0.5 by norm_ratio across tasks, so sparser
    tasks produce smaller gradients. Deterministic given the spec.
    """
    if spec.d_in < spec.n_tasks:
        raise ValueError("classification mode requires d_in >= n_tasks")
    if spec.samples < 10:
        raise ValueError("need at least 10 samples for non-empty 8:1:1 splits")
    rng = np.random.default_rng(spec.seed)
    factor = _correlation_matrix(spec)  # (T, T) with rows' inners = corr

    basis, _ = np.linalg.qr(rng.standard_normal((spec.d_in, spec.n_tasks)))
    weights = spec.logit_scale * (factor @ basis.T)  # (T, d_in)

    rates = 0.5 * (1.0 / spec.norm_ratio) ** (np.arange(spec.n_tasks) / max(spec.n_tasks - 1, 1))
    biases = -spec.logit_scale * ndtri(1.0 - rates)

    n = spec.samples
    features = rng.standard_normal((n, spec.d_in))
    group_ids = rng.integers(0, spec.group_count, n)
    group_offsets = rng.normal(0.0, spec.group_effect * spec.logit_scale, spec.group_count)

    logits = features @ weights.T + biases[None, :] + group_offsets[group_ids][:, None]
    probs = 0.5 * (np.tanh(0.5 * logits) + 1.0)
    labels = (rng.random((n, spec.n_tasks)) < probs).astype(np.float64)

    n_train = int(0.8 * n)
    n_valid = int(0.1 * n)
    cuts = (slice(0, n_train), slice(n_train, n_train + n_valid), slice(n_train + n_valid, n))
    parts = [
        LabeledBatch(features[sl], labels[sl], group_ids[sl]) for sl in cuts
    ]
    return SplitBatches(train=parts[0], valid=parts[1], test=parts[2])
