"""Analytic multi-task quadratic landscapes.

Each task i is loss_i(theta) = 0.5 * s_i * (theta - c_i)^T A_i (theta - c_i)
with A_i positive definite, so losses, gradients and minima are known in
closed form. These stand in for trained losses when exercising crafting
dynamics.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .exceptions import SingularSystemError
from .gradients import GradientSet


@dataclass(frozen=True)
class QuadraticLandscape:
    centers: np.ndarray = field(repr=False)     # (T, d)
    curvatures: np.ndarray = field(repr=False)  # (T, d, d), each SPD
    scales: np.ndarray = field(repr=False)      # (T,), each > 0
    task_names: tuple[str, ...] = ()

    def __post_init__(self):
        centers = np.array(self.centers, dtype=np.float64)
        curvatures = np.array(self.curvatures, dtype=np.float64)
        scales = np.array(self.scales, dtype=np.float64)
        if centers.ndim != 2:
            raise ValueError("centers must be (T, d)")
        n_tasks, dim = centers.shape
        if curvatures.shape != (n_tasks, dim, dim):
            raise ValueError(f"curvatures must be ({n_tasks}, {dim}, {dim}), got {curvatures.shape}")
        if scales.shape != (n_tasks,) or not np.all(scales > 0):
            raise ValueError("scales must be positive, one per task")
        names = self.task_names or tuple(f"task_{i}" for i in range(n_tasks))
        if len(names) != n_tasks:
            raise ValueError("task_names length must match centers")
        for i in range(n_tasks):
            asym = np.max(np.abs(curvatures[i] - curvatures[i].T))
            if asym != 0.0:
                raise ValueError(f"curvature {i} is not symmetric (max asymmetry {asym:g})")
            try:
                _, jitter = linalg.solve_spd(curvatures[i], np.zeros(dim))
            except SingularSystemError as err:
                raise ValueError(f"curvature {i} is not positive definite") from err
            if jitter != 0.0:
                raise ValueError(f"curvature {i} is not positive definite (needed jitter {jitter:g})")
        centers.flags.writeable = False
        curvatures.flags.writeable = False
        scales.flags.writeable = False
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "curvatures", curvatures)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "task_names", tuple(names))

    @property
    def n_tasks(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def losses_grads(self, theta) -> tuple[np.ndarray, GradientSet]:
        """Losses (T,) and the per-task gradient set at theta."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta must have shape ({self.dim},), got {theta.shape}")
        losses = np.empty(self.n_tasks)
        grads = np.empty((self.n_tasks, self.dim))
        for i in range(self.n_tasks):
            offset = theta - self.centers[i]
            pull = np.add.reduce(self.curvatures[i] * offset, axis=1)
            grads[i] = self.scales[i] * pull
            losses[i] = 0.5 * self.scales[i] * float(np.add.reduce(offset * pull))
        return losses, GradientSet(self.task_names, grads)

    def losses(self, theta) -> np.ndarray:
        return self.losses_grads(theta)[0]
