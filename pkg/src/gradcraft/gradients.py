"""Per-task gradient bundles."""

from dataclasses import dataclass, field

import numpy as np

from . import linalg


@dataclass(frozen=True)
class GradientSet:
    """A stack of per-task gradients for one optimization step.

    ``grads`` is a (T, d) float64 array, one row per task; rows share the
    parameter dimension d. Task names are unique. The array is frozen on
    construction so crafting operations stay pure.
    """

    task_names: tuple[str, ...]
    grads: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.grads, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"grads must be 2-D (tasks x dim), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"grads must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("gradients contain non-finite values")
        names = tuple(str(n) for n in self.task_names)
        if len(names) != arr.shape[0]:
            raise ValueError(
                f"{len(names)} task names for {arr.shape[0]} gradient rows"
            )
        if len(set(names)) != len(names):
            raise ValueError("task names must be unique")
        arr.flags.writeable = False
        object.__setattr__(self, "task_names", names)
        object.__setattr__(self, "grads", arr)

    @property
    def n_tasks(self) -> int:
        return self.grads.shape[0]

    @property
    def dim(self) -> int:
        return self.grads.shape[1]

    def norms(self) -> np.ndarray:
        """Per-task Euclidean norms, computed row by row with linalg.norm."""
        return np.array([linalg.norm(g) for g in self.grads])

    def replace_grads(self, grads: np.ndarray) -> "GradientSet":
        return GradientSet(self.task_names, grads)


def as_gradient_set(grads, task_names=None) -> GradientSet:
    """Coerce a (T, d) array-like or GradientSet into a GradientSet.

    When names are omitted they default to task_0 .. task_{T-1}.
    """
    if isinstance(grads, GradientSet):
        if task_names is not None and tuple(task_names) != grads.task_names:
            raise ValueError("task_names conflict with those already on the GradientSet")
        return grads
    arr = np.asarray(grads, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if task_names is None:
        task_names = tuple(f"task_{i}" for i in range(arr.shape[0]))
    return GradientSet(tuple(task_names), arr)
