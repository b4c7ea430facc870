"""Shared-bottom multi-task model with exact analytic gradients.

A single hidden layer (identity or tanh) is shared by all tasks; each task
owns a linear head producing one logit per sample. Parameters live in one
flat float64 vector with a documented layout so the shared segment can be
crafted while each head segment is updated with its own task's gradient.
"""

from dataclasses import dataclass

import numpy as np

from .gradients import GradientSet
from .training import ParamLayout


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow for large |x|
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


@dataclass(frozen=True)
class SharedBottomModel:
    """Shapes and loss kinds of a shared-bottom model; parameters are passed
    to the methods as a flat vector.

    Flat layout: shared weights W (d_in * d_hidden, row-major), shared bias
    b (d_hidden), then per task in order: head weights (d_hidden) and head
    bias (1). ``layout`` exposes the segment slices.

    Each head is either a "bce" head (binary labels, logistic loss computed
    in log space) or an "mse" head (real labels, mean squared error on the
    raw logit).
    """

    d_in: int
    d_hidden: int
    task_names: tuple[str, ...]
    activation: str = "tanh"
    head_losses: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.d_in < 1 or self.d_hidden < 1:
            raise ValueError("d_in and d_hidden must be >= 1")
        names = tuple(str(n) for n in self.task_names)
        if len(names) < 1 or len(set(names)) != len(names):
            raise ValueError("task names must be non-empty and unique")
        if self.activation not in ("identity", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        losses = self.head_losses or ("bce",) * len(names)
        losses = tuple(losses)
        if len(losses) != len(names):
            raise ValueError("head_losses length must match task count")
        for kind in losses:
            if kind not in ("bce", "mse"):
                raise ValueError(f"unknown head loss {kind!r}")
        object.__setattr__(self, "task_names", names)
        object.__setattr__(self, "head_losses", losses)

    @property
    def n_tasks(self) -> int:
        return len(self.task_names)

    @property
    def n_shared(self) -> int:
        return self.d_in * self.d_hidden + self.d_hidden

    @property
    def n_params(self) -> int:
        return self.n_shared + self.n_tasks * (self.d_hidden + 1)

    @property
    def layout(self) -> ParamLayout:
        heads = []
        start = self.n_shared
        for _ in range(self.n_tasks):
            heads.append(slice(start, start + self.d_hidden + 1))
            start += self.d_hidden + 1
        return ParamLayout(shared=slice(0, self.n_shared), heads=tuple(heads))

    def init_params(self, seed: int = 0, scale: float = 0.01) -> np.ndarray:
        """Gaussian init, mean 0, std ``scale``."""
        rng = np.random.default_rng(seed)
        return rng.normal(0.0, scale, self.n_params)

    def _unpack(self, params: np.ndarray):
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ValueError(
                f"expected parameter vector of length {self.n_params}, got shape {params.shape}"
            )
        w_end = self.d_in * self.d_hidden
        shared_w = params[:w_end].reshape(self.d_in, self.d_hidden)
        shared_b = params[w_end : self.n_shared]
        heads = []
        for sl in self.layout.heads:
            seg = params[sl]
            heads.append((seg[:-1], seg[-1]))
        return shared_w, shared_b, heads

    def _check_batch(self, features, labels):
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.d_in:
            raise ValueError(f"features must be (batch, {self.d_in}), got {features.shape}")
        if features.shape[0] < 1:
            raise ValueError("batch must contain at least one sample")
        if labels.shape != (features.shape[0], self.n_tasks):
            raise ValueError(
                f"labels must be (batch, {self.n_tasks}), got {labels.shape}"
            )
        for t, kind in enumerate(self.head_losses):
            col = labels[:, t]
            if kind == "bce" and not np.all((col == 0.0) | (col == 1.0)):
                raise ValueError(f"bce head {self.task_names[t]!r} requires labels in {{0,1}}")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"labels for {self.task_names[t]!r} contain non-finite values")
        return features, labels

    def _forward(self, params, features):
        shared_w, shared_b, heads = self._unpack(params)
        pre = features @ shared_w + shared_b
        hidden = np.tanh(pre) if self.activation == "tanh" else pre
        logits = np.stack([hidden @ hw + hb for hw, hb in heads], axis=1)
        return pre, hidden, logits

    def predict_logits(self, params, features) -> np.ndarray:
        """(batch, T) logits."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.d_in:
            raise ValueError(f"features must be (batch, {self.d_in}), got {features.shape}")
        return self._forward(params, features)[2]

    def task_losses(self, params, features, labels) -> np.ndarray:
        """Per-task mean loss over the batch, shape (T,)."""
        features, labels = self._check_batch(features, labels)
        logits = self._forward(params, features)[2]
        out = np.empty(self.n_tasks)
        for t, kind in enumerate(self.head_losses):
            l, y = logits[:, t], labels[:, t]
            if kind == "bce":
                # log(1 + exp(l)) - y*l, computed stably
                out[t] = float(np.mean(np.logaddexp(0.0, l) - y * l))
            else:
                out[t] = float(np.mean((l - y) ** 2))
        return out

    def task_gradients(self, params, features, labels):
        """Exact gradients of each task's mean loss.

        Returns (shared, heads): ``shared`` is a GradientSet over the shared
        segment, one row per task, ready for crafting; ``heads`` is a list of
        per-task gradients for that task's own head segment.
        """
        features, labels = self._check_batch(features, labels)
        _, _, heads = self._unpack(params)
        pre, hidden, logits = self._forward(params, features)
        batch = features.shape[0]
        act_grad = (1.0 - hidden**2) if self.activation == "tanh" else np.ones_like(hidden)

        shared_rows = np.empty((self.n_tasks, self.n_shared))
        head_grads = []
        for t, kind in enumerate(self.head_losses):
            l, y = logits[:, t], labels[:, t]
            if kind == "bce":
                dlogit = (_sigmoid(l) - y) / batch
            else:
                dlogit = 2.0 * (l - y) / batch
            head_w = heads[t][0]
            dhidden = dlogit[:, None] * head_w[None, :]
            dpre = dhidden * act_grad
            dw = features.T @ dpre
            db = dpre.sum(axis=0)
            shared_rows[t] = np.concatenate([dw.ravel(), db])
            head_grads.append(np.concatenate([hidden.T @ dlogit, [dlogit.sum()]]))
        return GradientSet(self.task_names, shared_rows), head_grads
