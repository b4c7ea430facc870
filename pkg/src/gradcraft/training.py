"""Parameter updates and gradient checking.

The crafted gradient drives only the shared parameter segment; every task
head is updated with its own task's head gradient through the same
optimizer. SGD and bias-corrected Adam are supported, both operating on
one flat parameter vector with per-coordinate Adam moments.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParamLayout:
    """Slices of the flat parameter vector: one shared segment and one
    segment per task head (possibly none)."""

    shared: slice
    heads: tuple[slice, ...] = ()


@dataclass
class TrainState:
    """Mutable optimizer state for one training run (single owner)."""

    params: np.ndarray
    optimizer: str = "sgd"  # "sgd" or "adam"
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    step: int = 0
    seed: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def copy(self) -> "TrainState":
        return TrainState(
            params=self.params.copy(),
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            step=self.step,
            seed=self.seed,
            m=None if self.m is None else self.m.copy(),
            v=None if self.v is None else self.v.copy(),
        )


def init_state(params, optimizer: str = "sgd", learning_rate: float = 0.01, seed: int = 0) -> TrainState:
    params = np.array(params, dtype=np.float64)
    if params.ndim != 1:
        raise ValueError("params must be a flat vector")
    if optimizer not in ("sgd", "adam"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if not learning_rate > 0:
        raise ValueError("learning_rate must be > 0")
    state = TrainState(params=params, optimizer=optimizer, learning_rate=float(learning_rate), seed=int(seed))
    if optimizer == "adam":
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    return state


def apply_update(state: TrainState, layout: ParamLayout, crafted_shared, head_grads=()) -> TrainState:
    """Apply one optimizer step.

    The shared segment moves along the crafted gradient; head segment t
    moves along head_grads[t]. Segments with a zero gradient (and zero Adam
    moments) are left bit-identical. Mutates and returns ``state``.
    """
    crafted_shared = np.asarray(crafted_shared, dtype=np.float64)
    shared_len = state.params[layout.shared].shape[0]
    if crafted_shared.shape != (shared_len,):
        raise ValueError(
            f"crafted gradient has shape {crafted_shared.shape}, shared segment needs ({shared_len},)"
        )
    if len(head_grads) != len(layout.heads):
        raise ValueError(f"{len(head_grads)} head gradients for {len(layout.heads)} head segments")

    full = np.zeros_like(state.params)
    full[layout.shared] = crafted_shared
    for sl, grad in zip(layout.heads, head_grads):
        grad = np.asarray(grad, dtype=np.float64)
        seg_len = state.params[sl].shape[0]
        if grad.shape != (seg_len,):
            raise ValueError(f"head gradient shape {grad.shape} does not match segment ({seg_len},)")
        full[sl] = grad

    if state.optimizer == "sgd":
        state.params = state.params - state.learning_rate * full
    else:
        t = state.step + 1
        state.m = state.beta1 * state.m + (1.0 - state.beta1) * full
        state.v = state.beta2 * state.v + (1.0 - state.beta2) * full * full
        m_hat = state.m / (1.0 - state.beta1**t)
        v_hat = state.v / (1.0 - state.beta2**t)
        state.params = state.params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.adam_eps)
    state.step += 1
    return state


def grad_check(loss_fn, grad_fn, point, h: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    loss_fn(point) returns per-task losses (T,); grad_fn(point) returns the
    matching analytic gradients (T, n). Every coordinate is probed with a
    symmetric step h. The relative error divides by
    max(1e-8, |analytic| + |fd|) elementwise.
    """
    if not h > 0:
        raise ValueError("h must be > 0")
    point = np.asarray(point, dtype=np.float64)
    analytic = np.atleast_2d(np.asarray(grad_fn(point), dtype=np.float64))
    fd = np.empty_like(analytic)
    for k in range(point.shape[0]):
        bump = np.zeros_like(point)
        bump[k] = h
        hi = np.asarray(loss_fn(point + bump), dtype=np.float64)
        lo = np.asarray(loss_fn(point - bump), dtype=np.float64)
        fd[:, k] = (hi - lo) / (2.0 * h)
    rel = np.abs(analytic - fd) / np.maximum(1e-8, np.abs(analytic) + np.abs(fd))
    return float(rel.max())


def grad_check_landscape(land, theta, h: float = 1e-5) -> float:
    """grad_check specialized to a QuadraticLandscape at theta."""
    return grad_check(
        lambda p: land.losses_grads(p)[0],
        lambda p: land.losses_grads(p)[1].grads,
        theta,
        h=h,
    )


def grad_check_model(model, params, features, labels, h: float = 1e-5) -> float:
    """grad_check specialized to a SharedBottomModel on one batch.

    Per-task analytic gradients are assembled over the full parameter
    vector: the shared segment plus the task's own head (other heads have
    exactly zero gradient for that task's loss).
    """
    layout = model.layout

    def full_grads(p):
        shared, heads = model.task_gradients(p, features, labels)
        out = np.zeros((model.n_tasks, model.n_params))
        for t in range(model.n_tasks):
            out[t, layout.shared] = shared.grads[t]
            out[t, layout.heads[t]] = heads[t]
        return out

    return grad_check(
        lambda p: model.task_losses(p, features, labels),
        full_grads,
        np.asarray(params, dtype=np.float64),
        h=h,
    )
