"""Gradient combination strategies with a scikit-learn style estimator API.

Every strategy is a stateless transformer over a (T, d) stack of task
gradients: ``transform`` returns the combined (d,) update direction, and
``craft`` additionally returns the per-task deconflicted gradients and a
diagnostics report. Hyper-parameters follow the sklearn convention
(constructor args stored verbatim, ``get_params`` / ``set_params`` /
``clone`` all work), so strategies drop into grid-search style sweeps.
"""

from sklearn.base import BaseEstimator, TransformerMixin

from .crafting import CraftResult, craft_global, craft_pairwise
from .gradients import as_gradient_set
from .validation import check_nonnegative, check_unit_interval


class BaseCombiner(BaseEstimator, TransformerMixin):
    """Shared fit/transform plumbing; subclasses implement _craft."""

    def fit(self, X, y=None):
        """Stateless; validates the input and returns self."""
        as_gradient_set(X)
        return self

    def transform(self, X):
        """Combined update direction for a (T, d) gradient stack."""
        return self.craft(X).combined

    def craft(self, grads, task_names=None) -> CraftResult:
        """Full crafting step: combined update, per-task gradients, report."""
        gs = as_gradient_set(grads, task_names)
        self._check_params()
        return self._craft(gs)

    def _check_params(self):
        pass

    def _craft(self, gs) -> CraftResult:
        raise NotImplementedError


class GradCraft(BaseCombiner):
    """Magnitude alignment followed by global direction deconfliction.

    tau in [0, 1] controls how far each gradient norm is pulled toward the
    maximum task norm (0 keeps original magnitudes, 1 equalizes them; the
    post-adjustment norm spread is bounded by 1/tau). epsilon >= 0 sets the
    required post-projection similarity between a task gradient and each
    gradient it conflicted with, as a fraction of the product of their
    norms; 0 targets exact orthogonality.

    conflict_tol is the strictness of the conflict test (a pair conflicts
    when its inner product is < -conflict_tol). residual_tol is the
    tolerance granted to projection residual checks by downstream
    diagnostics; it does not alter the computation.
    """

    def __init__(self, tau=0.1, epsilon=0.0, conflict_tol=0.0, residual_tol=1e-6):
        self.tau = tau
        self.epsilon = epsilon
        self.conflict_tol = conflict_tol
        self.residual_tol = residual_tol

    def _check_params(self):
        check_unit_interval(self.tau, "tau")
        check_nonnegative(self.epsilon, "epsilon")
        check_nonnegative(self.residual_tol, "residual_tol")

    def _craft(self, gs):
        return craft_global(
            gs,
            tau=self.tau,
            epsilon=self.epsilon,
            conflict_tol=self.conflict_tol,
            adjust=True,
            project=True,
        )


class GradCraftFixEps(GradCraft):
    """GradCraft ablation: epsilon pinned to 0 (orthogonality targets)."""

    def __init__(self, tau=0.1, conflict_tol=0.0, residual_tol=1e-6):
        super().__init__(tau=tau, epsilon=0.0, conflict_tol=conflict_tol, residual_tol=residual_tol)


class GradCraftFixTau(GradCraft):
    """GradCraft ablation: tau pinned to 1 (full equalization to the max norm)."""

    def __init__(self, epsilon=0.0, conflict_tol=0.0, residual_tol=1e-6):
        super().__init__(tau=1.0, epsilon=epsilon, conflict_tol=conflict_tol, residual_tol=residual_tol)


class GradCraftOri(BaseCombiner):
    """GradCraft ablation: no magnitude adjustment, global projection only."""

    def __init__(self, epsilon=0.0, conflict_tol=0.0, residual_tol=1e-6):
        self.epsilon = epsilon
        self.conflict_tol = conflict_tol
        self.residual_tol = residual_tol

    def _check_params(self):
        check_nonnegative(self.epsilon, "epsilon")

    def _craft(self, gs):
        return craft_global(
            gs,
            epsilon=self.epsilon,
            conflict_tol=self.conflict_tol,
            adjust=False,
            project=True,
        )


class GradCraftLocal(BaseCombiner):
    """GradCraft ablation: magnitude adjustment, then sequential pairwise
    projection instead of the global solve."""

    def __init__(self, tau=0.1, rng_seed=0):
        self.tau = tau
        self.rng_seed = rng_seed

    def _check_params(self):
        check_unit_interval(self.tau, "tau")

    def _craft(self, gs):
        return craft_pairwise(gs, tau=self.tau, adjust=True, rng_seed=self.rng_seed)


class EqualWeighting(BaseCombiner):
    """Plain mean of the task gradients (weight 1/T each)."""

    def _craft(self, gs):
        return craft_global(gs, adjust=False, project=False)


class DBMTL(BaseCombiner):
    """Equalizes every gradient norm to the maximum before averaging."""

    def _craft(self, gs):
        return craft_global(gs, tau=1.0, adjust=True, project=False)


class PCGrad(BaseCombiner):
    """Sequential pairwise conflict surgery on the raw gradients.

    Task order within each surgery pass is drawn from rng_seed, the only
    source of randomness in any strategy.
    """

    def __init__(self, rng_seed=0):
        self.rng_seed = rng_seed

    def _craft(self, gs):
        return craft_pairwise(gs, adjust=False, rng_seed=self.rng_seed)


class PCGradPlus(BaseCombiner):
    """Pairwise surgery applied after magnitude adjustment with tau."""

    def __init__(self, tau=0.1, rng_seed=0):
        self.tau = tau
        self.rng_seed = rng_seed

    def _check_params(self):
        check_unit_interval(self.tau, "tau")

    def _craft(self, gs):
        return craft_pairwise(gs, tau=self.tau, adjust=True, rng_seed=self.rng_seed)


STRATEGIES = {
    "GradCraft": GradCraft,
    "GradCraftFixEps": GradCraftFixEps,
    "GradCraftFixTau": GradCraftFixTau,
    "GradCraftOri": GradCraftOri,
    "GradCraftLocal": GradCraftLocal,
    "EW": EqualWeighting,
    "DBMTL": DBMTL,
    "PCGrad": PCGrad,
    "PCGradPlus": PCGradPlus,
}


def make_strategy(name: str, **params) -> BaseCombiner:
    """Instantiate a strategy by registry name.

    Unknown names or parameters the strategy does not accept raise
    ValueError listing what is available.
    """
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; available: {sorted(STRATEGIES)}")
    cls = STRATEGIES[name]
    accepted = cls().get_params()
    unknown = set(params) - set(accepted)
    if unknown:
        raise ValueError(
            f"strategy {name} does not accept parameter(s) {sorted(unknown)}; "
            f"accepted: {sorted(accepted)}"
        )
    return cls(**params)
