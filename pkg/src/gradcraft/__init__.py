"""Gradient crafting for multi-task optimization.

Balances per-task gradients in two stages: magnitudes are blended toward
the maximum task norm, then each gradient is projected so that it no longer
conflicts with any other task gradient, all conflicts being resolved through
one small positive-definite solve per task. Equal weighting, max-norm
balancing and pairwise projection baselines share the same combiner API.
"""

import os as _os

# BLAS thread pools read these at library load time, so the override has to
# be applied before numpy is imported anywhere in the process.
_threads = _os.environ.get("GRADCRAFT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .exceptions import (
    ConfigError,
    DegenerateGradientSetError,
    DumpParseError,
    DumpValidationError,
    GradCraftError,
    SingularSystemError,
    UndefinedMetricError,
)
from .gradients import GradientSet, as_gradient_set
from .crafting import (
    CraftReport,
    CraftResult,
    adjust_magnitudes,
    combine,
    detect_conflicts,
    project_task,
)
from .strategies import (
    DBMTL,
    STRATEGIES,
    EqualWeighting,
    GradCraft,
    GradCraftFixEps,
    GradCraftFixTau,
    GradCraftLocal,
    GradCraftOri,
    PCGrad,
    PCGradPlus,
    make_strategy,
)
from .landscape import QuadraticLandscape
from .models import SharedBottomModel
from .training import ParamLayout, TrainState, apply_update, grad_check, init_state
from .synth import LabeledBatch, SplitBatches, SyntheticTaskSpec, gen_classification, gen_quadratic
from .metrics import MetricTable, aggregate, auc, gauc
from .diagnostics import BalanceSnapshot, TrajectorySummary, snapshot, trajectory_summary

__version__ = "0.1.0"

__all__ = [
    "GradCraftError",
    "ConfigError",
    "DegenerateGradientSetError",
    "DumpParseError",
    "DumpValidationError",
    "SingularSystemError",
    "UndefinedMetricError",
    "GradientSet",
    "as_gradient_set",
    "CraftReport",
    "CraftResult",
    "adjust_magnitudes",
    "detect_conflicts",
    "project_task",
    "combine",
    "GradCraft",
    "GradCraftFixEps",
    "GradCraftFixTau",
    "GradCraftOri",
    "GradCraftLocal",
    "EqualWeighting",
    "DBMTL",
    "PCGrad",
    "PCGradPlus",
    "STRATEGIES",
    "make_strategy",
    "QuadraticLandscape",
    "SharedBottomModel",
    "ParamLayout",
    "TrainState",
    "init_state",
    "apply_update",
    "grad_check",
    "SyntheticTaskSpec",
    "LabeledBatch",
    "SplitBatches",
    "gen_classification",
    "gen_quadratic",
    "MetricTable",
    "auc",
    "gauc",
    "aggregate",
    "BalanceSnapshot",
    "TrajectorySummary",
    "snapshot",
    "trajectory_summary",
    "__version__",
]
