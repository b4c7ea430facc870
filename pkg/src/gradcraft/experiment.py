"""Config-driven experiment runner and hyper-parameter sweeps.

A run trains every configured strategy on a synthetic benchmark for each
seed, following the crafting loop: compute per-task gradients, craft a
combined update for the shared parameters, step the optimizer, repeat
until the step budget or early stopping. The single-task reference (one
run per task that trains on that task alone) is always executed so
relative-improvement metrics have their baseline. All artifacts are
canonical JSON; identical configs reproduce them byte for byte.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import snapshot, trajectory_summary
from .exceptions import ConfigError
from .formats import FORMAT_VERSION, write_json, write_jsonl
from .metrics import aggregate, auc, gauc
from .models import SharedBottomModel
from .strategies import STRATEGIES, make_strategy
from .synth import SyntheticTaskSpec, gen_classification, gen_quadratic
from .training import ParamLayout, apply_update, init_state

BENCHMARKS = ("quadratic", "classification")
OPTIMIZERS = ("sgd", "adam")

_TASK_FIELDS = {
    "n_tasks": int,
    "conflict_angle": float,
    "norm_ratio": float,
    "samples": int,
    "d_in": int,
    "group_count": int,
    "seed": int,
    "label_correlation": list,
    "logit_scale": float,
    "group_effect": float,
}


@dataclass(frozen=True)
class StrategyConfig:
    name: str
    params: dict = field(default_factory=dict)
    learning_rate: float | None = None

    @property
    def label(self) -> str:
        """Directory/metric key: name plus any non-default params."""
        if not self.params:
            return self.name
        parts = [f"{k}={self.params[k]:g}" if isinstance(self.params[k], float) else f"{k}={self.params[k]}"
                 for k in sorted(self.params)]
        return self.name + "[" + ",".join(parts) + "]"


@dataclass(frozen=True)
class SweepConfig:
    strategy: str
    tau_grid: tuple[float, ...]
    epsilon_grid: tuple[float, ...]
    params: dict = field(default_factory=dict)
    learning_rate: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark: str
    tasks: SyntheticTaskSpec
    strategies: tuple[StrategyConfig, ...]
    seeds: tuple[int, ...]
    optimizer: str = "sgd"
    learning_rate: float = 0.1
    max_steps: int = 100
    batch_size: int = 256
    d_hidden: int = 8
    activation: str = "tanh"
    eval_every: int = 50
    patience: int | None = None
    log_every: int = 1
    output_dir: str = "out"
    sweep: SweepConfig | None = None


def _expect(mapping, key, kinds, path, default=None, required=False):
    if key not in mapping:
        if required:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    value = mapping[key]
    if isinstance(value, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ConfigError(f"{path}.{key}: unexpected boolean")
    if not isinstance(value, kinds):
        kind_names = kinds.__name__ if not isinstance(kinds, tuple) else "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{path}.{key}: expected {kind_names}, got {type(value).__name__}")
    return value


def _parse_tasks(raw, path) -> SyntheticTaskSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected object")
    unknown = set(raw) - set(_TASK_FIELDS)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")
    kwargs = {}
    for key, kind in _TASK_FIELDS.items():
        if key not in raw:
            continue
        value = raw[key]
        if kind in (int, float) and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"{path}.{key}: expected number, got {type(value).__name__}")
        kwargs[key] = kind(value) if kind in (int, float) else value
    if "n_tasks" not in kwargs:
        raise ConfigError(f"{path}.n_tasks: required field is missing")
    try:
        return SyntheticTaskSpec(**kwargs)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err


def _parse_strategy(raw, path) -> StrategyConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected object")
    name = _expect(raw, "name", str, path, required=True)
    if name != "Single" and name not in STRATEGIES:
        raise ConfigError(
            f"{path}.name: unknown strategy {name!r}; available: {sorted(STRATEGIES) + ['Single']}"
        )
    lr = _expect(raw, "learning_rate", (int, float), path)
    params = {k: v for k, v in raw.items() if k not in ("name", "learning_rate")}
    if name == "Single" and params:
        raise ConfigError(f"{path}: Single takes no parameters, got {sorted(params)}")
    if name != "Single":
        try:
            make_strategy(name, **params)._check_params()
        except (ValueError, TypeError) as err:
            raise ConfigError(f"{path}: {err}") from err
    return StrategyConfig(name=name, params=params, learning_rate=None if lr is None else float(lr))


def parse_config(raw: dict, source: str = "config") -> ExperimentConfig:
    """Validate a raw config mapping; errors carry the offending field path."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    version = raw.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{source}.format_version: unsupported version {version!r}")
    known = {
        "format_version", "benchmark", "tasks", "strategies", "seeds", "optimizer",
        "learning_rate", "max_steps", "batch_size", "d_hidden", "activation",
        "eval_every", "patience", "log_every", "output_dir", "sweep",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{source}: unknown field(s) {sorted(unknown)}")

    benchmark = _expect(raw, "benchmark", str, source, required=True)
    if benchmark not in BENCHMARKS:
        raise ConfigError(f"{source}.benchmark: must be one of {BENCHMARKS}, got {benchmark!r}")
    tasks = _parse_tasks(raw.get("tasks"), f"{source}.tasks")

    raw_strategies = _expect(raw, "strategies", list, source, required=True)
    if not raw_strategies:
        raise ConfigError(f"{source}.strategies: need at least one strategy")
    strategies = tuple(
        _parse_strategy(entry, f"{source}.strategies[{i}]") for i, entry in enumerate(raw_strategies)
    )
    labels = [s.label for s in strategies]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"{source}.strategies: duplicate strategy entries")

    seeds = _expect(raw, "seeds", list, source, required=True)
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError(f"{source}.seeds: need a non-empty list of integers")

    optimizer = _expect(raw, "optimizer", str, source, default="sgd")
    if optimizer not in OPTIMIZERS:
        raise ConfigError(f"{source}.optimizer: must be one of {OPTIMIZERS}, got {optimizer!r}")
    learning_rate = float(_expect(raw, "learning_rate", (int, float), source, default=0.1))
    if not learning_rate > 0:
        raise ConfigError(f"{source}.learning_rate: must be > 0")
    max_steps = _expect(raw, "max_steps", int, source, default=100)
    if max_steps < 1:
        raise ConfigError(f"{source}.max_steps: must be >= 1")
    batch_size = _expect(raw, "batch_size", int, source, default=256)
    if batch_size < 1:
        raise ConfigError(f"{source}.batch_size: must be >= 1")
    d_hidden = _expect(raw, "d_hidden", int, source, default=8)
    activation = _expect(raw, "activation", str, source, default="tanh")
    if activation not in ("identity", "tanh"):
        raise ConfigError(f"{source}.activation: must be 'identity' or 'tanh'")
    eval_every = _expect(raw, "eval_every", int, source, default=50)
    if eval_every < 1:
        raise ConfigError(f"{source}.eval_every: must be >= 1")
    patience = _expect(raw, "patience", (int, type(None)), source, default=None)
    if patience is not None and patience < 0:
        raise ConfigError(f"{source}.patience: must be >= 0 or null")
    log_every = _expect(raw, "log_every", int, source, default=1)
    if log_every < 0:
        raise ConfigError(f"{source}.log_every: must be >= 0 (0 disables logging)")
    output_dir = _expect(raw, "output_dir", str, source, default="out")

    sweep = None
    if raw.get("sweep") is not None:
        sraw = raw["sweep"]
        if not isinstance(sraw, dict):
            raise ConfigError(f"{source}.sweep: expected object")
        sname = _expect(sraw, "strategy", str, f"{source}.sweep", default="GradCraft")
        if sname not in STRATEGIES:
            raise ConfigError(f"{source}.sweep.strategy: unknown strategy {sname!r}")
        tau_grid = _expect(sraw, "tau_grid", list, f"{source}.sweep", required=True)
        eps_grid = _expect(sraw, "epsilon_grid", list, f"{source}.sweep", required=True)
        if not tau_grid or not eps_grid:
            raise ConfigError(f"{source}.sweep: tau_grid and epsilon_grid must be non-empty")
        for label, grid in (("tau_grid", tau_grid), ("epsilon_grid", eps_grid)):
            for i, v in enumerate(grid):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f"{source}.sweep.{label}[{i}]: expected number")
        slr = _expect(sraw, "learning_rate", (int, float), f"{source}.sweep")
        sparams = {
            k: v for k, v in sraw.items()
            if k not in ("strategy", "tau_grid", "epsilon_grid", "learning_rate")
        }
        probe = dict(sparams)
        probe.setdefault("tau", float(tau_grid[0]))
        probe.setdefault("epsilon", float(eps_grid[0]))
        try:
            make_strategy(sname, **probe)._check_params()
        except (ValueError, TypeError) as err:
            raise ConfigError(f"{source}.sweep: {err}") from err
        sweep = SweepConfig(
            strategy=sname,
            tau_grid=tuple(float(v) for v in tau_grid),
            epsilon_grid=tuple(float(v) for v in eps_grid),
            params=sparams,
            learning_rate=None if slr is None else float(slr),
        )

    return ExperimentConfig(
        benchmark=benchmark,
        tasks=tasks,
        strategies=strategies,
        seeds=tuple(seeds),
        optimizer=optimizer,
        learning_rate=learning_rate,
        max_steps=max_steps,
        batch_size=batch_size,
        d_hidden=d_hidden,
        activation=activation,
        eval_every=eval_every,
        patience=patience,
        log_every=log_every,
        output_dir=output_dir,
        sweep=sweep,
    )


def resolve_config(config: ExperimentConfig) -> dict:
    """Fully-materialized config mapping; feeding it back reproduces the run."""
    tasks = {
        "n_tasks": config.tasks.n_tasks,
        "conflict_angle": config.tasks.conflict_angle,
        "norm_ratio": config.tasks.norm_ratio,
        "samples": config.tasks.samples,
        "d_in": config.tasks.d_in,
        "group_count": config.tasks.group_count,
        "seed": config.tasks.seed,
        "logit_scale": config.tasks.logit_scale,
        "group_effect": config.tasks.group_effect,
    }
    if config.tasks.label_correlation is not None:
        tasks["label_correlation"] = [list(row) for row in config.tasks.label_correlation]
    out = {
        "format_version": FORMAT_VERSION,
        "benchmark": config.benchmark,
        "tasks": tasks,
        "strategies": [
            {"name": s.name, **s.params}
            | ({} if s.learning_rate is None else {"learning_rate": s.learning_rate})
            for s in config.strategies
        ],
        "seeds": list(config.seeds),
        "optimizer": config.optimizer,
        "learning_rate": config.learning_rate,
        "max_steps": config.max_steps,
        "batch_size": config.batch_size,
        "d_hidden": config.d_hidden,
        "activation": config.activation,
        "eval_every": config.eval_every,
        "patience": config.patience,
        "log_every": config.log_every,
        "output_dir": config.output_dir,
    }
    if config.sweep is not None:
        out["sweep"] = {
            "strategy": config.sweep.strategy,
            "tau_grid": list(config.sweep.tau_grid),
            "epsilon_grid": list(config.sweep.epsilon_grid),
            **config.sweep.params,
        } | ({} if config.sweep.learning_rate is None else {"learning_rate": config.sweep.learning_rate})
    return out


@dataclass
class RunOutcome:
    status: str
    final_losses: np.ndarray | None
    steps_run: int
    log_rows: list
    summary: dict | None
    test_auc: np.ndarray | None = None
    test_gauc: np.ndarray | None = None


def _make_combiner(strategy: StrategyConfig):
    return make_strategy(strategy.name, **strategy.params)


def _log_row(step, losses, snap=None):
    row = {
        "step": int(step),
        "losses": [float(v) for v in losses],
        "mean_loss": float(np.mean(losses)),
    }
    if snap is not None:
        row.update(snap.to_dict())
    return row


# Magnitudes past this bound are treated as divergence before norms and
# losses can overflow to inf.
_DIVERGE_LIMIT = 1e100


def _healthy(losses, gs) -> bool:
    return bool(
        np.all(np.isfinite(losses))
        and np.all(np.abs(losses) < _DIVERGE_LIMIT)
        and np.all(np.abs(gs.grads) < _DIVERGE_LIMIT)
    )


def _train_quadratic(landscape, combiner, single_task, config, lr, seed) -> RunOutcome:
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, 0.01, landscape.dim)
    state = init_state(theta, config.optimizer, lr, seed=seed)
    layout = ParamLayout(shared=slice(0, landscape.dim))
    log_rows, snapshots = [], []
    best, stale = math.inf, 0
    status, step = "ok", 0
    for step in range(config.max_steps):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                losses, gs = landscape.losses_grads(state.params)
        except ValueError:
            status = "diverged"
            break
        if not _healthy(losses, gs):
            status = "diverged"
            break
        snap = None
        if single_task is None:
            result = combiner.craft(gs)
            combined = result.combined
            snap = snapshot(
                gs, result.adjusted, result.per_task,
                epsilon=getattr(combiner, "epsilon", 0.0),
                conflict_tol=getattr(combiner, "conflict_tol", 0.0),
                step=step,
            )
            snapshots.append(snap)
        else:
            combined = gs.grads[single_task]
        if config.log_every and step % config.log_every == 0:
            log_rows.append(_log_row(step, losses, snap))
        apply_update(state, layout, combined)
        if config.patience is not None and (step + 1) % config.eval_every == 0:
            val = float(np.mean(landscape.losses(state.params)))
            if val < best - 1e-12:
                best, stale = val, 0
            else:
                stale += 1
                if stale > config.patience:
                    break
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            final = landscape.losses(state.params)
    except ValueError:
        final = np.full(landscape.n_tasks, np.inf)
    if not np.all(np.isfinite(final)):
        status = "diverged"
    summary = trajectory_summary(
        snapshots, residual_tol=getattr(combiner, "residual_tol", 1e-6)
    ).to_dict() if snapshots else None
    return RunOutcome(
        status=status,
        final_losses=final if np.all(np.isfinite(final)) else None,
        steps_run=step + 1,
        log_rows=log_rows,
        summary=summary,
    )


def _train_classification(splits, model, combiner, single_task, config, lr, seed) -> RunOutcome:
    params = model.init_params(seed)
    state = init_state(params, config.optimizer, lr, seed=seed)
    layout = model.layout
    shuffle_rng = np.random.default_rng((seed, 1))
    train = splits.train
    order = shuffle_rng.permutation(train.n_samples)
    cursor = 0
    log_rows, snapshots = [], []
    best, stale = math.inf, 0
    best_params = state.params.copy()
    status, step = "ok", 0
    for step in range(config.max_steps):
        if cursor + config.batch_size > train.n_samples:
            order = shuffle_rng.permutation(train.n_samples)
            cursor = 0
        idx = order[cursor : cursor + config.batch_size]
        cursor += config.batch_size
        features, labels = train.features[idx], train.labels[idx]
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                losses = model.task_losses(state.params, features, labels)
                shared, head_grads = model.task_gradients(state.params, features, labels)
        except ValueError:
            status = "diverged"
            break
        if not _healthy(losses, shared):
            status = "diverged"
            break
        snap = None
        if single_task is None:
            result = combiner.craft(shared)
            combined = result.combined
            snap = snapshot(
                shared, result.adjusted, result.per_task,
                epsilon=getattr(combiner, "epsilon", 0.0),
                conflict_tol=getattr(combiner, "conflict_tol", 0.0),
                step=step,
            )
            snapshots.append(snap)
        else:
            combined = shared.grads[single_task]
            head_grads = [
                g if t == single_task else np.zeros_like(g) for t, g in enumerate(head_grads)
            ]
        if config.log_every and step % config.log_every == 0:
            log_rows.append(_log_row(step, losses, snap))
        apply_update(state, layout, combined, head_grads)
        if (step + 1) % config.eval_every == 0:
            val_losses = model.task_losses(state.params, splits.valid.features, splits.valid.labels)
            if single_task is not None:
                val = float(val_losses[single_task])
            else:
                val = float(np.mean(val_losses))
            if val < best - 1e-12:
                best, stale = val, 0
                best_params = state.params.copy()
            else:
                stale += 1
                if config.patience is not None and stale > config.patience:
                    break
    if status != "ok":
        return RunOutcome(
            status=status,
            final_losses=None,
            steps_run=step + 1,
            log_rows=log_rows,
            summary=None,
        )
    if best == math.inf:
        best_params = state.params
    final = model.task_losses(best_params, splits.valid.features, splits.valid.labels)
    test = splits.test
    logits = model.predict_logits(best_params, test.features)
    test_auc = np.array([auc(logits[:, t], test.labels[:, t]) for t in range(model.n_tasks)])
    test_gauc = np.array(
        [gauc(logits[:, t], test.labels[:, t], test.group_ids) for t in range(model.n_tasks)]
    )
    summary = trajectory_summary(
        snapshots, residual_tol=getattr(combiner, "residual_tol", 1e-6)
    ).to_dict() if snapshots else None
    return RunOutcome(
        status=status,
        final_losses=final,
        steps_run=step + 1,
        log_rows=log_rows,
        summary=summary,
        test_auc=test_auc,
        test_gauc=test_gauc,
    )


def _run_one(benchmark_data, config, strategy: StrategyConfig | None, single_task, seed, lr=None) -> RunOutcome:
    if lr is None:
        lr = config.learning_rate if (strategy is None or strategy.learning_rate is None) else strategy.learning_rate
    combiner = None if strategy is None else _make_combiner(strategy)
    if config.benchmark == "quadratic":
        return _train_quadratic(benchmark_data, combiner, single_task, config, lr, seed)
    splits, model = benchmark_data
    return _train_classification(splits, model, combiner, single_task, config, lr, seed)


def _prepare_benchmark(config: ExperimentConfig):
    if config.benchmark == "quadratic":
        return gen_quadratic(config.tasks)
    splits = gen_classification(config.tasks)
    model = SharedBottomModel(
        d_in=config.tasks.d_in,
        d_hidden=config.d_hidden,
        task_names=tuple(f"task_{i}" for i in range(config.tasks.n_tasks)),
        activation=config.activation,
    )
    return splits, model


def _single_reference(benchmark_data, config, single_lr, outdir=None):
    """One solo run per (task, seed); returns per-seed reference vectors."""
    n_tasks = config.tasks.n_tasks
    ref = {}
    for seed in config.seeds:
        per_task = []
        for t in range(n_tasks):
            outcome = _run_one(benchmark_data, config, None, t, seed, lr=single_lr)
            if outdir is not None:
                run_dir = Path(outdir) / "runs" / "Single" / f"task_{t}" / f"seed_{seed}"
                _write_run(run_dir, outcome, config)
            per_task.append(outcome)
        ref[seed] = per_task
    return ref


def _write_run(run_dir: Path, outcome: RunOutcome, config: ExperimentConfig):
    run_dir.mkdir(parents=True, exist_ok=True)
    if config.log_every:
        write_jsonl(run_dir / "log.jsonl", outcome.log_rows)
    record = {
        "format_version": FORMAT_VERSION,
        "status": outcome.status,
        "steps_run": outcome.steps_run,
        "final_losses": None if outcome.final_losses is None else [float(v) for v in outcome.final_losses],
        "diagnostics": outcome.summary,
    }
    if outcome.test_auc is not None:
        record["test_auc"] = [float(v) for v in outcome.test_auc]
        record["test_gauc"] = [float(v) for v in outcome.test_gauc]
    write_json(run_dir / "result.json", record)


def _seed_metrics(config, outcome: RunOutcome, single_runs) -> dict:
    """Per-seed metric record for one strategy run."""
    if outcome.status != "ok":
        return {"status": outcome.status}
    if any(run.status != "ok" for run in single_runs):
        return {"status": "reference_failed"}
    if config.benchmark == "quadratic":
        losses = [float(v) for v in outcome.final_losses]
        single_final = [
            None if single_runs[t].final_losses is None else float(single_runs[t].final_losses[t])
            for t in range(len(losses))
        ]
        return {
            "status": "ok",
            "final_losses": losses,
            "worse_task_loss": max(losses),
            "mean_task_loss": float(np.mean(losses)),
            "single_final_losses": single_final,
        }
    single_auc = np.array([single_runs[t].test_auc[t] for t in range(config.tasks.n_tasks)])
    single_gauc = np.array([single_runs[t].test_gauc[t] for t in range(config.tasks.n_tasks)])
    table = aggregate(outcome.test_auc, single_auc, outcome.test_gauc, single_gauc)
    return {"status": "ok", **table.to_dict()}


def _mean_metrics(per_seed: dict) -> dict:
    ok = [m for m in per_seed.values() if m.get("status") == "ok"]
    out = {"n_seeds": len(per_seed), "n_ok": len(ok)}
    if not ok:
        return out
    numeric = [
        k for k, v in ok[0].items()
        if isinstance(v, (int, float)) and not isinstance(v, bool) and k != "status"
    ]
    for key in numeric:
        out[f"mean_{key}"] = float(np.mean([m[key] for m in ok]))
    return out


def run_experiment(config: ExperimentConfig, output_dir=None) -> dict:
    """Execute all (strategy, seed) runs and write artifacts.

    Returns the metrics mapping that was written to metrics.json. The
    single-task reference runs always execute, once per (task, seed).
    """
    outdir = Path(output_dir if output_dir is not None else config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "resolved_config.json", resolve_config(config))

    benchmark_data = _prepare_benchmark(config)
    single_cfg = next((s for s in config.strategies if s.name == "Single"), None)
    single_lr = None if single_cfg is None else single_cfg.learning_rate
    reference = _single_reference(benchmark_data, config, single_lr, outdir)

    metrics = {"format_version": FORMAT_VERSION, "benchmark": config.benchmark, "strategies": {}}
    for strategy in config.strategies:
        per_seed = {}
        for seed in config.seeds:
            if strategy.name == "Single":
                # reference for task t comes from the solo run that trained task t
                outcomes = reference[seed]
                merged = _merge_single(config, outcomes)
                per_seed[str(seed)] = _seed_metrics(config, merged, outcomes)
            else:
                outcome = _run_one(benchmark_data, config, strategy, None, seed)
                run_dir = outdir / "runs" / strategy.label / f"seed_{seed}"
                _write_run(run_dir, outcome, config)
                per_seed[str(seed)] = _seed_metrics(config, outcome, reference[seed])
        metrics["strategies"][strategy.label] = {
            "per_seed": per_seed,
            "mean": _mean_metrics(per_seed),
        }
    write_json(outdir / "metrics.json", metrics)
    return metrics


def _merge_single(config, outcomes) -> RunOutcome:
    """Assemble the diagonal of the solo runs into one reference outcome."""
    n_tasks = config.tasks.n_tasks
    status = "ok" if all(o.status == "ok" for o in outcomes) else "diverged"
    if status != "ok":
        return RunOutcome(status=status, final_losses=None, steps_run=0, log_rows=[], summary=None)
    final = np.array([outcomes[t].final_losses[t] for t in range(n_tasks)])
    merged = RunOutcome(
        status="ok",
        final_losses=final,
        steps_run=max(o.steps_run for o in outcomes),
        log_rows=[],
        summary=None,
    )
    if outcomes[0].test_auc is not None:
        merged.test_auc = np.array([outcomes[t].test_auc[t] for t in range(n_tasks)])
        merged.test_gauc = np.array([outcomes[t].test_gauc[t] for t in range(n_tasks)])
    return merged


def run_sweep(config: ExperimentConfig, output_dir=None) -> dict:
    """Cross-product tau/epsilon sweep on the configured benchmark.

    Cells run in grid order (tau outer, epsilon inner) for every seed; each
    cell reports per-seed metrics, their means, and a status. The summary
    names the best cell: highest mean AV-G on classification benchmarks,
    lowest mean worse-task final loss on quadratic ones.
    """
    if config.sweep is None:
        raise ConfigError("config.sweep: required for the sweep command")
    outdir = Path(output_dir if output_dir is not None else config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "resolved_config.json", resolve_config(config))

    benchmark_data = _prepare_benchmark(config)
    reference = _single_reference(benchmark_data, config, None)

    sweep = config.sweep
    cells = []
    for tau in sweep.tau_grid:
        for eps in sweep.epsilon_grid:
            params = dict(sweep.params)
            params["tau"] = tau
            params["epsilon"] = eps
            strategy = StrategyConfig(name=sweep.strategy, params=params, learning_rate=sweep.learning_rate)
            per_seed = {}
            cell_status = "ok"
            for seed in config.seeds:
                try:
                    outcome = _run_one(benchmark_data, config, strategy, None, seed)
                except Exception as err:  # keep sweeping; record the failure
                    per_seed[str(seed)] = {"status": f"error: {err}"}
                    cell_status = "partial"
                    continue
                per_seed[str(seed)] = _seed_metrics(config, outcome, reference[seed])
                if outcome.status != "ok":
                    cell_status = "partial"
            cells.append({
                "tau": tau,
                "epsilon": eps,
                "status": cell_status,
                "per_seed": per_seed,
                "mean": _mean_metrics(per_seed),
            })

    if config.benchmark == "classification":
        criterion, sign = "mean_av_gauc", -1.0
    else:
        criterion, sign = "mean_worse_task_loss", 1.0
    best = None
    for cell in cells:
        value = cell["mean"].get(criterion)
        if value is None:
            continue
        if best is None or sign * value < sign * best[0]:
            best = (value, cell["tau"], cell["epsilon"])
    summary = {
        "format_version": FORMAT_VERSION,
        "benchmark": config.benchmark,
        "strategy": sweep.strategy,
        "tau_grid": list(sweep.tau_grid),
        "epsilon_grid": list(sweep.epsilon_grid),
        "criterion": criterion,
        "cells": cells,
        "best": None if best is None else {"tau": best[1], "epsilon": best[2], criterion: best[0]},
    }
    write_json(outdir / "sweep_summary.json", summary)
    return summary
