"""Command-line interface.

Subcommands:
  run <config>     train every configured strategy on the synthetic
                     benchmark, writing metrics, run logs and the resolved
                     config under the output directory
  craft <dump>     apply one crafting step to a gradient dump file
  sweep <config>   cross-product tau/epsilon sweep with a summary file

Exit codes: 0 success, 2 parse error (malformed file), 3 validation error
(well-formed but invalid input), 4 numerical failure. GRADCRAFT_OUTPUT_DIR
overrides the configured output directory; GRADCRAFT_THREADS caps BLAS
threads (applied at package import, before numpy loads).
"""

import argparse
import os
import sys

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradcraft",
        description="Multi-task gradient crafting experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured experiment")
    run_p.add_argument("config", help="experiment config (JSON)")

    craft_p = sub.add_parser("craft", help="craft a gradient dump file")
    craft_p.add_argument("dump", help="gradient dump file (JSON)")
    craft_p.add_argument("--strategy", default="GradCraft", help="strategy name (default GradCraft)")
    craft_p.add_argument("--tau", type=float, default=None, help="magnitude proximity in [0,1]")
    craft_p.add_argument("--eps", type=float, default=None, help="similarity target factor >= 0")
    craft_p.add_argument("--conflict-tol", type=float, default=None, help="conflict test strictness")
    craft_p.add_argument("--residual-tol", type=float, default=None, help="projection residual tolerance")
    craft_p.add_argument("--seed", type=int, default=None, help="rng seed for order-dependent strategies")
    craft_p.add_argument("--out", required=True, help="output record path (JSON)")

    sweep_p = sub.add_parser("sweep", help="run the tau/epsilon grid in a config")
    sweep_p.add_argument("config", help="experiment config with a sweep section (JSON)")
    return parser


def _craft_params(args) -> dict:
    flags = {
        "tau": args.tau,
        "epsilon": args.eps,
        "conflict_tol": args.conflict_tol,
        "residual_tol": args.residual_tol,
        "rng_seed": args.seed,
    }
    return {key: value for key, value in flags.items() if value is not None}


def _cmd_craft(args) -> int:
    from .formats import craft_record, load_gradient_dump, write_json
    from .strategies import make_strategy

    gs = load_gradient_dump(args.dump)
    strategy = make_strategy(args.strategy, **_craft_params(args))
    result = strategy.craft(gs)
    record = craft_record(args.strategy, strategy.get_params(), gs, result)
    write_json(args.out, record)
    print(f"crafted {gs.n_tasks} task gradients (dim {gs.dim}) -> {args.out}")
    return EXIT_OK


def _load_config(path):
    from .experiment import parse_config
    from .formats import load_json

    raw = load_json(path)
    config = parse_config(raw, source=str(path))
    return config


def _cmd_run(args) -> int:
    from .experiment import run_experiment

    config = _load_config(args.config)
    outdir = os.environ.get("GRADCRAFT_OUTPUT_DIR") or config.output_dir
    run_experiment(config, output_dir=outdir)
    print(f"experiment complete -> {outdir}/metrics.json")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .experiment import run_sweep

    config = _load_config(args.config)
    outdir = os.environ.get("GRADCRAFT_OUTPUT_DIR") or config.output_dir
    summary = run_sweep(config, output_dir=outdir)
    best = summary.get("best")
    print(f"sweep complete ({len(summary['cells'])} cells) -> {outdir}/sweep_summary.json")
    if best is not None:
        print(f"best cell: tau={best['tau']:g} epsilon={best['epsilon']:g}")
    return EXIT_OK


def main(argv=None) -> int:
    from .exceptions import (
        ConfigError,
        DegenerateGradientSetError,
        DumpParseError,
        DumpValidationError,
        SingularSystemError,
    )

    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "craft": _cmd_craft, "sweep": _cmd_sweep}
    try:
        return handlers[args.command](args)
    except DumpParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except (DumpValidationError, ConfigError, DegenerateGradientSetError, ValueError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SingularSystemError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
