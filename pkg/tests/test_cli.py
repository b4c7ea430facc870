import json
import math
import shutil
from pathlib import Path

import numpy as np

from gradcraft import GradCraft, cli
from gradcraft.exceptions import SingularSystemError
from gradcraft.formats import load_gradient_dump

DATA = Path(__file__).parent / "data"


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


class TestCraftCommand:
    def test_matches_committed_golden(self, tmp_path):
        out = tmp_path / "craft.json"
        code = run_cli(
            "craft", DATA / "conflict_pair_dump.json",
            "--strategy", "GradCraft", "--tau", "0", "--eps", "0", "--out", out,
        )
        assert code == cli.EXIT_OK
        assert out.read_bytes() == (DATA / "golden_craft_output.json").read_bytes()
        record = json.loads(out.read_text())
        assert record["combined"] == [1.0, 0.5]

    def test_round_trips_in_process_result_bitwise(self, tmp_path):
        out = tmp_path / "craft.json"
        run_cli("craft", DATA / "conflict_pair_dump.json", "--tau", "0.3", "--eps", "1e-10", "--out", out)
        record = json.loads(out.read_text())
        gs = load_gradient_dump(DATA / "conflict_pair_dump.json")
        result = GradCraft(tau=0.3, epsilon=1e-10).craft(gs)
        assert np.array_equal(np.array(record["combined"]), result.combined)
        for entry, row in zip(record["tasks"], result.per_task):
            assert np.array_equal(np.array(entry["grad"]), row)

    def test_single_task_dump_passthrough(self, tmp_path):
        dump = tmp_path / "one.json"
        dump.write_text(json.dumps({
            "format_version": 1, "dimension": 3,
            "tasks": [{"name": "only", "grad": [1.0, 2.5, -3.0]}],
        }))
        out = tmp_path / "out.json"
        assert run_cli("craft", dump, "--out", out) == cli.EXIT_OK
        assert json.loads(out.read_text())["combined"] == [1.0, 2.5, -3.0]

    def test_malformed_dump_parse_exit(self, tmp_path, capsys):
        dump = tmp_path / "bad.json"
        dump.write_text("{not json")
        out = tmp_path / "out.json"
        assert run_cli("craft", dump, "--out", out) == cli.EXIT_PARSE
        assert not out.exists()
        assert "parse error" in capsys.readouterr().err

    def test_dimension_mismatch_validation_exit(self, tmp_path, capsys):
        dump = tmp_path / "bad.json"
        dump.write_text(json.dumps({
            "format_version": 1, "dimension": 3,
            "tasks": [{"name": "a", "grad": [1.0, 2.0]}],
        }))
        out = tmp_path / "out.json"
        assert run_cli("craft", dump, "--out", out) == cli.EXIT_VALIDATION
        assert not out.exists()
        assert "validation error" in capsys.readouterr().err

    def test_unknown_strategy_validation_exit(self, tmp_path):
        out = tmp_path / "out.json"
        code = run_cli("craft", DATA / "conflict_pair_dump.json", "--strategy", "Nope", "--out", out)
        assert code == cli.EXIT_VALIDATION
        assert not out.exists()

    def test_foreign_flag_validation_exit(self, tmp_path):
        out = tmp_path / "out.json"
        code = run_cli(
            "craft", DATA / "conflict_pair_dump.json", "--strategy", "EW", "--tau", "0.5", "--out", out,
        )
        assert code == cli.EXIT_VALIDATION

    def test_numerical_failure_exit(self, tmp_path, monkeypatch, capsys):
        import gradcraft.strategies as strategies

        class Exploder:
            def craft(self, gs):
                raise SingularSystemError("boom", pivot=0.0, jitters=(0.0,))

            def get_params(self):
                return {}

        monkeypatch.setattr(strategies, "make_strategy", lambda name, **kw: Exploder())
        out = tmp_path / "out.json"
        code = run_cli("craft", DATA / "conflict_pair_dump.json", "--out", out)
        assert code == cli.EXIT_NUMERIC
        assert "numerical failure" in capsys.readouterr().err


def small_config(tmp_path, **overrides):
    cfg = {
        "format_version": 1,
        "benchmark": "quadratic",
        "tasks": {"n_tasks": 2, "conflict_angle": math.pi * 5 / 6, "norm_ratio": 10.0, "d_in": 8},
        "strategies": [{"name": "EW"}, {"name": "GradCraft", "tau": 0.1, "epsilon": 0.0}],
        "seeds": [0, 1],
        "optimizer": "sgd",
        "learning_rate": 0.05,
        "max_steps": 30,
        "log_every": 1,
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path, Path(cfg["output_dir"])


class TestRunCommand:
    def test_run_twice_byte_identical(self, tmp_path):
        config_path, outdir = small_config(tmp_path)
        assert run_cli("run", config_path) == cli.EXIT_OK
        first = {
            p.relative_to(outdir): p.read_bytes() for p in outdir.rglob("*") if p.is_file()
        }
        assert first
        shutil.rmtree(outdir)
        assert run_cli("run", config_path) == cli.EXIT_OK
        second = {
            p.relative_to(outdir): p.read_bytes() for p in outdir.rglob("*") if p.is_file()
        }
        assert first == second

    def test_invalid_config_validation_exit(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"benchmark": "quadratic"}))
        assert run_cli("run", path) == cli.EXIT_VALIDATION
        assert "validation error" in capsys.readouterr().err

    def test_malformed_config_parse_exit(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{]")
        assert run_cli("run", path) == cli.EXIT_PARSE

    def test_output_dir_env_override(self, tmp_path, monkeypatch):
        config_path, configured = small_config(tmp_path, log_every=0, seeds=[0], max_steps=10)
        override = tmp_path / "elsewhere"
        monkeypatch.setenv("GRADCRAFT_OUTPUT_DIR", str(override))
        assert run_cli("run", config_path) == cli.EXIT_OK
        assert (override / "metrics.json").exists()
        assert not configured.exists()


class TestSweepCommand:
    def test_sweep_writes_summary(self, tmp_path):
        config_path, outdir = small_config(
            tmp_path,
            log_every=0,
            seeds=[0],
            strategies=[{"name": "EW"}],
            sweep={"strategy": "GradCraft", "tau_grid": [0.0, 0.1], "epsilon_grid": [0.0]},
        )
        assert run_cli("sweep", config_path) == cli.EXIT_OK
        summary = json.loads((outdir / "sweep_summary.json").read_text())
        assert len(summary["cells"]) == 2
        assert summary["best"] is not None

    def test_sweep_without_section_fails_validation(self, tmp_path):
        config_path, _ = small_config(tmp_path)
        assert run_cli("sweep", config_path) == cli.EXIT_VALIDATION
