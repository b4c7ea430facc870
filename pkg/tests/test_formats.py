import json

import numpy as np
import pytest

from gradcraft import GradCraft, as_gradient_set
from gradcraft.exceptions import DumpParseError, DumpValidationError
from gradcraft.formats import (
    canonical_json,
    craft_record,
    load_gradient_dump,
    write_gradient_dump,
    write_json,
)


def write(tmp_path, payload, name="dump.json"):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return path


GOOD = {
    "format_version": 1,
    "dimension": 2,
    "tasks": [
        {"name": "a", "grad": [1.0, -1.0]},
        {"name": "b", "grad": [0.0, 2.0]},
    ],
}


class TestLoadDump:
    def test_round_trip(self, tmp_path):
        gs = load_gradient_dump(write(tmp_path, GOOD))
        assert gs.task_names == ("a", "b")
        assert np.array_equal(gs.grads, [[1, -1], [0, 2]])
        out = tmp_path / "echo.json"
        write_gradient_dump(out, gs)
        again = load_gradient_dump(out)
        assert np.array_equal(again.grads, gs.grads)
        assert again.task_names == gs.task_names

    def test_bad_json_reports_location(self, tmp_path):
        path = write(tmp_path, '{"dimension": 2,\n  "tasks": [}')
        with pytest.raises(DumpParseError, match=r":2:"):
            load_gradient_dump(path)

    def test_missing_dimension(self, tmp_path):
        with pytest.raises(DumpParseError, match="dimension"):
            load_gradient_dump(write(tmp_path, {"tasks": GOOD["tasks"]}))

    def test_missing_grad_field(self, tmp_path):
        bad = {"dimension": 2, "tasks": [{"name": "a"}]}
        with pytest.raises(DumpParseError, match=r"tasks\[0\]"):
            load_gradient_dump(write(tmp_path, bad))

    def test_non_numeric_entry(self, tmp_path):
        bad = {"dimension": 1, "tasks": [{"name": "a", "grad": ["x"]}]}
        with pytest.raises(DumpParseError, match=r"grad\[0\]"):
            load_gradient_dump(write(tmp_path, bad))

    def test_length_mismatch_is_validation_error(self, tmp_path):
        bad = {"dimension": 3, "tasks": [{"name": "a", "grad": [1.0, 2.0]}]}
        with pytest.raises(DumpValidationError, match="length 2"):
            load_gradient_dump(write(tmp_path, bad))

    def test_duplicate_names(self, tmp_path):
        bad = {
            "dimension": 1,
            "tasks": [{"name": "a", "grad": [1.0]}, {"name": "a", "grad": [2.0]}],
        }
        with pytest.raises(DumpValidationError, match="duplicate"):
            load_gradient_dump(write(tmp_path, bad))

    def test_unsupported_version(self, tmp_path):
        bad = dict(GOOD, format_version=99)
        with pytest.raises(DumpValidationError, match="format_version"):
            load_gradient_dump(write(tmp_path, bad))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DumpParseError, match="cannot read"):
            load_gradient_dump(tmp_path / "absent.json")


class TestLabeledBatchFixtures:
    def test_round_trip_bitwise(self, tmp_path):
        from gradcraft import SyntheticTaskSpec, gen_classification
        from gradcraft.formats import load_labeled_batch, write_labeled_batch

        batch = gen_classification(
            SyntheticTaskSpec(n_tasks=2, samples=50, d_in=4, seed=5)
        ).valid
        path = tmp_path / "batch.json"
        write_labeled_batch(path, batch)
        back = load_labeled_batch(path)
        assert np.array_equal(back.features, batch.features)
        assert np.array_equal(back.labels, batch.labels)
        assert np.array_equal(back.group_ids, batch.group_ids)

    def test_invalid_labels_rejected(self, tmp_path):
        from gradcraft.formats import load_labeled_batch

        path = write(tmp_path, {
            "format_version": 1,
            "features": [[1.0]],
            "labels": [[0.5]],
            "group_ids": [0],
        }, name="batch.json")
        with pytest.raises(DumpValidationError, match="binary"):
            load_labeled_batch(path)


class TestSerialization:
    def test_floats_round_trip_exactly(self, tmp_path):
        values = [0.1, 1 / 3, 2**-40, 1.0 + 2**-50, -0.0]
        path = tmp_path / "floats.json"
        write_json(path, {"values": values})
        back = json.loads(path.read_text())
        assert all(a == b for a, b in zip(back["values"], values))

    def test_canonical_key_order(self):
        assert canonical_json({"b": 1, "a": 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})

    def test_craft_record_round_trip(self, tmp_path):
        gs = as_gradient_set([[1.0, -1.0], [0.0, 2.0]], ("a", "b"))
        strat = GradCraft(tau=0.0, epsilon=0.0)
        result = strat.craft(gs)
        record = craft_record("GradCraft", strat.get_params(), gs, result)
        path = tmp_path / "craft.json"
        write_json(path, record)
        back = json.loads(path.read_text())
        assert back["combined"] == [1.0, 0.5]
        assert back["tasks"][0] == {"name": "a", "grad": [1.0, 0.0]}
        assert back["report"]["conflict_matrix"] == [[False, True], [True, False]]
        assert back["format_version"] == 1
