"""On-disk formats: gradient dumps, craft records, run artifacts.

Everything is line-oriented JSON with a format_version header field.
Serialization is canonical (sorted keys, fixed separators, shortest
round-trip floats, no NaN/Inf), so byte identity of artifacts coincides
with value identity and reruns diff clean.
"""

import json
from pathlib import Path

import numpy as np

from .exceptions import DumpParseError, DumpValidationError
from .gradients import GradientSet

FORMAT_VERSION = 1


def jsonable(obj):
    """Recursively convert numpy containers/scalars to plain Python."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    """Multi-line canonical rendering for file artifacts."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def canonical_json_line(obj) -> str:
    """Single-line canonical rendering for log records."""
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj), encoding="utf-8")


def write_jsonl(path, rows) -> None:
    text = "".join(canonical_json_line(row) + "\n" for row in rows)
    Path(path).write_text(text, encoding="utf-8")


def load_json(path):
    """Parse a JSON file, mapping syntax errors to DumpParseError with
    line/column context."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise DumpParseError(f"{path}: cannot read file ({err})") from err
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise DumpParseError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from err


def _require(record: dict, key: str, kind, where: str):
    if key not in record:
        raise DumpParseError(f"{where}: missing field {key!r}")
    value = record[key]
    if kind is int and isinstance(value, bool):
        raise DumpParseError(f"{where}.{key}: expected integer, got boolean")
    if not isinstance(value, kind):
        raise DumpParseError(
            f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}"
        )
    return value


def load_gradient_dump(path) -> GradientSet:
    """Read a gradient dump file.

    The format is a JSON object with an integer ``dimension`` and a
    ``tasks`` array of ``{"name": str, "grad": [numbers]}`` records.
    Structural problems raise DumpParseError; semantic ones (length
    mismatches, duplicate names, non-finite values) raise
    DumpValidationError.
    """
    record = load_json(path)
    where = str(path)
    if not isinstance(record, dict):
        raise DumpParseError(f"{where}: top level must be a JSON object")
    version = record.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise DumpValidationError(f"{where}: unsupported format_version {version!r}")
    dimension = _require(record, "dimension", int, where)
    tasks = _require(record, "tasks", list, where)
    if not tasks:
        raise DumpParseError(f"{where}.tasks: must contain at least one task")
    names = []
    rows = []
    for idx, entry in enumerate(tasks):
        loc = f"{where}.tasks[{idx}]"
        if not isinstance(entry, dict):
            raise DumpParseError(f"{loc}: expected object")
        name = _require(entry, "name", str, loc)
        grad = _require(entry, "grad", list, loc)
        for j, value in enumerate(grad):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise DumpParseError(f"{loc}.grad[{j}]: expected number, got {type(value).__name__}")
        if len(grad) != dimension:
            raise DumpValidationError(
                f"{loc}.grad: length {len(grad)} does not match dimension {dimension}"
            )
        names.append(name)
        rows.append(grad)
    if len(set(names)) != len(names):
        raise DumpValidationError(f"{where}: duplicate task names")
    if dimension < 1:
        raise DumpValidationError(f"{where}: dimension must be >= 1")
    arr = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DumpValidationError(f"{where}: gradients contain non-finite values")
    return GradientSet(tuple(names), arr)


def write_gradient_dump(path, gs: GradientSet) -> None:
    record = {
        "format_version": FORMAT_VERSION,
        "dimension": gs.dim,
        "tasks": [
            {"name": name, "grad": grad.tolist()}
            for name, grad in zip(gs.task_names, gs.grads)
        ],
    }
    write_json(path, record)


def write_labeled_batch(path, batch) -> None:
    """Serialize a LabeledBatch fixture.

    Format: JSON object with ``features`` (rows), ``labels`` (rows, binary)
    and ``group_ids``, all parallel, plus the format_version header.
    """
    record = {
        "format_version": FORMAT_VERSION,
        "kind": "labeled_batch",
        "features": batch.features.tolist(),
        "labels": batch.labels.tolist(),
        "group_ids": batch.group_ids.tolist(),
    }
    write_json(path, record)


def load_labeled_batch(path):
    from .synth import LabeledBatch

    record = load_json(path)
    where = str(path)
    if not isinstance(record, dict):
        raise DumpParseError(f"{where}: top level must be a JSON object")
    version = record.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise DumpValidationError(f"{where}: unsupported format_version {version!r}")
    features = _require(record, "features", list, where)
    labels = _require(record, "labels", list, where)
    group_ids = _require(record, "group_ids", list, where)
    try:
        return LabeledBatch(
            np.asarray(features, dtype=np.float64),
            np.asarray(labels, dtype=np.float64),
            np.asarray(group_ids, dtype=np.int64),
        )
    except ValueError as err:
        raise DumpValidationError(f"{where}: {err}") from err


def craft_record(strategy_name: str, params: dict, gs: GradientSet, result) -> dict:
    """Serializable record of one craft invocation."""
    return {
        "format_version": FORMAT_VERSION,
        "kind": "craft_output",
        "strategy": strategy_name,
        "params": jsonable(params),
        "dimension": gs.dim,
        "combined": result.combined.tolist(),
        "tasks": [
            {"name": name, "grad": grad.tolist()}
            for name, grad in zip(result.task_names, result.per_task)
        ],
        "report": result.report.to_dict(),
    }
