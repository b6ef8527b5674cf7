"""Sample, count, state and result files.

Continuous samples are CSV: a header ``# space=coordinate scale=1.0`` (or
``space=momentum``) and one observation per line. Register counts are JSON
``{"direct": [...], "conjugate": [...]}``. Floats are written with
``repr``, which round-trips every finite double exactly.
"""

import json
import math
import os
import re
from pathlib import Path

import numpy as np

from .sampling import CoordinateSample, MomentumSample, RegisterCounts, SamplingError
from .state import StateError, StateVector

_HEADER = re.compile(r"^#\s*space=(coordinate|momentum)(?:\s+scale=(\S+))?\s*$")


class IngestError(ValueError):
    def __init__(self, path, line, message):
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


def output_dir(default=None):
    return Path(default or os.environ.get("ROOTEST_OUTPUT_DIR", "."))


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_plain) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_sample_csv(path, sample):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# space={sample.space} scale={sample.scale!r}"]
    lines.extend(repr(float(v)) for v in sample.points)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_counts_json(path, counts):
    return write_json(path, counts.to_json())


def write_grid_csv(path, columns):
    """Columns as ``{name: sequence}``; the first column is the abscissa."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    rows = zip(*(columns[k] for k in names))
    body = "\n".join(",".join(repr(float(v)) for v in row) for row in rows)
    path.write_text(",".join(names) + "\n" + body + "\n")
    return path


def _read_counts(path, text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict) or "direct" not in data or "conjugate" not in data:
        raise IngestError(path, None, 'register counts need "direct" and "conjugate" arrays')
    for key in ("direct", "conjugate"):
        for i, v in enumerate(data[key]):
            if not isinstance(v, int) or isinstance(v, bool):
                raise IngestError(path, None, f"{key}[{i}] = {v!r} is not an integer count")
            if v < 0:
                raise IngestError(path, None, f"{key}[{i}] = {v} is negative")
    try:
        counts = RegisterCounts(data["direct"], data["conjugate"])
    except SamplingError as exc:
        raise IngestError(path, None, str(exc)) from None
    if counts.n + counts.m == 0:
        raise IngestError(path, None, "no observations")
    return counts


def _read_csv(path, text):
    lines = text.splitlines()
    if not lines:
        raise IngestError(path, 1, "empty file; expected a '# space=... scale=...' header")
    head = _HEADER.match(lines[0].strip())
    if head is None:
        raise IngestError(path, 1, "missing space tag header '# space=coordinate|momentum scale=<a>'")
    space, scale = head.group(1), head.group(2)
    try:
        scale = float(scale) if scale is not None else 1.0
    except ValueError:
        raise IngestError(path, 1, f"bad scale {scale!r}") from None
    if not (math.isfinite(scale) and scale > 0):
        raise IngestError(path, 1, f"scale must be positive and finite, got {scale!r}")
    values = []
    for lineno, raw in enumerate(lines[1:], start=2):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        try:
            v = float(s)
        except ValueError:
            raise IngestError(path, lineno, f"cannot parse {s!r} as a number") from None
        if not math.isfinite(v):
            raise IngestError(path, lineno, f"non-finite value {s!r}")
        values.append(v)
    if not values:
        raise IngestError(path, None, "no observations")
    cls = CoordinateSample if space == "coordinate" else MomentumSample
    return cls(values, scale)


def ingest_samples(path):
    """Read a coordinate/momentum CSV or a register-counts JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestError(path, None, exc.strerror or str(exc)) from None
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return _read_counts(path, text)
    return _read_csv(path, text)


def read_state(path):
    """A state JSON file, or the ``estimate`` inside a result JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise IngestError(path, None, exc.strerror or str(exc)) from None
    except json.JSONDecodeError as exc:
        raise IngestError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if "estimate" in data:
        data = data["estimate"]
    try:
        return StateVector.from_json(data)
    except (KeyError, StateError) as exc:
        raise IngestError(path, None, f"not a state vector: {exc}") from None
