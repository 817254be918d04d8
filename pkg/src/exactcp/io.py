"""Dataset files and run reports.

Datasets are comma-separated with a header ``x1,...,xp,y``.  A final row
whose ``y`` cell is empty (or missing) is taken as the prediction point.

Reports serialise to JSON with a fixed key order; the layout is described by
``data/report.schema.json``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .core import LabeledPoint, Sample

_FEATURE = re.compile(r"^x([1-9][0-9]*)$")
SCHEMA_VERSION = 1


class DatasetError(ValueError):
    """Malformed dataset file."""


@dataclass(frozen=True)
class Dataset:
    sample: Sample
    prediction_features: tuple[float, ...] | None = None

    @property
    def points(self) -> tuple[LabeledPoint, ...]:
        return self.sample.points


def _parse_cell(cell: str, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"line {line}: {cell!r} is not a number") from None
    if not math.isfinite(value):
        raise DatasetError(f"line {line}: non-finite value {cell!r}")
    return value


def read_dataset(path) -> Dataset:
    """Parse a dataset file.

    Raises
    ------
    DatasetError
        On a bad header, ragged or non-numeric rows, or no labelled rows.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise DatasetError("empty file")
    header = [h.strip() for h in rows[0]]
    p = len(header) - 1
    if p < 1 or header[-1] != "y" or any(_FEATURE.match(h) is None or int(_FEATURE.match(h).group(1)) != j + 1
                                         for j, h in enumerate(header[:-1])):
        raise DatasetError(f"header must be x1,...,xp,y; got {','.join(header)}")

    feats, ys, pred = [], [], None
    body = rows[1:]
    for k, row in enumerate(body):
        line = k + 2
        cells = [c.strip() for c in row]
        last = k == len(body) - 1
        if last and (len(cells) == p or (len(cells) == p + 1 and cells[-1] == "")):
            pred = tuple(_parse_cell(c, line) for c in cells[:p])
            continue
        if len(cells) != p + 1:
            raise DatasetError(f"line {line}: expected {p + 1} cells, got {len(cells)}")
        feats.append([_parse_cell(c, line) for c in cells[:p]])
        ys.append(_parse_cell(cells[-1], line))
    if not ys:
        raise DatasetError("no labelled rows")
    return Dataset(Sample(np.array(feats), np.array(ys)), pred)


def write_dataset(path, sample: Sample, prediction_features=None) -> None:
    """Write ``sample`` (and an optional prediction row) using round-trip float text."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(sample.p)] + ["y"])
        for x, y in zip(sample.X, sample.y):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
        if prediction_features is not None:
            w.writerow([repr(float(v)) for v in np.ravel(prediction_features)] + [""])


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    command: str
    arguments: dict
    inputs_hash: str | None
    environment: dict
    result: dict
    warnings: list = field(default_factory=list)
    exit_status: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "arguments": self.arguments,
            "inputs_hash": self.inputs_hash,
            "environment": self.environment,
            "result": self.result,
            "warnings": list(self.warnings),
            "exit_status": self.exit_status,
        }


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps_report(report: RunReport) -> str:
    """Serialise with a stable key order (insertion order, never sorted)."""
    return json.dumps(_plain(report.to_dict()), indent=2, allow_nan=False) + "\n"


def report_schema() -> dict:
    with resources.files("exactcp").joinpath("data/report.schema.json").open() as fh:
        return json.load(fh)


def _fmt(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def format_text(report: RunReport) -> str:
    """Indented ``key: value`` rendering of the same tree."""
    lines = []

    def walk(node, indent):
        pad = "  " * indent
        if isinstance(node, dict):
            for k, v in node.items():
                if isinstance(v, (dict, list)) and v:
                    lines.append(f"{pad}{k}:")
                    walk(v, indent + 1)
                else:
                    lines.append(f"{pad}{k}: {_fmt(v) if not isinstance(v, (dict, list)) else v}")
        elif isinstance(node, list):
            for item in node:
                if isinstance(item, (dict, list)):
                    lines.append(f"{pad}-")
                    walk(item, indent + 1)
                else:
                    lines.append(f"{pad}- {_fmt(item)}")

    walk(_plain(report.to_dict()), 0)
    return "\n".join(lines) + "\n"
