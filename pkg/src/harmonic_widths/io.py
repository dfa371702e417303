"""Report and table serialisation.

CSV files use LF line endings, ``.`` as decimal separator and 17
significant digits, so every float round-trips exactly. JSON keeps the
insertion order of its fields. Infinite values are written as the string
``"inf"`` in JSON and as ``inf`` in CSV.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ect1d import EctBasis, Interval, WeightSystem
from .errors import InputError, IoFailure


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def parse_number(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_number(v) for v in row])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> tuple[list[str], list[list]]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            rows = [[parse_number(v) for v in row] for row in r]
    except (OSError, StopIteration) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return header, rows


def _encode(obj):
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_encode(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if obj in ("inf", "-inf", "nan"):
        return float(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_encode(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(obj), newline="\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_json(path):
    try:
        return _decode(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


@dataclass
class Table:
    header: list
    rows: list = field(default_factory=list)


@dataclass
class Report:
    """A named JSON summary plus any number of CSV tables."""

    name: str
    summary: dict
    tables: dict = field(default_factory=dict)


def emit_report(report: Report, out) -> list[Path]:
    """Write ``<name>.json`` and one ``<table>.csv`` per table under ``out``."""
    out = Path(out)
    paths = [write_json(out / f"{report.name}.json", report.summary)]
    for tname, tab in report.tables.items():
        paths.append(write_csv(out / f"{tname}.csv", tab.header, tab.rows))
    return paths


def load_report(out, name: str, tables: Sequence[str] = ()) -> Report:
    out = Path(out)
    summary = read_json(out / f"{name}.json")
    loaded = {}
    for tname in tables:
        header, rows = read_csv(out / f"{tname}.csv")
        loaded[tname] = Table(header, rows)
    return Report(name, summary, loaded)


# -- module-specific tables ------------------------------------------------


def save_weights(path, weights: WeightSystem) -> Path:
    header = ["t"] + [f"rho_{j + 1}" for j in range(weights.N)]
    return write_csv(path, header, np.column_stack([weights.t, weights.values.T]))


def load_weights(path) -> WeightSystem:
    header, rows = read_csv(path)
    if not header or header[0] != "t" or not all(h.startswith("rho_") for h in header[1:]):
        raise InputError(f"{path}: expected header t,rho_1,...")
    data = np.array(rows, dtype=float)
    t = data[:, 0]
    if data.shape[0] < 2 or np.any(np.diff(t) <= 0):
        raise InputError(f"{path}: nodes must be strictly increasing")
    if not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=0):
        raise InputError(f"{path}: nodes must be uniform")
    return WeightSystem(Interval(float(t[0]), float(t[-1])), data[:, 1:].T)


def save_basis(path, basis: EctBasis) -> Path:
    header = ["t"] + [f"v_{j + 1}" for j in range(basis.N)]
    return write_csv(path, header, np.column_stack([basis.t, basis.basis.T]))


def spectrum_rows(eigenvalues) -> list:
    return [[j + 1, float(v)] for j, v in enumerate(eigenvalues)]


def save_spectrum(path, eigenvalues) -> Path:
    return write_csv(path, ["j", "lambda"], spectrum_rows(eigenvalues))


def save_eigenvectors(path, t, vectors) -> Path:
    k = vectors.shape[1]
    return write_csv(path, ["t"] + [f"psi_{j + 1}" for j in range(k)], np.column_stack([t, vectors]))


def save_field(path, grid, values) -> Path:
    X, Y = grid.mesh()
    return write_csv(path, ["x", "y", "value"], np.column_stack([X, Y, values]))
