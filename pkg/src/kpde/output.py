"""CSV and JSON persistence with a file manifest.

CSV files are UTF-8, comma separated, with one header row. Floats are
written with ``repr`` so they re-parse to the identical double. Decay
traces carry ``log10`` columns for direct log-log plotting.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .grid import GridSpec


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _log10(v: float) -> float:
    return math.log10(v) if v > 0 else float("-inf")


def json_safe(obj):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def decay_rows(eps, columns: dict[str, list[float]]):
    """Header and rows ``eps, <col>..., log10_eps, log10_<col>...``."""
    names = list(columns)
    header = ["eps"] + names + ["log10_eps"] + [f"log10_{n}" for n in names]
    rows = []
    for i, e in enumerate(eps):
        vals = [columns[n][i] for n in names]
        rows.append([e] + vals + [_log10(e)] + [_log10(v) for v in vals])
    return header, rows


def grid_rows(spec: GridSpec, fields: dict[str, np.ndarray]):
    """Header and rows ``x[, y], <field>...`` in C order over the grid."""
    coords = [c.ravel() for c in spec.coords]
    names = list(fields)
    header = ["x", "y"][: spec.d] + names
    flat = [np.asarray(fields[n]).ravel() for n in names]
    rows = [[c[i] for c in coords] + [f[i] for f in flat] for i in range(coords[0].size)]
    return header, rows


def trajectory_rows(spec: GridSpec, times, values: np.ndarray, name="u"):
    """``t, x[, y], u`` for every stored time."""
    coords = [c.ravel() for c in spec.coords]
    header = ["t"] + ["x", "y"][: spec.d] + [name]
    rows = []
    for i, t in enumerate(times):
        v = values[i].ravel()
        rows.extend([t] + [c[j] for c in coords] + [v[j]] for j in range(v.size))
    return header, rows


class OutputWriter:
    """Writes every artifact of a run into one directory and records a manifest."""

    def __init__(self, directory, csv: bool = True):
        self.directory = Path(directory)
        self.csv = csv
        self.manifest: list[dict] = []

    def _prepare(self, name: str) -> Path:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {self.directory}: {exc.strerror}") from exc
        return self.directory / name

    def _record(self, path: Path, data: bytes, kind: str):
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        self.manifest.append({"file": path.name, "kind": kind, "bytes": len(data),
                              "sha256": hashlib.sha256(data).hexdigest()})

    def write_csv(self, name: str, header, rows, kind="csv") -> Path | None:
        if not self.csv:
            return None
        path = self._prepare(name)
        lines = [",".join(header)] + [",".join(_cell(v) for v in row) for row in rows]
        self._record(path, ("\n".join(lines) + "\n").encode("utf-8"), kind)
        return path

    def write_json(self, name: str, obj, kind="json") -> Path:
        path = self._prepare(name)
        text = json.dumps(json_safe(obj), indent=2, sort_keys=True, ensure_ascii=False)
        self._record(path, (text + "\n").encode("utf-8"), kind)
        return path


def read_csv(path):
    """Rows of a CSV written here, as a header list and a list of string rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)
