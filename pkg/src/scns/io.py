"""Field files (CSV with a '#' header, optional legacy VTK) and JSON reports."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridSpec

MAGIC = "scns-field 1"


@dataclass(frozen=True)
class FieldFile:
    """One scalar field on the interior cells, rows indexed by x, columns by y."""

    grid: GridSpec
    name: str
    time: float
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.values) != self.grid.shape:
            raise ValueError(f"values shape {np.shape(self.values)} != grid shape {self.grid.shape}")

    def __eq__(self, other):
        if not isinstance(other, FieldFile):
            return NotImplemented
        return (self.grid == other.grid and self.name == other.name
                and _same_float(self.time, other.time)
                and np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64)))


def _same_float(a: float, b: float) -> bool:
    return np.float64(a).view(np.uint64) == np.float64(b).view(np.uint64)


def write_field(path, f: FieldFile) -> Path:
    """CSV with 17 significant digits, which reproduces every float64 exactly."""
    if "\n" in f.name or "=" in f.name:
        raise ValueError("field name may not contain newlines or '='")
    g = f.grid
    header = "\n".join([MAGIC, f"name={f.name}", f"time={f.time!r}", f"nx={g.nx}", f"ny={g.ny}",
                        f"lx={g.lx!r}", f"ly={g.ly!r}"])
    path = Path(path)
    np.savetxt(path, np.asarray(f.values, dtype=np.float64), fmt="%.17g", delimiter=",",
               header=header, comments="# ")
    return path


def read_field(path) -> FieldFile:
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = [ln[2:] for ln in lines if ln.startswith("# ")]
    if not head or head[0] != MAGIC:
        raise ValueError(f"{path}: not a field file (missing '{MAGIC}' header)")
    for ln in head[1:]:
        k, _, v = ln.partition("=")
        meta[k] = v
    try:
        grid = GridSpec(int(meta["nx"]), int(meta["ny"]), float(meta["lx"]), float(meta["ly"]))
        t = float(meta["time"])
    except KeyError as e:
        raise ValueError(f"{path}: header lacks {e.args[0]!r}") from None
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=np.float64)
    return FieldFile(grid, meta.get("name", ""), t, values.reshape(grid.shape))


def write_vtk(path, grid: GridSpec, scalars: dict[str, np.ndarray],
              vectors: dict[str, np.ndarray] | None = None) -> Path:
    """Legacy ASCII STRUCTURED_POINTS with cell data, for external viewers."""
    lines = ["# vtk DataFile Version 3.0", "scns fields", "ASCII", "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1", "ORIGIN 0 0 0",
             f"SPACING {grid.dx!r} {grid.dy!r} 1", f"CELL_DATA {grid.size}"]
    # VTK orders cells x-fastest
    for name, a in scalars.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(x)) for x in np.asarray(a).T.reshape(-1)]
    for name, a in (vectors or {}).items():
        lines.append(f"VECTORS {name} double")
        a = np.asarray(a)
        lines += [f"{a[0, i, j]!r} {a[1, i, j]!r} 0.0"
                  for j in range(grid.ny) for i in range(grid.nx)]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        x = float(o)
        return x if math.isfinite(x) else str(x)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def write_report(path, report: dict) -> Path:
    """JSON with non-finite floats spelled as strings ("inf", "nan")."""
    path = Path(path)
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return path
