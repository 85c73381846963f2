"""Columnar binary and CSV export for path containers.

Binary layout: magic, little-endian uint32 header length, UTF-8 JSON
header (grids, seed, model tag, shape, dtype), then the raw float64 body
in C order with scenarios as the leading axis.  Round trips are bit
exact.  CSV export is long-form and guarded by a cell budget since it is
meant for small cases only.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grids import MaturityGrid, TimeGrid
from .paths import FamilyPaths, ProcessPaths

__all__ = [
    "save_paths",
    "load_paths",
    "write_csv",
    "MAGIC",
    "CSV_CELL_BUDGET",
]

MAGIC = b"PFAM\x01"
CSV_CELL_BUDGET = 2_000_000

_DTYPE = np.dtype("<f8")


def _grid_header(obj) -> dict:
    header = {"time_grid": list(map(float, obj.time_grid.points))}
    if isinstance(obj, FamilyPaths):
        header["kind"] = "family"
        header["maturity_grid"] = list(map(float, obj.maturity_grid.points))
        header["t_star"] = float(obj.maturity_grid.t_star)
        header["is_price_family"] = bool(obj.is_price_family)
    else:
        header["kind"] = "process"
    header["shape"] = list(obj.values.shape)
    return header


def save_paths(path, obj, seed=None, model: str = "") -> None:
    """Write a FamilyPaths or ProcessPaths container to a binary file."""
    if not isinstance(obj, (FamilyPaths, ProcessPaths)):
        raise TypeError("save_paths expects FamilyPaths or ProcessPaths")
    header = _grid_header(obj)
    header["seed"] = None if seed is None else int(seed)
    header["model"] = str(model)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    body = np.ascontiguousarray(obj.values, dtype=_DTYPE)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(len(blob)).tobytes())
        fh.write(blob)
        fh.write(body.tobytes())


def load_paths(path):
    """Read a container written by save_paths.

    Returns (container, header) where header carries the seed and model
    tag recorded at save time.
    """
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a path-family file (bad magic)")
    off = len(MAGIC)
    (hlen,) = np.frombuffer(raw[off : off + 4], dtype="<u4")
    off += 4
    header = json.loads(raw[off : off + int(hlen)].decode("utf-8"))
    off += int(hlen)
    shape = tuple(header["shape"])
    body = np.frombuffer(raw[off:], dtype=_DTYPE)
    if body.size != int(np.prod(shape)):
        raise ValueError(f"{path}: body length does not match header shape {shape}")
    values = body.reshape(shape).copy()
    tg = TimeGrid(np.asarray(header["time_grid"], dtype=np.float64))
    if header["kind"] == "family":
        mg = MaturityGrid(
            np.asarray(header["maturity_grid"], dtype=np.float64),
            t_star=float(header["t_star"]),
        )
        obj = FamilyPaths(values, tg, mg, is_price_family=bool(header["is_price_family"]))
    elif header["kind"] == "process":
        obj = ProcessPaths(values, tg)
    else:
        raise ValueError(f"{path}: unknown container kind {header['kind']!r}")
    return obj, header


def write_csv(path, obj) -> None:
    """Long-form CSV export: one row per (scenario, time), one column per
    maturity for families.  Refuses exports above the cell budget."""
    if not isinstance(obj, (FamilyPaths, ProcessPaths)):
        raise TypeError("write_csv expects FamilyPaths or ProcessPaths")
    if obj.values.size > CSV_CELL_BUDGET:
        raise ValueError(
            f"CSV export limited to {CSV_CELL_BUDGET} cells; "
            f"got {obj.values.size}, use save_paths instead"
        )
    t = obj.time_grid.points
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(obj, FamilyPaths):
            cols = [f"x={x:.12g}" for x in obj.maturity_grid.points]
            writer.writerow(["scenario", "t", *cols])
            for s in range(obj.values.shape[0]):
                for n in range(obj.values.shape[1]):
                    writer.writerow(
                        [s, f"{t[n]:.12g}", *(f"{v:.17g}" for v in obj.values[s, n])]
                    )
        else:
            writer.writerow(["scenario", "t", "value"])
            for s in range(obj.values.shape[0]):
                for n in range(obj.values.shape[1]):
                    writer.writerow([s, f"{t[n]:.12g}", f"{obj.values[s, n]:.17g}"])
