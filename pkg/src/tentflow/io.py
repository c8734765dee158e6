"""Checkpoint files and CSV series.

Binary layout (little-endian)::

    b"TFLOWCK1"
    int64 dim, N, node_count, n_components
    float64 side_length
    int64 config_len, then config_len bytes of UTF-8 JSON
    float64[node_count] time nodes
    float64[node_count] quadrature weights
    float64 payload, C-order (node, component, *spatial)

A single field is stored with one node at ``t = 0`` and weight 0.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import PeriodicGrid, SpaceTimeField, TimeGrid, field_from_stack

__all__ = [
    "MAGIC",
    "Checkpoint",
    "write_checkpoint",
    "read_checkpoint",
    "write_field",
    "read_field",
    "write_trajectory",
    "write_series_csv",
    "write_diagnostics_csv",
]

MAGIC = b"TFLOWCK1"
_HEAD = struct.Struct("<qqqqd")


@dataclass
class Checkpoint:
    grid: PeriodicGrid
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    config: dict

    @property
    def time_grid(self) -> TimeGrid | None:
        if self.nodes.size < 2:
            return None
        return TimeGrid(self.nodes, self.weights)

    def as_spacetime(self) -> SpaceTimeField:
        tg = self.time_grid
        if tg is None:
            raise ValueError("checkpoint holds a single field, not a trajectory")
        return SpaceTimeField(tg, self.grid, self.values)

    def as_field(self, node: int = 0):
        return field_from_stack(self.grid, self.values[node].copy())


def write_checkpoint(path, grid: PeriodicGrid, nodes: Sequence[float], weights: Sequence[float],
                     values: np.ndarray, config: dict | None = None) -> Path:
    values = np.ascontiguousarray(values, dtype="<f8")
    nodes = np.asarray(nodes, dtype="<f8").reshape(-1)
    weights = np.asarray(weights, dtype="<f8").reshape(-1)
    if values.shape[0] != nodes.size or weights.size != nodes.size:
        raise ValueError("payload node count does not match the time nodes")
    if values.shape[2:] != grid.shape:
        raise ValueError("payload spatial shape does not match the grid")
    blob = json.dumps(config or {}, sort_keys=True).encode("utf-8")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEAD.pack(grid.dim, grid.points_per_axis, nodes.size, values.shape[1], grid.side_length))
        fh.write(struct.pack("<q", len(blob)))
        fh.write(blob)
        fh.write(nodes.tobytes())
        fh.write(weights.tobytes())
        fh.write(values.tobytes())
    return path


def read_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    off = 8
    dim, n, nodes, comps, side = _HEAD.unpack_from(data, off)
    off += _HEAD.size
    (clen,) = struct.unpack_from("<q", data, off)
    off += 8
    config = json.loads(data[off : off + clen].decode("utf-8"))
    off += clen
    grid = PeriodicGrid(int(dim), float(side), int(n))
    t = np.frombuffer(data, dtype="<f8", count=nodes, offset=off).copy()
    off += 8 * nodes
    w = np.frombuffer(data, dtype="<f8", count=nodes, offset=off).copy()
    off += 8 * nodes
    count = nodes * comps * grid.size
    if len(data) - off != 8 * count:
        raise ValueError(f"{path}: payload size mismatch")
    vals = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape((nodes, comps) + grid.shape)
    return Checkpoint(grid, t, w, vals.astype(np.float64), config)


def write_field(path, field, config: dict | None = None) -> Path:
    return write_checkpoint(path, field.grid, [0.0], [0.0], field.stack[np.newaxis], config)


def read_field(path):
    return read_checkpoint(path).as_field(0)


def write_trajectory(path, u: SpaceTimeField, config: dict | None = None) -> Path:
    return write_checkpoint(path, u.grid, u.time_grid.nodes, u.time_grid.weights, u.values, config)


def write_series_csv(path, header: tuple[str, str], rows: Iterable[tuple[float, float]]) -> Path:
    """Two-column CSV; an empty series yields the header line only."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in rows:
            w.writerow([repr(float(x)), repr(float(y))])
    return path


DIAG_COLUMNS = ("iter", "t", "E_alpha_total", "rho_dev", "energy_lhs", "energy_rhs", "div_max", "increment")


def write_diagnostics_csv(path, diagnostics: list[dict]) -> Path:
    """One row per (Picard iterate, time node)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_COLUMNS)
        for d in diagnostics:
            inc = "" if d["increment"] is None else repr(float(d["increment"]))
            for m, t in enumerate(d["t"]):
                w.writerow([
                    d["iter"], repr(float(t)), repr(float(d["E_alpha_total"])),
                    repr(float(d["rho_dev"][m])), repr(float(d["energy_lhs"][m])),
                    repr(float(d["energy_rhs"])), repr(float(d["div_max"][m])), inc,
                ])
    return path
