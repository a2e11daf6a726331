"""Readers for the documented curlflow run-artifact formats.

These parse the CSV files a solver run leaves behind; they deliberately do
not import the solver package, so the file formats are the only contract:

* ``diagnostics.csv`` — one header row with the columns listed in
  ``DIAGNOSTIC_COLUMNS``, then one row per step.
* snapshot ``.csv`` — line 1 names the grid metadata (``nx,ny,dx,dy,t``),
  line 2 holds its values, line 3 names the field columns
  (``SNAPSHOT_COLUMNS``), then nx*ny rows in x-major order (y fastest).
* ``config.txt`` — ``key = value`` lines, ``#`` comments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DIAGNOSTIC_COLUMNS = ["step", "t", "dt", "Ek", "curl_b_L1", "curl_b_L2",
                      "curl_A_L1", "mass1", "mass2", "Etot", "cg_iters",
                      "picard_delta"]

SNAPSHOT_COLUMNS = ["x", "y", "rho1", "rho2", "u1", "u2", "p", "alpha1",
                    "b1", "b2", "A11", "A12", "A13", "A21", "A22", "A23",
                    "A31", "A32", "A33", "curlz_b"]

_INT_COLUMNS = {"step", "cg_iters"}


class RunFormatError(ValueError):
    """A run artifact does not match the documented schema."""


def read_diagnostics(path) -> dict:
    """Diagnostics CSV -> dict of numpy arrays keyed by column."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != DIAGNOSTIC_COLUMNS:
            raise RunFormatError(
                f"unexpected diagnostics columns in {path}: "
                f"{reader.fieldnames}")
        rows = list(reader)
    out = {}
    for col in DIAGNOSTIC_COLUMNS:
        vals = [row[col] for row in rows]
        dtype = int if col in _INT_COLUMNS else float
        out[col] = np.array([dtype(v) for v in vals])
    return out


def read_snapshot(path) -> tuple[dict, dict]:
    """Snapshot CSV -> (meta, fields).

    ``meta`` has nx, ny, dx, dy, t; each field is an (nx, ny) array.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        meta_names = next(reader)
        meta_vals = next(reader)
        columns = next(reader)
        if columns != SNAPSHOT_COLUMNS:
            raise RunFormatError(
                f"unexpected snapshot columns in {path}: {columns}")
        data = np.array([[float(v) for v in row] for row in reader])
    meta = dict(zip(meta_names, (float(v) for v in meta_vals)))
    nx, ny = int(meta["nx"]), int(meta["ny"])
    if data.shape != (nx * ny, len(SNAPSHOT_COLUMNS)):
        raise RunFormatError(f"snapshot {path} has {data.shape[0]} rows, "
                             f"expected {nx * ny}")
    fields = {name: data[:, k].reshape(nx, ny)
              for k, name in enumerate(SNAPSHOT_COLUMNS)}
    return meta, fields


def read_config(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


@dataclass
class Run:
    """A solver run directory: config, diagnostics, snapshot paths."""

    path: Path
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)


def load_run(path) -> Run:
    path = Path(path)
    run = Run(path=path)
    cfg = path / "config.txt"
    if cfg.exists():
        run.config = read_config(cfg)
    diag = path / "diagnostics.csv"
    if not diag.exists():
        raise RunFormatError(f"{path} has no diagnostics.csv")
    run.diagnostics = read_diagnostics(diag)
    run.snapshots = sorted(path.glob("snapshot_*.csv"))
    return run
