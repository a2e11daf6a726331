"""Snapshot and diagnostics writers.

Two snapshot formats are supported:

``csv-grid``
    Line 1: ``nx,ny,dx,dy,t`` (literal header names).
    Line 2: the corresponding values, full double precision.
    Line 3: the per-cell column names.
    Then one row per cell, x-major (the j index varies fastest), with
    columns x, y, rho1, rho2, u1, u2, p, alpha1, b1, b2, A11 ... A33,
    curlz_b.  Reading the file back reproduces the written fields
    bit-exactly (values are serialized with repr round-tripping).

``vtk-legacy``
    ASCII STRUCTURED_POINTS with the same scalars as CELL_DATA, in the
    same order as the csv-grid columns (coordinates excluded).

``diagnostics.csv`` accumulates one row per time step with the columns
of :data:`curlflow.stepper.DIAGNOSTIC_COLUMNS`.
"""

from __future__ import annotations

import csv

import numpy as np

from .grid import GridGeometry, curl_vertex_to_cell
from .state import AL, B0, P, R1, R2, U1, U2, cons_to_prim
from .stepper import DIAGNOSTIC_COLUMNS, SimulationState

__all__ = ["SNAPSHOT_COLUMNS", "write_snapshot", "read_snapshot_csv",
           "DiagnosticsWriter", "read_diagnostics"]

SNAPSHOT_COLUMNS = (["x", "y", "rho1", "rho2", "u1", "u2", "p", "alpha1",
                     "b1", "b2"]
                    + [f"A{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
                    + ["curlz_b"])


def _snapshot_fields(state: SimulationState, params):
    """Cell-centered field dict in SNAPSHOT_COLUMNS order."""
    geom = state.geom
    v = cons_to_prim(state.q, params)
    xc, yc = geom.cell_centers()
    fields = {"x": xc, "y": yc, "rho1": v[R1], "rho2": v[R2],
              "u1": v[U1], "u2": v[U2], "p": v[P], "alpha1": v[AL],
              "b1": v[B0], "b2": v[B0 + 1]}
    from .state import A0
    for i in range(3):
        for j in range(3):
            fields[f"A{i + 1}{j + 1}"] = v[A0 + 3 * i + j]
    fields["curlz_b"] = curl_vertex_to_cell(state.b_vertex, geom)
    return fields


def write_snapshot(state: SimulationState, params, path,
                   fmt: str = "csv-grid"):
    """Write a full cell-centered snapshot in the requested format."""
    if fmt == "csv-grid":
        _write_csv_grid(state, params, path)
    elif fmt == "vtk-legacy":
        _write_vtk_legacy(state, params, path)
    else:
        raise ValueError(f"unknown snapshot format '{fmt}'")


def _write_csv_grid(state, params, path):
    geom = state.geom
    fields = _snapshot_fields(state, params)
    with open(path, "w", newline="") as fh:
        fh.write("nx,ny,dx,dy,t\n")
        fh.write(f"{geom.nx},{geom.ny},{geom.dx!r},{geom.dy!r},"
                 f"{state.t!r}\n")
        fh.write(",".join(SNAPSHOT_COLUMNS) + "\n")
        cols = [np.asarray(fields[c]) for c in SNAPSHOT_COLUMNS]
        for i in range(geom.nx):
            for j in range(geom.ny):
                fh.write(",".join(repr(float(c[i, j])) for c in cols)
                         + "\n")


def read_snapshot_csv(path):
    """Read a csv-grid snapshot; returns (meta dict, field dict).

    meta holds nx, ny, dx, dy, t; every field is an (nx, ny) array.
    """
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        values = fh.readline().strip().split(",")
        meta = dict(zip(names, values))
        meta["nx"] = int(meta["nx"])
        meta["ny"] = int(meta["ny"])
        for k in ("dx", "dy", "t"):
            meta[k] = float(meta[k])
        columns = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[0] != meta["nx"] * meta["ny"]:
        raise ValueError(f"snapshot row count {data.shape[0]} does not "
                         f"match nx*ny = {meta['nx'] * meta['ny']}")
    fields = {name: data[:, k].reshape(meta["nx"], meta["ny"])
              for k, name in enumerate(columns)}
    return meta, fields


def _write_vtk_legacy(state, params, path):
    geom = state.geom
    fields = _snapshot_fields(state, params)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"snapshot t={state.t!r}\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {geom.nx + 1} {geom.ny + 1} 1\n")
        fh.write(f"ORIGIN {geom.origin[0]!r} {geom.origin[1]!r} 0.0\n")
        fh.write(f"SPACING {geom.dx!r} {geom.dy!r} 1.0\n")
        fh.write(f"CELL_DATA {geom.nx * geom.ny}\n")
        for name in SNAPSHOT_COLUMNS[2:]:  # coordinates excluded
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            arr = np.asarray(fields[name])
            # VTK cell data is x-fastest
            for j in range(geom.ny):
                for i in range(geom.nx):
                    fh.write(repr(float(arr[i, j])) + "\n")


class DiagnosticsWriter:
    """Streams per-step diagnostics rows into a CSV file."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.DictWriter(self._fh,
                                      fieldnames=DIAGNOSTIC_COLUMNS)
        self._writer.writeheader()

    def write(self, record: dict):
        self._writer.writerow({k: repr(record[k])
                               if isinstance(record[k], float)
                               else record[k]
                               for k in DIAGNOSTIC_COLUMNS})

    def flush(self):
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path):
    """Read a diagnostics.csv into a dict of float/int columns."""
    with open(path) as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    out = {}
    for name in reader.fieldnames:
        col = [r[name] for r in rows]
        if name in ("step", "cg_iters"):
            out[name] = np.array([int(c) for c in col])
        else:
            out[name] = np.array([float(c) for c in col])
    return out
