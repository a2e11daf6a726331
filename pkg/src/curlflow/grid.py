"""Staggered Cartesian grid layout and compatible discrete operators.

Field locations and array shapes (grid axes are always the trailing two):

* cell fields:   shape ``(nx, ny)``, cell (i, j) centered at
  ``(x0 + (i+1/2) dx, y0 + (j+1/2) dy)``.
* x-edge fields: shape ``(nex, ny)`` with ``nex = nx`` (periodic in x) or
  ``nx + 1`` (wall); index k sits at ``x0 + k dx``, i.e. between cells
  k-1 and k.
* y-edge fields: shape ``(nx, ney)``, same convention in y.
* vertex fields: shape ``(nvx, nvy)``; vertex (k, l) sits at
  ``(x0 + k dx, y0 + l dy)``.  Under periodic boundaries the duplicated
  seam vertex is identified (``nvx = nx``), under walls ``nvx = nx + 1``.

With this convention every staggered-to-centered stencil (divergence,
curl, edge averaging) needs no ghost values, while centered-to-staggered
stencils (gradient, cell-to-edge/vertex averaging) consume one ghost
layer of cell values, filled per boundary type: periodic wraps, walls
mirror with a per-component parity sign (-1 for wall-normal velocity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PERIODIC = "periodic"
WALL = "wall"


@dataclass(frozen=True)
class GridGeometry:
    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float] = (0.0, 0.0)
    bc: tuple[str, str] = (PERIODIC, PERIODIC)

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError("need at least 4 cells per direction")
        if self.dx <= 0.0 or self.dy <= 0.0:
            raise ValueError("mesh spacings must be positive")
        for b in self.bc:
            if b not in (PERIODIC, WALL):
                raise ValueError(f"unknown boundary type {b!r}")

    # staggered array extents -------------------------------------------------
    @property
    def nvx(self) -> int:
        return self.nx if self.bc[0] == PERIODIC else self.nx + 1

    @property
    def nvy(self) -> int:
        return self.ny if self.bc[1] == PERIODIC else self.ny + 1

    @property
    def nex(self) -> int:
        return self.nvx

    @property
    def ney(self) -> int:
        return self.nvy

    # coordinates -------------------------------------------------------------
    def cell_centers(self):
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * self.dx
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def vertices(self):
        x = self.origin[0] + np.arange(self.nvx) * self.dx
        y = self.origin[1] + np.arange(self.nvy) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def x_edges(self):
        x = self.origin[0] + np.arange(self.nex) * self.dx
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def y_edges(self):
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * self.dx
        y = self.origin[1] + np.arange(self.ney) * self.dy
        return np.meshgrid(x, y, indexing="ij")


# ---------------------------------------------------------------------------
# ghost filling for cell fields
# ---------------------------------------------------------------------------

def pad_cell(arr, geom: GridGeometry, ng: int = 1, parity=(1.0, 1.0)):
    """Pad the trailing two axes with ng ghost layers per side.

    Periodic axes wrap; wall axes mirror the interior values, multiplied by
    the given parity (use -1 for the wall-normal velocity component).
    """
    out = np.asarray(arr, dtype=float)
    for ax, bc, par in zip((-2, -1), geom.bc, parity):
        width = [(0, 0)] * out.ndim
        width[out.ndim + ax] = (ng, ng)
        if bc == PERIODIC:
            out = np.pad(out, width, mode="wrap")
        else:
            out = np.pad(out, width, mode="symmetric")
            if par != 1.0:
                lo = [slice(None)] * out.ndim
                hi = [slice(None)] * out.ndim
                lo[out.ndim + ax] = slice(0, ng)
                hi[out.ndim + ax] = slice(out.shape[ax] - ng, None)
                out[tuple(lo)] *= par
                out[tuple(hi)] *= par
    return out


def _stag_pair(f, axis, bc):
    """(low, high) staggered neighbours of each cell along one axis.

    For a staggered array indexed k at position k - 1/2, the cell i is
    flanked by entries i (low) and i+1 (high); periodic axes wrap the
    duplicated seam entry.
    """
    if bc == PERIODIC:
        return f, np.roll(f, -1, axis=axis)
    lo = [slice(None)] * f.ndim
    hi = [slice(None)] * f.ndim
    lo[axis] = slice(0, f.shape[axis] - 1)
    hi[axis] = slice(1, None)
    return f[tuple(lo)], f[tuple(hi)]


def _corner_quads(f, geom: GridGeometry):
    """The four vertex (or edge-pair) values surrounding each cell.

    Returns (f00, f10, f01, f11) where the first index is the x offset
    (0 = left, 1 = right) and the second the y offset.
    """
    fx0, fx1 = _stag_pair(f, -2, geom.bc[0])
    f00, f01 = _stag_pair(fx0, -1, geom.bc[1])
    f10, f11 = _stag_pair(fx1, -1, geom.bc[1])
    return f00, f10, f01, f11


def _cell_quads(arr, geom: GridGeometry, parity=(1.0, 1.0)):
    """The four padded cell values surrounding each vertex.

    Returns (c00, c10, c01, c11) where index 1 in x selects cell k (right
    of vertex k) and index 0 selects cell k-1.
    """
    p = pad_cell(arr, geom, 1, parity)
    nvx, nvy = geom.nvx, geom.nvy
    sl = lambda a, b: (Ellipsis, slice(a, a + nvx), slice(b, b + nvy))
    return p[sl(0, 0)], p[sl(1, 0)], p[sl(0, 1)], p[sl(1, 1)]


# ---------------------------------------------------------------------------
# compatible discrete operators
# ---------------------------------------------------------------------------

def div_edge_to_cell(ux, uy, geom: GridGeometry):
    """Two-point divergence of an edge-based vector field, at cell centers."""
    lx, hx = _stag_pair(ux, -2, geom.bc[0])
    ly, hy = _stag_pair(uy, -1, geom.bc[1])
    return (hx - lx) / geom.dx + (hy - ly) / geom.dy


def grad_cell_to_vertex(phi, geom: GridGeometry, parity=(1.0, 1.0)):
    """Corner gradient of a cell scalar field; (3, nvx, nvy) output."""
    c00, c10, c01, c11 = _cell_quads(phi, geom, parity)
    gx = (c11 - c01 + c10 - c00) / (2.0 * geom.dx)
    gy = (c11 - c10 + c01 - c00) / (2.0 * geom.dy)
    return np.stack([gx, gy, np.zeros_like(gx)])


def curl_vertex_to_cell(b, geom: GridGeometry):
    """z-component of the trapezoidal discrete curl of a vertex field.

    Compatible with grad_cell_to_vertex: the composition vanishes to
    rounding for every scalar field.  Returns a (nx, ny) array (the x and
    y curl components are identically zero in 2D).
    """
    v1_00, v1_10, v1_01, v1_11 = _corner_quads(b[0], geom)
    v2_00, v2_10, v2_01, v2_11 = _corner_quads(b[1], geom)
    dxb2 = (v2_11 - v2_01 + v2_10 - v2_00) / (2.0 * geom.dx)
    dyb1 = (v1_11 - v1_10 + v1_01 - v1_00) / (2.0 * geom.dy)
    return dxb2 - dyb1


def div_vertex_to_cell(b, geom: GridGeometry):
    """Four-point divergence of a vertex vector field, at cell centers."""
    v1_00, v1_10, v1_01, v1_11 = _corner_quads(b[0], geom)
    v2_00, v2_10, v2_01, v2_11 = _corner_quads(b[1], geom)
    return ((v1_11 - v1_01 + v1_10 - v1_00) / (2.0 * geom.dx)
            + (v2_11 - v2_10 + v2_01 - v2_00) / (2.0 * geom.dy))


def div_cell_to_vertex(b, geom: GridGeometry, parity=(1.0, 1.0)):
    """Four-point divergence of a cell vector field, at vertices."""
    c1_00, c1_10, c1_01, c1_11 = _cell_quads(b[0], geom, parity)
    c2_00, c2_10, c2_01, c2_11 = _cell_quads(b[1], geom, parity)
    return ((c1_11 - c1_01 + c1_10 - c1_00) / (2.0 * geom.dx)
            + (c2_11 - c2_10 + c2_01 - c2_00) / (2.0 * geom.dy))


def avg_cell_to_edge_x(c, geom: GridGeometry, parity=1.0):
    p = pad_cell(c, geom, 1, (parity, 1.0))
    # strip the untouched y ghosts, keep the x pair straddling each x-edge
    mid = p[..., :, 1:-1]
    return 0.5 * (mid[..., 0:geom.nex, :] + mid[..., 1:geom.nex + 1, :])


def avg_cell_to_edge_y(c, geom: GridGeometry, parity=1.0):
    p = pad_cell(c, geom, 1, (1.0, parity))
    mid = p[..., 1:-1, :]
    return 0.5 * (mid[..., :, 0:geom.ney] + mid[..., :, 1:geom.ney + 1])


def avg_edge_to_cell_x(e, geom: GridGeometry):
    lo, hi = _stag_pair(e, -2, geom.bc[0])
    return 0.5 * (lo + hi)


def avg_edge_to_cell_y(e, geom: GridGeometry):
    lo, hi = _stag_pair(e, -1, geom.bc[1])
    return 0.5 * (lo + hi)


def cell_to_vertex(c, geom: GridGeometry, parity=(1.0, 1.0)):
    """Plain four-cell average of a cell field onto the vertices."""
    c00, c10, c01, c11 = _cell_quads(c, geom, parity)
    return 0.25 * (c00 + c10 + c01 + c11)


def corner_interp(b, u_cell, geom: GridGeometry, upwind: bool = False):
    """Interpolate a vertex field to cell centers.

    Plain four-corner arithmetic mean, or, with ``upwind=True``, the
    partially upwinded mean whose weights are biased toward the corner the
    flow comes from and blended toward 1/4 for weak convection.
    """
    f00, f10, f01, f11 = _corner_quads(b, geom)
    if not upwind:
        return 0.25 * (f00 + f10 + f01 + f11)

    eps = 1e-6
    u1, u2 = u_cell[0], u_cell[1]
    speed = np.sqrt(u1 ** 2 + u2 ** 2)
    u1p = np.maximum(0.0, u1) / (speed + eps)
    u2p = np.maximum(0.0, u2) / (speed + eps)
    u1m = np.maximum(0.0, -u1) / (speed + eps)
    u2m = np.maximum(0.0, -u2) / (speed + eps)
    w = np.stack([eps + u1p + u2p,    # lower-left corner (flow from -x, -y)
                  eps + u1m + u2p,    # lower-right
                  eps + u1p + u2m,    # upper-left
                  eps + u1m + u2m])   # upper-right
    lam = np.minimum(1.0, 2.0 * speed * np.sqrt(geom.dx * geom.dy))
    w = w / w.sum(axis=0) * lam + (1.0 - lam) / 4.0
    return w[0] * f00 + w[1] * f10 + w[2] * f01 + w[3] * f11


def curl_curl(b, geom: GridGeometry):
    """Vertex-located curl of the cell-located z-curl of a vertex field."""
    omega = curl_vertex_to_cell(b, geom)
    c00, c10, c01, c11 = _cell_quads(omega, geom)
    ccx = -(c11 - c10 + c01 - c00) / (2.0 * geom.dy)
    ccy = (c11 - c01 + c10 - c00) / (2.0 * geom.dx)
    return np.stack([ccx, ccy, np.zeros_like(ccx)])


def vector_laplacian(b, geom: GridGeometry):
    """Compatible vector Laplacian grad(div b) - curl(curl b) at vertices."""
    return (grad_cell_to_vertex(div_vertex_to_cell(b, geom), geom)
            - curl_curl(b, geom))
