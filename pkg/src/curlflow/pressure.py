"""Implicit pressure stage of the semi-implicit step.

Four pieces, applied after the convective update and the staggered
transport/relaxation of the interface and distortion fields:

* corner-flux forcing: the capillary and shear stresses live on the
  vertices; their four-point discrete divergence (plus gravity) gives the
  momentum forcing at cell centers, interpolated component-wise onto the
  staggered edges,
* a discrete wave equation for the new pressure, assembled from the total
  energy balance with an affine equation of state (so the system is
  linear),
* a matrix-free Jacobi-preconditioned conjugate-gradient solver, and
* a short Picard iteration refreshing the lagged enthalpy, kinetic-energy
  and gravity-work closures, followed by the final conservative energy and
  cell-centered momentum updates.

Walls carry homogeneous Neumann pressure coupling: the enthalpy
coefficient of a boundary edge is dropped and the normal momentum there is
identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import state as st
from .grid import (GridGeometry, _stag_pair, avg_cell_to_edge_x,
                   avg_cell_to_edge_y, avg_edge_to_cell_x,
                   avg_edge_to_cell_y, cell_to_vertex, corner_interp,
                   div_edge_to_cell, div_vertex_to_cell, pad_cell)
from .state import AL, AR1, AR2, B0, EN, MU1, MU2, MU3, MaterialParams

__all__ = [
    "PressureSolveError", "CornerForcing", "PressureSystem", "CGResult",
    "PicardResult", "corner_flux_divergence", "assemble_system", "cg_solve",
    "picard_pressure_loop", "final_updates",
]

PICARD_DEFAULT = 3
PICARD_EXIT_RTOL = 1e-10
CG_DEFAULT_TOL = 1e-10


class PressureSolveError(RuntimeError):
    """Raised when the pressure subsystem cannot be solved."""


# ---------------------------------------------------------------------------
# staggered helpers
# ---------------------------------------------------------------------------

def _grad_x_edges(p, geom: GridGeometry):
    """(p_i - p_{i-1})/dx on x-edges; zero on wall edges (mirrored pad)."""
    pad = pad_cell(p, geom, 1)
    mid = pad[..., :, 1:-1]
    return (mid[..., 1:geom.nex + 1, :] - mid[..., 0:geom.nex, :]) / geom.dx


def _grad_y_edges(p, geom: GridGeometry):
    pad = pad_cell(p, geom, 1)
    mid = pad[..., 1:-1, :]
    return (mid[..., :, 1:geom.ney + 1] - mid[..., :, 0:geom.ney]) / geom.dy


def _edge_masks(geom: GridGeometry):
    """1 on interior edges, 0 on wall-boundary edges (normal direction)."""
    mask_x = np.ones((geom.nex, geom.ny))
    mask_y = np.ones((geom.nx, geom.ney))
    if geom.bc[0] == "wall":
        mask_x[0, :] = 0.0
        mask_x[-1, :] = 0.0
    if geom.bc[1] == "wall":
        mask_y[:, 0] = 0.0
        mask_y[:, -1] = 0.0
    return mask_x, mask_y


# ---------------------------------------------------------------------------
# corner-flux forcing
# ---------------------------------------------------------------------------

@dataclass
class CornerForcing:
    """Momentum forcing from vertex stresses and gravity.

    ``f1``/``f2`` are the normal components on x-/y-edges used by the edge
    momentum update; ``f_cell`` is the full (3, nx, ny) cell-centered
    vector used for the final cell momentum update.
    """

    f1: np.ndarray
    f2: np.ndarray
    f_cell: np.ndarray


def corner_flux_divergence(b_vertex, A_vertex, rho_cell, params:
                           MaterialParams, geom: GridGeometry):
    """Four-point divergence of the vertex capillary + shear stresses.

    The stress tensor is evaluated on the vertices (density interpolated
    from the cells), each column is diverged to cell centers with the
    four-point stencil, gravity ``rho*g`` is added, and the first two
    components are averaged onto the staggered edges.  Wall-boundary edges
    carry zero normal forcing.
    """
    rho_v = cell_to_vertex(rho_cell, geom)
    # the stresses act on the momentum as +div(sigma): with the shear
    # stress -rho c_s^2 G devG and strain accumulated by the gradient
    # transport of the distortion rows, a sheared velocity profile is
    # damped at the Newtonian rate c_s^2 tau / 6 (and the capillary
    # stress pulls a curved interface inward)
    omega = (st.capillary_stress(b_vertex, params.sigma)
             + st.shear_stress(A_vertex, rho_v, params.c_s))
    f_cell = np.stack([div_vertex_to_cell(omega[:, k], geom)
                       + rho_cell * params.g[k] for k in range(3)])
    if not np.all(np.isfinite(f_cell)):
        bad = np.argwhere(~np.all(np.isfinite(f_cell), axis=0))[0]
        raise PressureSolveError(
            f"non-finite corner forcing at cell {tuple(bad)}")
    f1 = avg_cell_to_edge_x(f_cell[0], geom, parity=-1.0)
    f2 = avg_cell_to_edge_y(f_cell[1], geom, parity=-1.0)
    return CornerForcing(f1=f1, f2=f2, f_cell=f_cell)


# ---------------------------------------------------------------------------
# system assembly
# ---------------------------------------------------------------------------

@dataclass
class _EdgeEOS:
    """Per-edge closure coefficients that stay fixed over the Picard loop."""

    k0_x: np.ndarray
    k1_x: np.ndarray
    rho_x: np.ndarray
    k0_y: np.ndarray
    k1_y: np.ndarray
    rho_y: np.ndarray
    mask_x: np.ndarray
    mask_y: np.ndarray

    def enthalpy(self, p, geom: GridGeometry):
        """h = (rho*e(p_edge) + p_edge)/rho_edge on both edge families."""
        p_x = avg_cell_to_edge_x(p, geom)
        p_y = avg_cell_to_edge_y(p, geom)
        h_x = (self.k0_x + (self.k1_x + 1.0) * p_x) / self.rho_x * self.mask_x
        h_y = (self.k0_y + (self.k1_y + 1.0) * p_y) / self.rho_y * self.mask_y
        return h_x, h_y


@dataclass
class PressureSystem:
    """Linear system  k1*p - dt^2 div(h grad p) = rhs  (k0 moved to rhs).

    The operator is symmetric and positive semi-definite for h >= 0 and
    strictly positive definite when k1 > 0 everywhere.
    """

    h_x: np.ndarray
    h_y: np.ndarray
    k0: np.ndarray
    k1: np.ndarray
    rhs: np.ndarray
    dt: float
    geom: GridGeometry
    edge_eos: _EdgeEOS | None = None

    def apply(self, p):
        gx = self.h_x * _grad_x_edges(p, self.geom)
        gy = self.h_y * _grad_y_edges(p, self.geom)
        return self.k1 * p - self.dt ** 2 * div_edge_to_cell(gx, gy,
                                                             self.geom)

    def diagonal(self):
        lox, hix = _stag_pair(self.h_x, -2, self.geom.bc[0])
        loy, hiy = _stag_pair(self.h_y, -1, self.geom.bc[1])
        return (self.k1
                + self.dt ** 2 * ((lox + hix) / self.geom.dx ** 2
                                  + (loy + hiy) / self.geom.dy ** 2))


def _upwinded_edge_alpha(info, m1_ref, m2_ref):
    """Interface-fraction on edges, upwinded by the edge momentum sign.

    A zero momentum degenerates to the arithmetic average of the two
    predictor face states, keeping the constant-pressure fixed point
    exact for flows at rest.
    """
    vxl, vxr = info["x_faces"]
    vyl, vyr = info["y_faces"]
    sx = np.sign(m1_ref)
    sy = np.sign(m2_ref)
    a_x = 0.5 * (1.0 + sx) * vxl[AL] + 0.5 * (1.0 - sx) * vxr[AL]
    a_y = 0.5 * (1.0 + sy) * vyl[AL] + 0.5 * (1.0 - sy) * vyr[AL]
    return st.clamp_alpha(a_x), st.clamp_alpha(a_y)


@dataclass
class _PicardContext:
    """Everything that stays frozen while the pressure is iterated."""

    rho: np.ndarray
    k0: np.ndarray
    k1: np.ndarray
    rho_e_surf: np.ndarray
    rho_e_shear: np.ndarray
    m1_star: np.ndarray
    m2_star: np.ndarray
    m1_pred: np.ndarray
    m2_pred: np.ndarray
    forcing: CornerForcing
    eos: _EdgeEOS
    b_cell: np.ndarray
    A_cell: np.ndarray


def _build_context(q_star, info, b_vertex, A_vertex, params: MaterialParams,
                   geom: GridGeometry, dt):
    rho = q_star[AR1] + q_star[AR2]
    alpha = st.clamp_alpha(q_star[AL])
    k0, k1 = st.eos_affine_coeffs(alpha, params)

    b_cell = corner_interp(b_vertex, None, geom)
    A_cell = corner_interp(A_vertex, None, geom)
    rho_e_surf = st.surface_energy_density(b_cell, params.sigma)
    rho_e_shear = st.shear_energy_density(A_cell, rho, params.c_s)

    mask_x, mask_y = _edge_masks(geom)
    m1_star = avg_cell_to_edge_x(q_star[MU1], geom, parity=-1.0) * mask_x
    m2_star = avg_cell_to_edge_y(q_star[MU2], geom, parity=-1.0) * mask_y
    forcing = corner_flux_divergence(b_vertex, A_vertex, rho, params, geom)
    m1_pred = m1_star + dt * forcing.f1 * mask_x
    m2_pred = m2_star + dt * forcing.f2 * mask_y

    a_x, a_y = _upwinded_edge_alpha(info, m1_star, m2_star)
    k0_x, k1_x = st.eos_affine_coeffs(a_x, params)
    k0_y, k1_y = st.eos_affine_coeffs(a_y, params)
    eos = _EdgeEOS(k0_x=k0_x, k1_x=k1_x,
                   rho_x=avg_cell_to_edge_x(rho, geom),
                   k0_y=k0_y, k1_y=k1_y,
                   rho_y=avg_cell_to_edge_y(rho, geom),
                   mask_x=mask_x, mask_y=mask_y)
    return _PicardContext(rho=rho, k0=k0, k1=k1, rho_e_surf=rho_e_surf,
                          rho_e_shear=rho_e_shear, m1_star=m1_star,
                          m2_star=m2_star, m1_pred=m1_pred, m2_pred=m2_pred,
                          forcing=forcing, eos=eos, b_cell=b_cell,
                          A_cell=A_cell)


def _lagged_closures(ctx: _PicardContext, q_star, m1, m2, params, geom):
    """Kinetic-energy and gravity-work densities from edge momenta."""
    u1 = avg_edge_to_cell_x(m1 / ctx.eos.rho_x, geom)
    u2 = avg_edge_to_cell_y(m2 / ctx.eos.rho_y, geom)
    e_k = (0.5 * ctx.rho * (u1 ** 2 + u2 ** 2)
           + 0.5 * q_star[MU3] ** 2 / ctx.rho)
    g = params.g
    w_g = (avg_edge_to_cell_x(m1, geom) * g[0]
           + avg_edge_to_cell_y(m2, geom) * g[1] + q_star[MU3] * g[2])
    return e_k, w_g


def assemble_system(q_star, info, b_vertex, A_vertex, dt,
                    params: MaterialParams, geom: GridGeometry,
                    picard_state=None, p_init=None):
    """Build the pressure system for one Picard pass.

    ``picard_state`` is ``None`` on the first pass or the
    (p, m1, m2, context) tuple carried between passes.  On the first pass
    the lagged closures are seeded from the star momenta with the
    ``p_init`` gradient applied; passing the pre-step pressure keeps
    constant-pressure and hydrostatically balanced states exact fixed
    points of the very first solve.
    """
    if picard_state is None:
        ctx = _build_context(q_star, info, b_vertex, A_vertex, params, geom,
                             dt)
        if p_init is not None:
            p = np.array(p_init, dtype=float, copy=True)
        else:
            rho_e = (q_star[EN] - ctx.rho_e_surf - ctx.rho_e_shear
                     - 0.5 * (q_star[MU1] ** 2 + q_star[MU2] ** 2
                              + q_star[MU3] ** 2) / ctx.rho)
            p = (rho_e - ctx.k0) / ctx.k1
        m1 = ctx.m1_pred - dt * _grad_x_edges(p, geom) * ctx.eos.mask_x
        m2 = ctx.m2_pred - dt * _grad_y_edges(p, geom) * ctx.eos.mask_y
    else:
        p, m1, m2, ctx = picard_state

    h_x, h_y = ctx.eos.enthalpy(p, geom)
    e_k, w_g = _lagged_closures(ctx, q_star, m1, m2, params, geom)
    d = (q_star[EN] - ctx.rho_e_surf - ctx.rho_e_shear - e_k + dt * w_g
         - dt * div_edge_to_cell(h_x * ctx.m1_pred, h_y * ctx.m2_pred, geom))
    if not np.all(np.isfinite(d)):
        bad = np.argwhere(~np.isfinite(d))[0]
        raise PressureSolveError(
            f"non-finite pressure-system coefficient at cell {tuple(bad)}")
    sys = PressureSystem(h_x=h_x, h_y=h_y, k0=ctx.k0, k1=ctx.k1, rhs=d,
                         dt=dt, geom=geom, edge_eos=ctx.eos)
    return sys, (p, m1, m2, ctx)


# ---------------------------------------------------------------------------
# conjugate gradient
# ---------------------------------------------------------------------------

@dataclass
class CGResult:
    p: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)


def cg_solve(sys: PressureSystem, p_guess, tol: float = CG_DEFAULT_TOL,
             max_iter: int | None = None) -> CGResult:
    """Jacobi-preconditioned matrix-free conjugate gradient.

    Terminates when ||rhs - L(p)||_2 <= tol * ||rhs||_2.  Inner products
    use numpy's pairwise summation so repeated runs reduce in a fixed
    order.
    """
    geom = sys.geom
    if max_iter is None:
        max_iter = max(500, 10 * int(np.sqrt(geom.nx * geom.ny)))
    b = sys.rhs - sys.k0
    bnorm = np.sqrt(np.sum(b * b))
    if bnorm == 0.0:
        return CGResult(p=np.zeros_like(b), iterations=0, residuals=[0.0])

    p = np.array(p_guess, dtype=float, copy=True)
    r = b - sys.apply(p)
    residuals = [float(np.sqrt(np.sum(r * r)) / bnorm)]
    if residuals[-1] <= tol:
        return CGResult(p=p, iterations=0, residuals=residuals)

    diag = sys.diagonal()
    z = r / diag
    d = z.copy()
    rz = np.sum(r * z)
    for it in range(1, max_iter + 1):
        Ld = sys.apply(d)
        denom = np.sum(d * Ld)
        if denom <= 0.0:
            raise PressureSolveError(
                f"pressure operator lost positivity (d^T L d = {denom:g})")
        alpha = rz / denom
        p += alpha * d
        r -= alpha * Ld
        residuals.append(float(np.sqrt(np.sum(r * r)) / bnorm))
        if residuals[-1] <= tol:
            return CGResult(p=p, iterations=it, residuals=residuals)
        z = r / diag
        rz_new = np.sum(r * z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise PressureSolveError(
        f"conjugate gradient failed to reach tol={tol:g} in {max_iter} "
        f"iterations; residual history tail {residuals[-5:]}")


# ---------------------------------------------------------------------------
# Picard loop and final updates
# ---------------------------------------------------------------------------

@dataclass
class PicardResult:
    p: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    system: PressureSystem
    forcing: CornerForcing
    b_cell: np.ndarray
    A_cell: np.ndarray
    cg_iterations: list
    picard_deltas: list


def picard_pressure_loop(q_star, info, b_vertex, A_vertex, dt,
                         params: MaterialParams, geom: GridGeometry,
                         n_picard: int = PICARD_DEFAULT,
                         cg_tol: float = CG_DEFAULT_TOL,
                         p_init=None) -> PicardResult:
    """Iterate assembly, CG solve and edge-momentum refresh.

    ``p_init`` (the pre-step cell pressure, when the caller has it) seeds
    the lagged closures and warm-starts the solver.  The loop exits early
    when the pressure stops moving in the max norm (relative change below
    1e-10).
    """
    state = None
    cg_iters, deltas = [], []
    sys = None
    p = m1 = m2 = None
    ctx = None
    for _ in range(max(1, n_picard)):
        sys, state = assemble_system(q_star, info, b_vertex, A_vertex, dt,
                                     params, geom, state, p_init=p_init)
        p_prev, _, _, ctx = state
        res = cg_solve(sys, p_prev, tol=cg_tol)
        cg_iters.append(res.iterations)
        p = res.p
        m1 = ctx.m1_pred - dt * _grad_x_edges(p, geom) * ctx.eos.mask_x
        m2 = ctx.m2_pred - dt * _grad_y_edges(p, geom) * ctx.eos.mask_y
        state = (p, m1, m2, ctx)
        scale = float(np.max(np.abs(p)))
        delta = float(np.max(np.abs(p - p_prev)))
        deltas.append(delta)
        if delta <= PICARD_EXIT_RTOL * max(scale, 1e-300):
            break
    # refresh the enthalpy at the accepted pressure for the energy update
    sys.h_x, sys.h_y = ctx.eos.enthalpy(p, geom)
    return PicardResult(p=p, m1=m1, m2=m2, system=sys, forcing=ctx.forcing,
                        b_cell=ctx.b_cell, A_cell=ctx.A_cell,
                        cg_iterations=cg_iters, picard_deltas=deltas)


def final_updates(q_star, result: PicardResult, params: MaterialParams,
                  geom: GridGeometry):
    """Conservative energy update and cell-centered momentum update.

    The energy uses the edge enthalpy fluxes with the final edge momenta
    plus the gravity work; the cell momentum uses face-averaged pressures
    (not averaged edge momenta, which would reintroduce Lax-Friedrichs
    diffusion), the stress forcing and gravity.
    """
    sys = result.system
    dt = sys.dt
    q_new = np.array(q_star, dtype=float, copy=True)

    g = params.g
    w_g = (avg_edge_to_cell_x(result.m1, geom) * g[0]
           + avg_edge_to_cell_y(result.m2, geom) * g[1]
           + q_star[MU3] * g[2])
    q_new[EN] = (q_star[EN]
                 - dt * div_edge_to_cell(sys.h_x * result.m1,
                                         sys.h_y * result.m2, geom)
                 + dt * w_g)

    p_x = avg_cell_to_edge_x(result.p, geom)
    p_y = avg_cell_to_edge_y(result.p, geom)
    lox, hix = _stag_pair(p_x, -2, geom.bc[0])
    loy, hiy = _stag_pair(p_y, -1, geom.bc[1])
    f = result.forcing.f_cell
    q_new[MU1] = q_star[MU1] - dt * (hix - lox) / geom.dx + dt * f[0]
    q_new[MU2] = q_star[MU2] - dt * (hiy - loy) / geom.dy + dt * f[1]
    q_new[MU3] = q_star[MU3] + dt * f[2]
    return q_new
