"""One full semi-implicit step and the surrounding run machinery.

A step applies, in order: the explicit convective update, the exactly
curl-free transport of the interface field and the distortion rows with
the semi-analytic strain relaxation, the corner-flux forcing, the implicit
pressure solve with its Picard refresh, and the final conservative
updates.  An explicit reference mode folds the pressure fluxes into the
MUSCL scheme instead (used to generate resolved 1D reference solutions).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import relax
from . import state as st
from . import transport as tr
from .eig3 import inv3, matmul3
from .grid import (GridGeometry, cell_to_vertex, corner_interp,
                   curl_vertex_to_cell)
from .muscl import convective_update
from .pressure import final_updates, picard_pressure_loop
from .state import (A0, AL, AR1, AR2, B0, EN, MU1, MU2, MU3, NCOMP, P, U1,
                    U3, MaterialParams, cons_to_prim, mixture_tau,
                    rho_of_cons)
from .wavespeeds import signal_speed

__all__ = [
    "StepConfig", "SimulationState", "SimulationError", "compute_dt",
    "step", "explicit_reference_step", "diagnostics", "save_checkpoint",
    "load_checkpoint", "DIAGNOSTIC_COLUMNS",
]

DIAGNOSTIC_COLUMNS = ["step", "t", "dt", "Ek", "curl_b_L1", "curl_b_L2",
                      "curl_A_L1", "mass1", "mass2", "Etot", "cg_iters",
                      "picard_delta"]

# mirror signs of vector components across x- and y-walls; a matrix entry
# (i, j) picks up the product of the two component signs
_WALL_SIGN_X = np.array([-1.0, 1.0, 1.0])
_WALL_SIGN_Y = np.array([1.0, -1.0, 1.0])


class SimulationError(RuntimeError):
    """A stage of the time step failed; the message names the stage."""


@dataclass
class StepConfig:
    """Numeric knobs of the time loop (paper defaults where stated)."""

    cfl: float = 0.5
    dt_max: float = np.inf
    beta: float = 2.0
    k_L: float = 0.1
    picard_iters: int = 3
    cg_tol: float = 1e-10
    upwind_b: bool = False


@dataclass
class SimulationState:
    """Cell conserved fields plus the vertex-staggered constrained fields."""

    geom: GridGeometry
    q: np.ndarray
    b_vertex: np.ndarray
    A_vertex: np.ndarray
    t: float = 0.0
    step: int = 0
    last_dt: float = 0.0
    m1: np.ndarray | None = None
    m2: np.ndarray | None = None
    cg_iters: int = 0
    picard_delta: float = 0.0


def _vertex_rows_to_cells(A_vertex, geom):
    """Plain corner average of the (3, 3, nvx, nvy) distortion field."""
    return corner_interp(A_vertex, None, geom)


def sync_cell_copies(state: SimulationState):
    """Write the vertex b and A onto the cell slots of the packed state."""
    geom = state.geom
    state.q[B0:B0 + 3] = corner_interp(state.b_vertex, None, geom)
    A_cell = _vertex_rows_to_cells(state.A_vertex, geom)
    for i in range(3):
        for j in range(3):
            state.q[A0 + 3 * i + j] = A_cell[i, j]
    return state


def compute_dt(state: SimulationState, params: MaterialParams,
               config: StepConfig, explicit: bool = False) -> float:
    """CFL time step from the directional signal-speed maxima.

    The semi-implicit estimate sets the adiabatic sound speed to zero (the
    pressure waves are treated implicitly) but keeps the shear and
    capillary speeds; the explicit reference mode uses the full Wood
    speed.  The result is capped by config.dt_max.
    """
    v = cons_to_prim(state.q, params)
    geom = state.geom
    # unsplit 2D bound: the directional signal speeds add; the diagonal
    # checkerboard mode of the central transport update is unstable under
    # the naive per-direction minimum
    rate = float(np.max(signal_speed(v, params, 1.0, 0.0, explicit)
                        / geom.dx
                        + signal_speed(v, params, 0.0, 1.0, explicit)
                        / geom.dy))
    dt = config.cfl / rate if rate > 0.0 else np.inf
    return float(min(dt, config.dt_max))


def _transport_constrained_fields(state: SimulationState,
                                  params: MaterialParams,
                                  config: StepConfig, v, dt):
    """Advance b and the A rows; relax the distortion when shear is on."""
    geom = state.geom
    u_cell = v[U1:U3 + 1]
    rho = st.rho_of_prim(v)

    c_b = tr.artificial_speed(u_cell, config.k_L, mode="interface",
                              sigma=params.sigma, b_cell=v[B0:B0 + 3],
                              rho_cell=rho)
    b_new = tr.rk2_transport(state.b_vertex, u_cell, geom, dt, c_b,
                             scalar_parity=tr.PARITY_B,
                             upwind_phi=config.upwind_b)

    # with zero shear speed the distortion enters no flux or stress term;
    # freeze it instead of transporting it through shocks, where the
    # central scheme would let the decoupled rows grow without bound
    if params.c_s == 0.0:
        return b_new, state.A_vertex.copy()

    c_a = tr.artificial_speed(u_cell, config.k_L, mode="distortion")
    A_star = np.empty_like(state.A_vertex)
    for r in range(3):
        A_star[r] = tr.rk2_transport(state.A_vertex[r], u_cell, geom, dt,
                                     c_a, scalar_parity=tr.PARITY_A_ROW[r])

    # relax the cell-interpolated distortion and carry the multiplicative
    # correction back to the vertices, preserving the transported rotation
    A_n_cell = _vertex_rows_to_cells(state.A_vertex, geom)
    A_star_cell = _vertex_rows_to_cells(A_star, geom)
    tau = mixture_tau(v[AL], params)
    res = relax.integrate(A_n_cell, A_star_cell, dt, tau)
    corr = matmul3(inv3(A_star_cell), res.A_out)
    corr_v = np.empty((3, 3) + (geom.nvx, geom.nvy))
    for i in range(3):
        for j in range(3):
            par = (_WALL_SIGN_X[i] * _WALL_SIGN_X[j],
                   _WALL_SIGN_Y[i] * _WALL_SIGN_Y[j])
            corr_v[i, j] = cell_to_vertex(corr[i, j], geom, par)
    return b_new, matmul3(A_star, corr_v)


def step(state: SimulationState, params: MaterialParams,
         config: StepConfig | None = None, dt: float | None = None
         ) -> SimulationState:
    """Advance one semi-implicit step; returns a new SimulationState."""
    config = config or StepConfig()
    if dt is None:
        dt = compute_dt(state, params, config)
    if not np.isfinite(dt) or dt <= 0.0:
        raise SimulationError(f"non-positive time step dt={dt}")
    geom = state.geom
    v = cons_to_prim(state.q, params)

    def run(stage, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise SimulationError(f"stage '{stage}' failed at t={state.t:g},"
                                  f" step {state.step}: {exc}") from exc

    q_star, info = run("convective", convective_update, v, geom, params, dt,
                       beta=config.beta)
    b_new, A_new = run("transport-relax", _transport_constrained_fields,
                       state, params, config, v, dt)

    # consistent cell copies of the constrained fields for the
    # pressure-stage energy bookkeeping
    q_star[B0:B0 + 3] = corner_interp(b_new, None, geom)
    A_cell = _vertex_rows_to_cells(A_new, geom)
    for i in range(3):
        for j in range(3):
            q_star[A0 + 3 * i + j] = A_cell[i, j]

    res = run("pressure", picard_pressure_loop, q_star, info, b_new, A_new,
              dt, params, geom, n_picard=config.picard_iters,
              cg_tol=config.cg_tol, p_init=v[P])
    q_new = run("final-updates", final_updates, q_star, res, params, geom)
    run("validate", cons_to_prim, q_new, params)

    return SimulationState(geom=geom, q=q_new, b_vertex=b_new,
                           A_vertex=A_new, t=state.t + dt,
                           step=state.step + 1, last_dt=dt, m1=res.m1,
                           m2=res.m2, cg_iters=int(sum(res.cg_iterations)),
                           picard_delta=float(res.picard_deltas[-1]))


def explicit_reference_step(state: SimulationState, params: MaterialParams,
                            config: StepConfig | None = None,
                            dt: float | None = None) -> SimulationState:
    """Fully explicit step with the pressure fluxes merged into MUSCL."""
    config = config or StepConfig()
    if dt is None:
        dt = compute_dt(state, params, config, explicit=True)
    if not np.isfinite(dt) or dt <= 0.0:
        raise SimulationError(f"non-positive time step dt={dt}")
    geom = state.geom
    v = cons_to_prim(state.q, params)
    q_new, _ = convective_update(v, geom, params, dt, beta=config.beta,
                                 include_pressure=True)
    rho = st.rho_of_prim(v)
    for k in range(3):
        q_new[MU1 + k] += dt * rho * params.g[k]
    q_new[EN] += dt * rho * (v[U1] * params.g[0] + v[U1 + 1] * params.g[1]
                             + v[U3] * params.g[2])

    b_new, A_new = _transport_constrained_fields(state, params, config, v,
                                                 dt)
    out = SimulationState(geom=geom, q=q_new, b_vertex=b_new,
                          A_vertex=A_new, t=state.t + dt,
                          step=state.step + 1, last_dt=dt)
    sync_cell_copies(out)
    cons_to_prim(out.q, params)
    return out


def diagnostics(state: SimulationState, params: MaterialParams) -> dict:
    """Volume-integrated and curl diagnostics of the current state."""
    geom = state.geom
    dv = geom.dx * geom.dy
    q = state.q
    rho = rho_of_cons(q)
    ek = 0.5 * (q[MU1] ** 2 + q[MU2] ** 2 + q[MU3] ** 2) / rho

    curl_b = curl_vertex_to_cell(state.b_vertex, geom)
    curl_a = np.stack([curl_vertex_to_cell(state.A_vertex[r], geom)
                       for r in range(3)])
    return {
        "step": state.step,
        "t": state.t,
        "dt": state.last_dt,
        "Ek": float(np.sum(ek) * dv),
        "curl_b_L1": float(np.sum(np.abs(curl_b)) * dv),
        "curl_b_L2": float(np.sqrt(np.sum(curl_b ** 2) * dv)),
        "curl_A_L1": float(np.sum(np.abs(curl_a)) * dv),
        "mass1": float(np.sum(q[AR1]) * dv),
        "mass2": float(np.sum(q[AR2]) * dv),
        "Etot": float(np.sum(q[EN]) * dv),
        "cg_iters": state.cg_iters,
        "picard_delta": state.picard_delta,
    }


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

_MAGIC = b"CFSS"
_VERSION = 1
_BC_CODE = {"periodic": 0, "wall": 1}
_BC_NAME = {v: k for k, v in _BC_CODE.items()}


def save_checkpoint(state: SimulationState, params: MaterialParams, path):
    """Versioned little-endian binary snapshot of a simulation state.

    Layout: magic, version, nx, ny, bc codes, step, then float64 header
    (dx, dy, origin, t, last_dt, material constants) followed by the raw
    q, b_vertex and A_vertex arrays in C order.
    """
    geom = state.geom
    head = struct.pack("<4sIqqIIq", _MAGIC, _VERSION, geom.nx, geom.ny,
                       _BC_CODE[geom.bc[0]], _BC_CODE[geom.bc[1]],
                       state.step)
    mats = (params.gamma1, params.gamma2, params.Pi1, params.Pi2,
            params.sigma, params.c_s, params.tau1, params.tau2, params.rho0,
            *params.g)
    floats = struct.pack("<18d", geom.dx, geom.dy, geom.origin[0],
                         geom.origin[1], state.t, state.last_dt, *mats)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(floats)
        for arr in (state.q, state.b_vertex, state.A_vertex):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (state, params)."""
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sIqqIIq"))
        magic, version, nx, ny, bcx, bcy, nstep = struct.unpack("<4sIqqIIq",
                                                                head)
        if magic != _MAGIC:
            raise SimulationError(f"not a checkpoint file: {path}")
        if version != _VERSION:
            raise SimulationError(f"unsupported checkpoint version "
                                  f"{version}")
        floats = struct.unpack("<18d", fh.read(18 * 8))
        (dx, dy, ox, oy, t, last_dt, g1, g2, pi1, pi2, sigma, c_s, tau1,
         tau2, rho0, gx, gy, gz) = floats
        geom = GridGeometry(nx, ny, dx, dy, (ox, oy),
                            (_BC_NAME[bcx], _BC_NAME[bcy]))
        params = MaterialParams(gamma1=g1, gamma2=g2, Pi1=pi1, Pi2=pi2,
                                sigma=sigma, c_s=c_s, tau1=tau1, tau2=tau2,
                                rho0=rho0, g=(gx, gy, gz))

        def read(shape):
            n = int(np.prod(shape))
            return np.frombuffer(fh.read(8 * n),
                                 dtype="<f8").reshape(shape).copy()

        q = read((NCOMP, nx, ny))
        b = read((3, geom.nvx, geom.nvy))
        A = read((3, 3, geom.nvx, geom.nvy))
    return SimulationState(geom=geom, q=q, b_vertex=b, A_vertex=A, t=t,
                           step=nstep, last_dt=last_dt), params
