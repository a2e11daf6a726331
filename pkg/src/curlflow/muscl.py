"""Second-order path-conservative MUSCL-Hancock convective update.

The convective subsystem transports mass, momentum and non-internal energy
and advects the volume fraction along a segment path; interface fields and
distortion rows carry zero convective flux here (they are moved by the
dedicated curl-constrained transport stage).  Pressure terms may optionally
be folded into the fluxes to obtain a fully explicit reference scheme.
"""

from __future__ import annotations

import numpy as np

from . import state as st
from . import wavespeeds as ws
from .grid import GridGeometry, PERIODIC, pad_cell, _stag_pair
from .state import (A0, AL, AR1, AR2, B0, EN, MU1, MU3, NCOMP, P, R1, R2,
                    U1, U2, U3, MaterialParams)

LIMITER_EPS = 1e-14
BIG = 1e40

# three-point Gauss-Legendre rule on [0, 1]
_GL_NODES = np.array([0.5 - np.sqrt(3.0 / 5.0) / 2.0, 0.5,
                      0.5 + np.sqrt(3.0 / 5.0) / 2.0])
_GL_WEIGHTS = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])

# bounds for the positivity-preserving slope rescale: positive densities,
# volume fraction in [0, 1]; velocities, pressure (stiffened gases admit
# negative values), interface field and distortion are unbounded
V_MIN = np.full(NCOMP, -BIG)
V_MAX = np.full(NCOMP, BIG)
V_MIN[[R1, R2, AL]] = 0.0
V_MAX[AL] = 1.0

# rows with finite bounds; all others pass through the rescale unchanged
_BOUNDED = np.array([R1, R2, AL])


def _parity(axis):
    """Mirror parities of the primitive components across a wall normal to
    the given axis: the wall-normal velocity is odd, all else even."""
    par = np.ones(NCOMP)
    par[U1 if axis == 0 else U2] = -1.0
    return par


def pad_primitives(v, geom: GridGeometry, ng=2):
    """Pad a primitive state block with ghost cells honoring parities."""
    out = np.empty((NCOMP,) + tuple(n + 2 * ng for n in v.shape[1:]))
    px, py = _parity(0), _parity(1)
    for c in range(NCOMP):
        out[c] = pad_cell(v[c], geom, ng, (px[c], py[c]))
    return out


def limited_slope(dl, dr, beta):
    """Componentwise nonlinear average of left/right differences.

    beta = 1 is minmod, beta = 3 Barth-Jespersen; the default scheme uses
    beta = 2.
    """
    e2 = LIMITER_EPS ** 2
    d2r = dr * dr
    d2l = dl * dl
    prod = dr * dl
    return (dr * np.maximum(0.0, np.minimum(beta * d2r, prod))
            / (2.0 * d2r + e2)
            + dl * np.maximum(0.0, np.minimum(beta * d2l, prod))
            / (2.0 * d2l + e2))


def positivity_rescale(slope, v):
    """Limit the slope so cell values stay inside the admissible box.

    Only the bounded rows (densities, volume fraction) are touched; the
    input slope array is modified in place and returned.
    """
    shape = (len(_BOUNDED),) + (1,) * (v.ndim - 1)
    vmin = V_MIN[_BOUNDED].reshape(shape)
    vmax = V_MAX[_BOUNDED].reshape(shape)
    s = slope[_BOUNDED]
    vb = v[_BOUNDED]
    a = np.abs(s)
    denom = 2.0 * a ** 3 + LIMITER_EPS ** 3
    phi_p = ((a + s) * (vmax - vb) + (a - s) * (vmin - vb)) * s / denom
    phi_m = ((a - s) * (vb - vmax) + (a + s) * (vb - vmin)) * s / denom
    slope[_BOUNDED] = s * np.minimum(1.0, np.minimum(phi_p, phi_m))
    return slope


def convective_flux(v, params: MaterialParams, axis, include_pressure):
    """Physical flux of the convective subsystem along one axis."""
    rho = st.rho_of_prim(v)
    u = v[U1 + axis]
    F = np.zeros_like(v)
    F[AR1] = st.clamp_alpha(v[AL]) * v[R1] * u
    F[AR2] = (1.0 - st.clamp_alpha(v[AL])) * v[R2] * u
    for k in range(3):
        F[MU1 + k] = rho * v[U1 + k] * u
    ek = 0.5 * rho * (v[U1] ** 2 + v[U2] ** 2 + v[U3] ** 2)
    es = st.shear_energy_density(st.mat_from_packed(v), rho, params.c_s)
    et = st.surface_energy_density(v[B0:B0 + 3], params.sigma)
    F[EN] = (ek + es + et) * u
    if include_pressure:
        F[MU1 + axis] += v[P]
        rho_e = st.internal_energy_from_pressure(v[P], st.clamp_alpha(v[AL]),
                                                 params)
        F[EN] += (rho_e + v[P]) * u
    return F


def _rusanov_jump(vl, vr, params: MaterialParams, include_pressure):
    """Conserved-variable jump entering the Rusanov dissipation.

    The energy row carries only the kinetic + shear + surface part, which
    keeps uniform pressure/velocity flows exactly uniform; the full energy
    jump is restored in the explicit reference scheme.
    """
    ql = st.prim_to_cons(vl, params)
    qr = st.prim_to_cons(vr, params)
    dq = qr - ql
    if not include_pressure:
        def non_internal(v):
            rho = st.rho_of_prim(v)
            return (0.5 * rho * (v[U1] ** 2 + v[U2] ** 2 + v[U3] ** 2)
                    + st.shear_energy_density(st.mat_from_packed(v), rho,
                                              params.c_s)
                    + st.surface_energy_density(v[B0:B0 + 3], params.sigma))
        dq[EN] = non_internal(vr) - non_internal(vl)
    # interface field and distortion rows are not part of this subsystem
    dq[B0:] = 0.0
    return dq


def _alpha_fluctuation(vl, vr, params: MaterialParams, axis):
    """Path-integrated nonconservative product for the alpha equation,
    shared by both sides of the face."""
    dal = vr[AL] - vl[AL]
    du = vr[U1 + axis] - vl[U1 + axis]
    rows = (R1, R2, U1 + axis, P, AL)
    out = 0.0
    for sk, wk in zip(_GL_NODES, _GL_WEIGHTS):
        r1, r2, un, p, al = ((1.0 - sk) * vl[c] + sk * vr[c] for c in rows)
        a = st.clamp_alpha(al)
        K = st.k_coefficient(r1, r2, p, a, params)
        out = out + wk * (un * dal - K * du)
    return 0.5 * out


def _is_admissible(v, params: MaterialParams):
    pmin = -min(params.Pi1, params.Pi2)
    return ((v[R1] > 0.0) & (v[R2] > 0.0)
            & (v[AL] > 0.0) & (v[AL] < 1.0)
            & (v[P] > pmin) & np.all(np.isfinite(v), axis=0))


def _evolve_face_states(vp, dvx, dvy, geom, params, dt, include_pressure):
    """Half-step predictor: limited face values evolved by dt/2.

    Operates on the padded block restricted to interior cells plus one
    ring.  Returns the four evolved face states, the evolved cell-center
    state, and the number of cells that fell back to first order.
    """
    faces_rec = {
        "W": vp - 0.5 * dvx, "E": vp + 0.5 * dvx,
        "S": vp - 0.5 * dvy, "N": vp + 0.5 * dvy,
    }
    FW = convective_flux(faces_rec["W"], params, 0, include_pressure)
    FE = convective_flux(faces_rec["E"], params, 0, include_pressure)
    FS = convective_flux(faces_rec["S"], params, 1, include_pressure)
    FN = convective_flux(faces_rec["N"], params, 1, include_pressure)
    dq = (-0.5 * dt / geom.dx * (FE - FW)
          - 0.5 * dt / geom.dy * (FN - FS))
    # center nonconservative products (alpha row only)
    a = st.clamp_alpha(vp[AL])
    K = st.k_coefficient(vp[R1], vp[R2], vp[P], a, params)
    dq[AL] -= 0.5 * dt / geom.dx * (vp[U1] * dvx[AL] - K * dvx[U1])
    dq[AL] -= 0.5 * dt / geom.dy * (vp[U2] * dvy[AL] - K * dvy[U2])

    evolved = {}
    ok = np.ones(vp.shape[1:], dtype=bool)
    for key, vrec in faces_rec.items():
        qf = st.prim_to_cons(vrec, params) + dq
        vf = st.cons_to_prim(qf, params, validate=False)
        evolved[key] = vf
        ok &= _is_admissible(vf, params)
    vc = st.cons_to_prim(st.prim_to_cons(vp, params) + dq, params,
                         validate=False)
    ok &= _is_admissible(vc, params)
    nfall = int(np.size(ok) - np.count_nonzero(ok))
    if nfall:
        # first-order fallback: freeze the cell at its volume average
        for key in evolved:
            evolved[key] = np.where(ok, evolved[key], vp)
        vc = np.where(ok, vc, vp)
    return evolved, vc, nfall


def convective_update(v, geom: GridGeometry, params: MaterialParams, dt,
                      beta=2.0, include_pressure=False,
                      include_acoustic=None):
    """One explicit convective step.

    Returns (q_star, info) where info carries the per-direction face
    states at the half step (for downstream upwinding), the evolved cell
    center state, and the first-order fallback count.
    """
    if include_acoustic is None:
        include_acoustic = include_pressure
    nx, ny = geom.nx, geom.ny
    vp = pad_primitives(v, geom, 2)

    # limited, positivity-rescaled slopes on interior + one ring
    core = vp[:, 1:-1, 1:-1]
    dvx = limited_slope(core - vp[:, :-2, 1:-1], vp[:, 2:, 1:-1] - core,
                        beta)
    dvy = limited_slope(core - vp[:, 1:-1, :-2], vp[:, 1:-1, 2:] - core,
                        beta)
    dvx = positivity_rescale(dvx, core)
    dvy = positivity_rescale(dvy, core)

    faces, vc, nfall = _evolve_face_states(core, dvx, dvy, geom, params, dt,
                                           include_pressure)

    # face Riemann states: x-face k lies between (padded-core) cells k and
    # k+1; same staggered convention as the grid operators
    nex, ney = geom.nex, geom.ney
    vxl = faces["E"][:, 0:nex, 1:ny + 1]
    vxr = faces["W"][:, 1:nex + 1, 1:ny + 1]
    vyl = faces["N"][:, 1:nx + 1, 0:ney]
    vyr = faces["S"][:, 1:nx + 1, 1:ney + 1]

    def face_flux(vl, vr, axis):
        nxa, nya = (1.0, 0.0) if axis == 0 else (0.0, 1.0)
        sl = ws.signal_speed(vl, params, nxa, nya, include_acoustic)
        sr = ws.signal_speed(vr, params, nxa, nya, include_acoustic)
        smax = np.maximum(sl, sr)
        F = 0.5 * (convective_flux(vl, params, axis, include_pressure)
                   + convective_flux(vr, params, axis, include_pressure))
        F -= 0.5 * smax * _rusanov_jump(vl, vr, params, include_pressure)
        D = _alpha_fluctuation(vl, vr, params, axis)
        return F, D

    FX, DX = face_flux(vxl, vxr, 0)
    FY, DY = face_flux(vyl, vyr, 1)

    q = st.prim_to_cons(v, params)
    lox, hix = _stag_pair(FX, -2, geom.bc[0])
    loy, hiy = _stag_pair(FY, -1, geom.bc[1])
    dlx, dhx = _stag_pair(DX, -2, geom.bc[0])
    dly, dhy = _stag_pair(DY, -1, geom.bc[1])
    q_star = q - dt / geom.dx * (hix - lox) - dt / geom.dy * (hiy - loy)
    q_star[AL] -= dt / geom.dx * (dlx + dhx) + dt / geom.dy * (dly + dhy)

    # cell-centered nonconservative products with the time-evolved center
    vcin = vc[:, 1:nx + 1, 1:ny + 1]
    a = st.clamp_alpha(vcin[AL])
    K = st.k_coefficient(vcin[R1], vcin[R2], vcin[P], a, params)
    dvx_in = dvx[:, 1:nx + 1, 1:ny + 1]
    dvy_in = dvy[:, 1:nx + 1, 1:ny + 1]
    q_star[AL] -= dt / geom.dx * (vcin[U1] * dvx_in[AL] - K * dvx_in[U1])
    q_star[AL] -= dt / geom.dy * (vcin[U2] * dvy_in[AL] - K * dvy_in[U2])

    info = {
        "x_faces": (vxl, vxr),
        "y_faces": (vyl, vyr),
        "v_center_half": vcin,
        "fallback_cells": nfall,
    }
    return q_star, info
