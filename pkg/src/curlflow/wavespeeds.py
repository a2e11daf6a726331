"""Directional signal-speed estimates for the coupled hyperbolic system.

The maximum signal speed normal to a face combines three pieces:

* ``a``      -- adiabatic (Wood) mixture sound speed, set to zero when the
  acoustic subsystem is integrated implicitly;
* pressure/shear wave speeds, the square roots of the eigenvalues of a
  symmetric 3x3 matrix built from the metric tensor G = A^T A;
* the capillary wave speed, available in closed form.

All routines are vectorized over trailing grid axes.
"""

from __future__ import annotations

import numpy as np

from . import state as st
from .eig3 import jacobi_eig_sym3
from .state import B_NORM_FLOOR, MaterialParams


def capillary_speed(b, rho, nx, ny, sigma):
    """Closed-form transverse capillary wave speed for face normal (nx, ny).

    a_sigma^2 = (sigma / rho) |b| [1 - (b.n)^2 / |b|^2]; exactly zero for
    |b| below the regularization floor.
    """
    norm2 = b[0] ** 2 + b[1] ** 2 + b[2] ** 2
    norm = np.sqrt(norm2)
    active = norm >= B_NORM_FLOOR
    safe2 = np.where(active, norm2, 1.0)
    bn = b[0] * nx + b[1] * ny
    lam2 = sigma / rho * norm * (1.0 - bn ** 2 / safe2)
    return np.sqrt(np.maximum(np.where(active, lam2, 0.0), 0.0))


def _rotate_metric_to_x(G, nx, ny):
    """Conjugate G so the face normal (nx, ny) maps onto the x-axis.

    Only the two axis-aligned normals of a Cartesian grid are needed; for
    n = e_y the rotation swaps the x and y rows/columns and flips the sign
    of the off-diagonal G12 entry.
    """
    if nx == 1.0 and ny == 0.0:
        return G
    if nx == 0.0 and ny == 1.0:
        R = G.copy()
        R[0, 0], R[1, 1] = G[1, 1].copy(), G[0, 0].copy()
        R[0, 1] = -G[0, 1]
        R[1, 0] = -G[1, 0]
        R[0, 2], R[2, 0] = -G[1, 2], -G[2, 1]
        R[1, 2], R[2, 1] = -G[0, 2], -G[2, 0]
        return R
    raise ValueError("only axis-aligned face normals are supported")


def shear_acoustic_matrix_3d(G, a, c_s):
    """Symmetric matrix whose eigenvalues are the squared pressure/shear
    wave speeds for the x-direction, general 3D metric tensor."""
    g11, g12, g13 = G[0, 0], G[0, 1], G[0, 2]
    g22, g23, g33 = G[1, 1], G[1, 2], G[2, 2]
    c2 = c_s ** 2
    M = np.zeros_like(G)
    M[0, 0] = c2 * (10.0 * g11 ** 2 + 9.0 * (g12 ** 2 + g13 ** 2)
                    - 3.0 * g11 * (g22 + g33)) / 3.0 + a ** 2
    M[1, 1] = c2 * (4.0 * g12 ** 2 + 3.0 * g23 ** 2
                    + g22 * (2.0 * (g11 + g22) - g33)) / 3.0
    M[2, 2] = c2 * (4.0 * g13 ** 2 + 3.0 * g23 ** 2
                    + g33 * (2.0 * (g11 + g33) - g22)) / 3.0
    M[0, 1] = M[1, 0] = 2.0 * c2 * (3.0 * g13 * g23
                                    + g12 * (4.0 * g11 + 2.0 * g22 - g33)) / 3.0
    M[0, 2] = M[2, 0] = 2.0 * c2 * (3.0 * g12 * g23
                                    + g13 * (4.0 * g11 + 2.0 * g33 - g22)) / 3.0
    M[1, 2] = M[2, 1] = 2.0 * c2 * (2.0 * g12 * g13
                                    + g23 * (g11 + g22 + g33)) / 3.0
    return M


def pressure_shear_speed(G, a, c_s):
    """Largest pressure/shear wave speed for the x-direction, using the
    closed-form eigenvalues of the planar (G13 = G23 = 0) matrix."""
    g11, g12, g22, g33 = G[0, 0], G[0, 1], G[1, 1], G[2, 2]
    trG = g11 + g22 + g33
    c2 = c_s ** 2
    m11 = c2 * (4.0 * g11 ** 2
                + 9.0 * (g12 ** 2 + g11 * (g11 - trG / 3.0))) / 3.0 + a ** 2
    m22 = c2 * (g22 * (2.0 * trG - 3.0 * g33) + 4.0 * g12 ** 2) / 3.0
    m33 = c2 * g33 * (2.0 * trG - 3.0 * g22) / 3.0
    m12 = 2.0 * c2 * g12 * (4.0 * g11 + 2.0 * g22 - g33) / 3.0
    m4 = 0.5 * (m11 + m22)
    m5 = np.sqrt(np.maximum(m4 ** 2 + m12 ** 2 - m11 * m22, 0.0))
    lam2 = np.maximum(m4 + m5, m33)
    return np.sqrt(np.maximum(lam2, 0.0))


def pressure_shear_speed_jacobi(G, a, c_s):
    """Reference pressure/shear speed from the full 3D matrix eigenvalues."""
    M = shear_acoustic_matrix_3d(G, a, c_s)
    w, _ = jacobi_eig_sym3(M)
    return np.sqrt(np.maximum(w[0], 0.0))


def signal_speed(v, params: MaterialParams, nx, ny, include_acoustic):
    """Per-cell |u.n| + sqrt(lambda_ps^2 + lambda_t^2) for primitives v."""
    rho = st.rho_of_prim(v)
    if include_acoustic:
        _, _, a = st.sound_speeds(v[st.R1], v[st.R2], v[st.P], v[st.AL],
                                  params)
    else:
        a = np.zeros_like(rho)
    if params.c_s == 0.0:
        lam_ps = np.abs(a)
    else:
        G = st.metric_tensor(st.mat_from_packed(v))
        Gx = _rotate_metric_to_x(G, nx, ny)
        lam_ps = pressure_shear_speed(Gx, a, params.c_s)
    lam_t = capillary_speed(v[st.B0:st.B0 + 3], rho, nx, ny, params.sigma)
    lam = np.sqrt(lam_ps ** 2 + lam_t ** 2)
    un = v[st.U1] * nx + v[st.U2] * ny
    return np.abs(un) + lam


def max_signal_speed(states, params: MaterialParams, nx, ny,
                     include_acoustic=False):
    """Maximum of |u.n| + lambda over a collection of primitive states."""
    smax = 0.0
    for v in states:
        smax = max(smax, float(np.max(signal_speed(v, params, nx, ny,
                                                   include_acoustic))))
    return smax
