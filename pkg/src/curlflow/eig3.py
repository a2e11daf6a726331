"""Jacobi eigenvalue algorithm for symmetric 3x3 matrices, vectorized.

All routines accept arrays of shape (3, 3, ...) and broadcast over the
trailing axes, so a whole grid of small matrices is processed at once.
The Jacobi method is used throughout (no closed-form cubic): it is robust,
accurate, and converges in a handful of sweeps for 3x3 input.
"""

from __future__ import annotations

import numpy as np

from .state import matmul3, transpose3, inv3, det3

_PAIRS = ((0, 1), (0, 2), (1, 2))
_MAX_SWEEPS = 50


def jacobi_eig_sym3(M):
    """Eigen-decomposition M = E diag(lam) E^T of symmetric 3x3 matrices.

    Returns (lam, E) with eigenvalues sorted descending along the first axis
    and the matching eigenvectors as the columns of E. Input is symmetrized
    on entry; convergence is asserted after at most 50 cyclic sweeps.
    """
    M = np.asarray(M, dtype=float)
    tail = M.shape[2:]
    a = 0.5 * (M + np.swapaxes(M, 0, 1))
    v = np.zeros_like(a)
    v[0, 0] = v[1, 1] = v[2, 2] = 1.0

    scale = np.sqrt(np.einsum("ij...,ij...->...", a, a)) + 1e-300
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if np.all(off <= 1e-15 * scale):
            break
        for p, q in _PAIRS:
            apq = a[p, q]
            rotate = np.abs(apq) > 1e-300
            h = a[q, q] - a[p, p]
            theta = np.clip(0.5 * h / np.where(rotate, apq, 1.0),
                            -1e150, 1e150)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(1.0 + theta ** 2))
            t = np.where(np.sign(theta) == 0.0,
                         1.0 / (np.abs(theta) + np.sqrt(1.0 + theta ** 2)), t)
            t = np.where(rotate, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t ** 2)
            s = t * c
            # conjugate a by the Givens rotation in the (p, q) plane
            app, aqq = a[p, p].copy(), a[q, q].copy()
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
            r = 3 - p - q  # the remaining index
            arp, arq = a[r, p].copy(), a[r, q].copy()
            a[r, p] = c * arp - s * arq
            a[p, r] = a[r, p]
            a[r, q] = s * arp + c * arq
            a[q, r] = a[r, q]
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq

    off = np.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
    if not np.all(off <= 1e-13 * scale):
        raise FloatingPointError("Jacobi sweep failed to converge")

    lam = np.stack([a[0, 0], a[1, 1], a[2, 2]])
    order = np.argsort(-lam, axis=0)
    lam_sorted = np.take_along_axis(lam, order, axis=0)
    ev = np.take_along_axis(v, order[None, ...], axis=1)
    return lam_sorted.reshape((3,) + tail), ev


def _scaled_outer(E, s):
    """E diag(s) E^T for (3, 3, ...) eigenvector columns and (3, ...) scales."""
    out = np.empty_like(E)
    c0, c1, c2 = s[0] * E[:, 0], s[1] * E[:, 1], s[2] * E[:, 2]
    for i in range(3):
        for j in range(3):
            out[i, j] = c0[i] * E[j, 0] + c1[i] * E[j, 1] + c2[i] * E[j, 2]
    return out


def sqrtm_spd(G):
    """Symmetric positive definite square root via Jacobi eigenvectors."""
    lam, E = jacobi_eig_sym3(G)
    root = np.sqrt(np.maximum(lam, 0.0))
    return _scaled_outer(E, root)


def invsqrtm_spd(G):
    """Inverse square root of a symmetric positive definite matrix."""
    lam, E = jacobi_eig_sym3(G)
    if np.any(lam <= 0.0):
        raise ValueError("matrix is not positive definite")
    root = 1.0 / np.sqrt(lam)
    return _scaled_outer(E, root)


def polar_decompose(A):
    """Polar factorization A = R G^{1/2} with G = A^T A and det R = +1."""
    A = np.asarray(A, dtype=float)
    if np.any(det3(A) <= 0.0):
        raise ValueError("distortion matrix has nonpositive determinant")
    G = matmul3(transpose3(A), A)
    G_sqrt = sqrtm_spd(G)
    R = matmul3(A, inv3(G_sqrt))
    return R, G_sqrt
