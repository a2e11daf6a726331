"""State vectors, mixture equation of state, stress tensors and conversions.

Both the primitive and the conserved state carry 19 components; vectors and
tensors keep all three spatial components even though the solver is 2D.

Packed component layout (leading axis of a ``(19, ...)`` array):

primitive  V: rho1, rho2, u1, u2, u3, p, alpha1, b1, b2, b3, A11..A33
conserved  Q: alpha1*rho1, alpha2*rho2, rho*u1, rho*u2, rho*u3, rho*E,
              alpha1, b1, b2, b3, A11..A33

All functions broadcast over arbitrary trailing (grid) axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NCOMP = 19

# primitive component indices
R1, R2, U1, U2, U3, P, AL = 0, 1, 2, 3, 4, 5, 6
B0 = 7          # b occupies components 7:10
A0 = 10         # A occupies components 10:19, row-major

# conserved component indices (shared slots marked where they differ)
AR1, AR2, MU1, MU2, MU3, EN = 0, 1, 2, 3, 4, 5

ALPHA_MIN = 1e-12
B_NORM_FLOOR = 1e-14


class StateError(ValueError):
    """Raised when a state fails its physical validity requirements."""


@dataclass(frozen=True)
class MaterialParams:
    """Fluid pair and interface/shear model constants."""

    gamma1: float = 1.4
    gamma2: float = 1.4
    Pi1: float = 0.0
    Pi2: float = 0.0
    sigma: float = 0.0
    c_s: float = 0.0
    tau1: float = 1e20
    tau2: float = 1e20
    rho0: float = 1.0
    g: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (self.gamma1 > 1.0 and self.gamma2 > 1.0):
            raise ValueError("adiabatic exponents must exceed 1")
        if not (self.tau1 > 0.0 and self.tau2 > 0.0):
            raise ValueError("relaxation times must be positive")
        if self.sigma < 0.0 or self.c_s < 0.0:
            raise ValueError("sigma and c_s must be nonnegative")


def clamp_alpha(alpha):
    return np.clip(alpha, ALPHA_MIN, 1.0 - ALPHA_MIN)


def mixture_tau(alpha1, params: MaterialParams):
    """Logarithmic interpolation tau1^alpha1 * tau2^(1-alpha1)."""
    a = clamp_alpha(alpha1)
    return params.tau1 ** a * params.tau2 ** (1.0 - a)


# ---------------------------------------------------------------------------
# small dense-tensor helpers operating on (3, ...) and (3, 3, ...) arrays
# ---------------------------------------------------------------------------

def mat_from_packed(w):
    """View components w[A0:A0+9] of a packed state as a (3, 3, ...) matrix."""
    return w[A0:A0 + 9].reshape((3, 3) + w.shape[1:])


def matmul3(a, b):
    """Matrix product of two (3, 3, ...) arrays (unrolled: for the small
    fixed 3x3 head this is several times faster than einsum/matmul)."""
    tail = np.broadcast(a[0, 0], b[0, 0]).shape
    out = np.empty((3, 3) + tail, dtype=np.result_type(a, b))
    for i in range(3):
        ai0, ai1, ai2 = a[i, 0], a[i, 1], a[i, 2]
        for j in range(3):
            out[i, j] = ai0 * b[0, j] + ai1 * b[1, j] + ai2 * b[2, j]
    return out


def transpose3(a):
    return np.swapaxes(a, 0, 1)


def trace3(a):
    return a[0, 0] + a[1, 1] + a[2, 2]


def det3(a):
    return (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))


def inv3(a):
    """Inverse of a (3, 3, ...) array via the adjugate formula."""
    det = det3(a)
    out = np.empty_like(a)
    out[0, 0] = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    out[0, 1] = a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]
    out[0, 2] = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    out[1, 0] = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    out[1, 1] = a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
    out[1, 2] = a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]
    out[2, 0] = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    out[2, 1] = a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]
    out[2, 2] = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return out / det


def dev3(a):
    """Deviatoric (trace-free) part of a (3, 3, ...) array."""
    out = a.copy()
    third = trace3(a) / 3.0
    out[0, 0] -= third
    out[1, 1] -= third
    out[2, 2] -= third
    return out


def identity3(shape=()):
    out = np.zeros((3, 3) + tuple(shape))
    out[0, 0] = out[1, 1] = out[2, 2] = 1.0
    return out


def frobenius2(a):
    """Squared Frobenius norm over the two leading matrix axes."""
    return np.einsum("ij...,ij...->...", a, a)


def metric_tensor(A):
    """G = A^T A for a (3, 3, ...) distortion array."""
    return matmul3(transpose3(A), A)


# ---------------------------------------------------------------------------
# equation of state
# ---------------------------------------------------------------------------

def eos_affine_coeffs(alpha1, params: MaterialParams):
    """Coefficients (k0, k1) of the mixture internal energy rho*e = k0 + k1*p.

    Each stiffened-gas phase contributes alpha_k (p + gamma_k Pi_k)/(gamma_k-1),
    so at fixed volume fraction the mixture energy is affine in pressure.
    """
    a1 = clamp_alpha(alpha1)
    a2 = 1.0 - a1
    g1, g2 = params.gamma1, params.gamma2
    k0 = a1 * g1 * params.Pi1 / (g1 - 1.0) + a2 * g2 * params.Pi2 / (g2 - 1.0)
    k1 = a1 / (g1 - 1.0) + a2 / (g2 - 1.0)
    return k0, k1


def mixture_pressure(rho_e, alpha1, params: MaterialParams):
    k0, k1 = eos_affine_coeffs(alpha1, params)
    return (rho_e - k0) / k1


def internal_energy_from_pressure(p, alpha1, params: MaterialParams):
    k0, k1 = eos_affine_coeffs(alpha1, params)
    return k0 + k1 * p


def sound_speeds(rho1, rho2, p, alpha1, params: MaterialParams):
    """Phase sound speeds and the Wood mixture speed (a1, a2, a_wood)."""
    if np.any(p + params.Pi1 <= 0.0) or np.any(p + params.Pi2 <= 0.0):
        raise StateError("pressure below stiffened-gas vacuum threshold")
    a1sq = params.gamma1 * (p + params.Pi1) / rho1
    a2sq = params.gamma2 * (p + params.Pi2) / rho2
    al = clamp_alpha(alpha1)
    rho = al * rho1 + (1.0 - al) * rho2
    woodsq = (rho1 * a1sq * rho2 * a2sq
              / (rho * (al * rho2 * a2sq + (1.0 - al) * rho1 * a1sq)))
    return np.sqrt(a1sq), np.sqrt(a2sq), np.sqrt(woodsq)


def k_coefficient(rho1, rho2, p, alpha1, params: MaterialParams):
    """Compaction coefficient K in the volume-fraction equation."""
    a1sq = params.gamma1 * (p + params.Pi1) / rho1
    a2sq = params.gamma2 * (p + params.Pi2) / rho2
    al = clamp_alpha(alpha1)
    c1, c2 = rho1 * a1sq, rho2 * a2sq
    return al * (1.0 - al) * (c2 - c1) / (al * c2 + (1.0 - al) * c1)


# ---------------------------------------------------------------------------
# stresses and energies
# ---------------------------------------------------------------------------

def capillary_stress(b, sigma):
    """Capillary stress -sigma*|b| (b x b / |b|^2 - I); (3, 3, ...) output.

    Exactly zero wherever |b| falls below the regularization floor.
    """
    if sigma == 0.0:
        return np.zeros((3, 3) + np.shape(b[0]))
    norm = np.sqrt(b[0] ** 2 + b[1] ** 2 + b[2] ** 2)
    active = norm >= B_NORM_FLOOR
    safe = np.where(active, norm, 1.0)
    out = np.einsum("i...,j...->ij...", b, b) * (-sigma / safe)
    for k in range(3):
        out[k, k] += sigma * norm
    return np.where(active, out, 0.0)


def shear_stress(A, rho, c_s):
    """Elastic/viscous stress -rho c_s^2 G devG with G = A^T A."""
    if c_s == 0.0:
        return np.zeros((3, 3) + np.shape(rho))
    G = metric_tensor(A)
    return matmul3(G, dev3(G)) * (-(c_s ** 2) * rho)


def shear_energy_density(A, rho, c_s):
    """rho * e_s = rho c_s^2 tr(devG devG) / 4."""
    if c_s == 0.0:
        return np.zeros(np.shape(rho))
    G = metric_tensor(A)
    # tr(devG devG) = tr(G G) - tr(G)^2 / 3
    tr = G[0, 0] + G[1, 1] + G[2, 2]
    tr2 = frobenius2(G) - tr * tr / 3.0
    return 0.25 * rho * c_s ** 2 * tr2


def surface_energy_density(b, sigma):
    """rho * e_t = sigma * |b|."""
    if sigma == 0.0:
        return np.zeros(np.shape(b[0]))
    return sigma * np.sqrt(b[0] ** 2 + b[1] ** 2 + b[2] ** 2)


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------

def prim_to_cons(v, params: MaterialParams):
    """Primitive (19, ...) -> conserved (19, ...)."""
    if not np.all(np.isfinite(v)):
        raise StateError("non-finite primitive state")
    alpha1 = clamp_alpha(v[AL])
    rho = alpha1 * v[R1] + (1.0 - alpha1) * v[R2]
    q = np.array(v, dtype=float, copy=True)
    q[AR1] = alpha1 * v[R1]
    q[AR2] = (1.0 - alpha1) * v[R2]
    q[MU1:MU3 + 1] = rho * v[U1:U3 + 1]
    rho_e = internal_energy_from_pressure(v[P], alpha1, params)
    ekin = 0.5 * rho * (v[U1] ** 2 + v[U2] ** 2 + v[U3] ** 2)
    q[EN] = (rho_e + ekin
             + shear_energy_density(mat_from_packed(v), rho, params.c_s)
             + surface_energy_density(v[B0:B0 + 3], params.sigma))
    q[AL] = alpha1
    return q


def cons_to_prim(q, params: MaterialParams, validate: bool = True):
    """Conserved (19, ...) -> primitive (19, ...)."""
    rho = q[AR1] + q[AR2]
    alpha1 = clamp_alpha(q[AL])
    if validate:
        bad = ~((q[AR1] > 0.0) & (q[AR2] > 0.0) & np.isfinite(rho)
                & (q[AL] > 0.0) & (q[AL] < 1.0))
        if np.any(bad):
            cell = np.argwhere(np.atleast_1d(bad))[0]
            raise StateError(f"invalid conserved state at cell {tuple(cell)}: "
                             f"rho or alpha out of range")
    v = np.array(q, dtype=float, copy=True)
    v[R1] = q[AR1] / alpha1
    v[R2] = q[AR2] / (1.0 - alpha1)
    v[U1:U3 + 1] = q[MU1:MU3 + 1] / rho
    ekin = 0.5 * (q[MU1] ** 2 + q[MU2] ** 2 + q[MU3] ** 2) / rho
    rho_e = (q[EN] - ekin
             - shear_energy_density(mat_from_packed(q), rho, params.c_s)
             - surface_energy_density(q[B0:B0 + 3], params.sigma))
    v[P] = mixture_pressure(rho_e, alpha1, params)
    v[AL] = alpha1
    if validate:
        pmin = -min(params.Pi1, params.Pi2)
        bad = ~(v[P] > pmin)
        if np.any(bad):
            cell = np.argwhere(np.atleast_1d(bad))[0]
            raise StateError(f"recovered pressure out of range at cell "
                             f"{tuple(cell)}")
    return v


def rho_of_prim(v):
    a = clamp_alpha(v[AL])
    return a * v[R1] + (1.0 - a) * v[R2]


def rho_of_cons(q):
    return q[AR1] + q[AR2]
