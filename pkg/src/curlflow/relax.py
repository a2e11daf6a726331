"""Semi-analytic integration of the stiff strain-relaxation source.

The metric tensor obeys, per cell and with a frozen convective forcing L*,

    dG/dt = L* - (6 / tau) (det G)^(5/6) G devG,

where tau may range from 1e-14 (inviscid fluid) to 1e20 (elastic solid).
Rather than brute-force stiff integration, each substep picks one of four
closed-form or fixed-point approximations of the ODE depending on the
local regime, then rescales det G onto a blended solid/fluid target so the
compatibility constraint det G = (rho / rho0)^2 is never lost.

All kernels are vectorized over trailing cell axes; the adaptive substep
driver falls back to per-cell stepping only for cells that reject the full
step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eig3 import invsqrtm_spd, jacobi_eig_sym3, sqrtm_spd
from .state import (det3, dev3, frobenius2, identity3, inv3, matmul3,
                    trace3, transpose3)

EULER_SWITCH = 1e-8        # dt/tau below which exact exponentials cancel badly
SOLID_BLEND_FLOOR = 1e-14  # denominator floor in the solid/fluid indicator
FP_TOL = 1e-10             # midpoint fixed-point stopping threshold
EQ_TOL = 1e-12             # equilibrium fixed-point relative tolerance
EQ_MAX_ITER = 200
MIN_SUBSTEP_FRACTION = 1e-6

BRANCH_EULER = "euler"
BRANCH_EQUILIBRIUM = "equilibrium"
BRANCH_SMALL_DEV = "small-dev"
BRANCH_PRINCIPAL = "principal"
BRANCH_NOOP = "no-op"


def linear_relax_exact(J_n, P_star, dt, tau):
    """Exact solution of dJ/dt = P* - J/tau over one step.

    Falls back to explicit Euler when dt/tau is so small that the
    exponential form loses accuracy to cancellation.
    """
    J_n = np.asarray(J_n, dtype=float)
    P_star = np.asarray(P_star, dtype=float)
    if dt / tau < EULER_SWITCH:
        return J_n + dt * (P_star - J_n / tau)
    return (J_n - tau * P_star) * np.exp(-dt / tau) + tau * P_star


def strain_source(G, tau):
    """Right-hand side source -(6/tau)(det G)^(5/6) G devG."""
    k = 6.0 * det3(G) ** (5.0 / 6.0) / tau
    return -k * matmul3(G, dev3(G))


def rk4_oracle(G_n, L_star, tau, dt, n_sub):
    """Brute-force classical RK4 reference integration (tests only)."""
    G = np.array(G_n, dtype=float, copy=True)
    h = dt / n_sub

    def f(G):
        return L_star + strain_source(G, tau)

    for _ in range(n_sub):
        k1 = f(G)
        k2 = f(G + 0.5 * h * k1)
        k3 = f(G + 0.5 * h * k2)
        k4 = f(G + h * k3)
        G = G + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return G


def _phi(x):
    """(1 - exp(-x)) / x, stable for small and vanishing x.

    Arguments are clipped at -700 so that strongly growing frozen modes
    produce large finite values (rejected later by the accuracy control)
    instead of overflowing.
    """
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0.0, 1.0, np.maximum(x, -700.0))
    return np.where(x == 0.0, 1.0, -np.expm1(-safe) / safe)


def approach1_small_dev(G_m, L_star, k, dt_sub, fp_passes=2,
                        fp_max_passes=10):
    """Exponential solution for G close to a spherical tensor.

    The deviator and trace are frozen per pass and refreshed at the
    interval midpoint by a short fixed-point iteration.
    """
    trG = trace3(G_m)
    devG = dev3(G_m)
    G_new = G_m
    for it in range(fp_max_passes):
        a = k * trG / 3.0
        S = (L_star + k * (trG / 3.0) ** 2 * identity3(G_m.shape[2:])
             - k * matmul3(devG, devG))
        prev = G_new
        G_new = np.exp(-a * dt_sub) * G_m + dt_sub * _phi(a * dt_sub) * S
        Gmid = 0.5 * (G_m + G_new)
        trG = trace3(Gmid)
        devG = dev3(Gmid)
        if it >= fp_passes - 1:
            change = np.max(np.abs(G_new - prev))
            if change <= FP_TOL * max(float(np.max(np.abs(G_new))), 1e-300):
                break
    return G_new


def approach2_principal(G_m, L_star, k, dt_sub, fp_passes=2,
                        fp_max_passes=10):
    """Exact solution of dG/dt = L* - k devG G with devG frozen, solved in
    the principal frame of G_m where it decouples row by row."""
    w, E = jacobi_eig_sym3(G_m)
    Et = np.swapaxes(E, 0, 1)
    Gh = matmul3(Et, matmul3(G_m, E))
    Lh = matmul3(Et, matmul3(L_star, E))
    d = w - trace3(G_m)[None] / 3.0  # diagonal of dev(G hat)
    Gh_new = Gh
    for it in range(fp_max_passes):
        x = (k * d * dt_sub)[:, None]
        rate = Lh - (k * d)[:, None] * Gh
        prev = Gh_new
        Gh_new = Gh + dt_sub * _phi(x) * rate
        mid = 0.5 * (Gh + Gh_new)
        dmid = np.einsum("ii...->i...", mid)
        d = dmid - np.sum(dmid, axis=0) / 3.0
        if it >= fp_passes - 1:
            change = np.max(np.abs(Gh_new - prev))
            if change <= FP_TOL * max(float(np.max(np.abs(Gh_new))), 1e-300):
                break
    out = matmul3(E, matmul3(Gh_new, Et))
    return 0.5 * (out + np.swapaxes(out, 0, 1))


def approach3_equilibrium(G_seed, L_star, tau, D, max_iter=EQ_MAX_ITER):
    """Fixed-point iteration onto the balanced (Navier-Stokes limit) state
    where the forcing and the relaxation source cancel.

    Returns (G, converged_mask).
    """
    G = np.array(G_seed, dtype=float, copy=True)
    converged = np.zeros(G.shape[2:], dtype=bool)
    for _ in range(max_iter):
        Gt = (tau * dev3(matmul3(inv3(G), L_star))
              / (6.0 * det3(G) ** (5.0 / 6.0))
              + trace3(G) / 3.0 * identity3(G.shape[2:]))
        G_next = Gt * (D / det3(Gt)) ** (1.0 / 3.0)
        delta = np.max(np.abs(G_next - G), axis=(0, 1))
        scale = np.maximum(np.max(np.abs(G_next), axis=(0, 1)), 1e-300)
        converged = delta <= EQ_TOL * scale
        G = G_next
        if np.all(converged):
            break
    return G, converged


def equilibrium_seed(G_m, L_star, tau, D):
    Gt = (identity3(G_m.shape[2:])
          + tau / (6.0 * det3(G_m) ** (5.0 / 6.0)) * dev3(L_star))
    return Gt * (D / det3(Gt)) ** (1.0 / 3.0)


def determinant_target(G_m, G_n, G_star, L_star, tau, elapsed, dt_total,
                       det_target_end=None):
    """Blended solid/fluid determinant target at local time t^n + elapsed.

    Returns (D, beta_s).  The solid path follows the linear segment from
    G_n along L*; the fluid path interpolates the determinant between its
    endpoint values.
    """
    source = strain_source(G_m, tau)
    beta = np.minimum(1.0, frobenius2(L_star)
                      / (frobenius2(source) + SOLID_BLEND_FLOOR)) ** 4
    D_s = det3(G_n + elapsed * L_star)
    det_end = det3(G_star) if det_target_end is None else det_target_end
    D_f = det3(G_n) + elapsed / dt_total * (det_end - det3(G_n))
    return beta * D_s + (1.0 - beta) * D_f, beta


@dataclass
class RelaxResult:
    G_out: np.ndarray
    A_out: np.ndarray
    substeps_used: int
    branch_trace: list = field(default_factory=list)


def _euler_step(G_m, L_star, tau, dt_sub):
    return G_m + dt_sub * (L_star + strain_source(G_m, tau))


def _select_branches(G_m, L_star, tau, dt_sub, beta_s):
    """Branch masks per the regime selection rules.  Returns a dict of
    boolean masks covering all cells exactly once."""
    k = 6.0 * det3(G_m) ** (5.0 / 6.0) / tau
    devG = dev3(G_m)
    # The blend indicator alone misreads a fully relaxed state as non-stiff
    # (the source norm vanishes at equilibrium), so explicit Euler is only
    # taken when the step also sits inside its stability region for the
    # deviator modes, whose rate constant is k tr(G)/3.
    euler = (beta_s > 1.0 - 1e-14) & (dt_sub * k * trace3(G_m) / 3.0 <= 2.0)

    # Stiffness indicator evaluated in the principal frame of G_m, where
    # the relaxation part k*devG is diagonal: off-diagonal entries then
    # measure only the misalignment of the forcing, so a strongly stiff
    # source is detected regardless of the orientation of the deviator.
    w, E = jacobi_eig_sym3(G_m)
    Lh = matmul3(transpose3(E), matmul3(matmul3(inv3(G_m), L_star), E))
    dhat_dev = w - trace3(G_m)[None] / 3.0
    Lam = np.abs(Lh)
    Lam[0, 0] = np.abs(Lh[0, 0] - k * dhat_dev[0])
    Lam[1, 1] = np.abs(Lh[1, 1] - k * dhat_dev[1])
    Lam[2, 2] = np.abs(Lh[2, 2] - k * dhat_dev[2])
    trL = trace3(Lam)
    off = np.sum(Lam, axis=(0, 1)) - trL
    noop = ~euler & (trL == 0.0)
    equil = ~euler & ~noop & (off < trL / 5.0) & (dt_sub > tau)

    small_norm = np.sqrt(frobenius2(devG)) < det3(G_m) ** (1.0 / 3.0) / 5.0
    dhat = dhat_dev
    tiny_entry = np.any(np.abs(dhat) < trace3(G_m)[None] / 1000.0, axis=0)
    small = ~euler & ~noop & ~equil & (small_norm | tiny_entry)

    principal = ~(euler | noop | equil | small)
    return {BRANCH_EULER: euler, BRANCH_NOOP: noop,
            BRANCH_EQUILIBRIUM: equil, BRANCH_SMALL_DEV: small,
            BRANCH_PRINCIPAL: principal}, k


def _advance_substep(G_m, G_n, G_star, L_star, tau, t_local, dt_sub,
                     dt_total, det_target_end=None):
    """One substep on a batch of cells.  Returns (G_next, ok, branches)."""
    # Guard against garbage states handed in by a rejected earlier half
    # step: park those cells on the identity so the eigensolver and the
    # fractional powers stay well posed, and mark them invalid.
    with np.errstate(over="ignore", invalid="ignore"):
        good_in = (np.all(np.isfinite(G_m), axis=(0, 1))
                   & (np.max(np.abs(G_m), axis=(0, 1)) < 1e100)
                   & (det3(np.where(np.isfinite(G_m), G_m, 0.0)) > 0.0))
    if not np.all(good_in):
        G_m = np.where(good_in, G_m, identity3(G_m.shape[2:]))
    D, beta_s = determinant_target(G_m, G_n, G_star, L_star, tau,
                                   t_local + dt_sub, dt_total,
                                   det_target_end)
    masks, k = _select_branches(G_m, L_star, tau, dt_sub, beta_s)
    G_next = np.array(G_m, copy=True)
    ok = good_in.copy()

    def sub(mask):
        return (G_m[:, :, mask], L_star[:, :, mask],
                tau[mask] if np.ndim(tau) else tau,
                k[mask], D[mask])

    for name, mask in masks.items():
        if not np.any(mask):
            continue
        Gs, Ls, ts, ks, Ds = sub(mask)
        if name == BRANCH_EULER:
            out = _euler_step(Gs, Ls, ts, dt_sub)
        elif name == BRANCH_NOOP:
            out = Gs
        elif name == BRANCH_EQUILIBRIUM:
            seed = equilibrium_seed(Gs, Ls, ts, Ds)
            out, conv = approach3_equilibrium(seed, Ls, ts, Ds)
            ok[mask] &= conv
        elif name == BRANCH_SMALL_DEV:
            out = approach1_small_dev(Gs, Ls, ks, dt_sub)
        else:
            out = approach2_principal(Gs, Ls, ks, dt_sub)
        G_next[:, :, mask] = out

    # enforce the determinant constraint, then validate the result
    detG = det3(G_next)
    ok &= np.isfinite(detG) & (detG > 0.0) & (D > 0.0) & \
        np.all(np.isfinite(G_next), axis=(0, 1))
    safe_det = np.where(ok, detG, 1.0)
    safe_D = np.where(ok, np.maximum(D, 1e-300), 1.0)
    G_next = G_next * (safe_D / safe_det) ** (1.0 / 3.0)
    # positive definiteness via leading principal minors
    Gc = np.where(ok, G_next, identity3(G_next.shape[2:]))
    ok &= ((Gc[0, 0] > 0.0)
           & (Gc[0, 0] * Gc[1, 1] - Gc[0, 1] * Gc[1, 0] > 0.0)
           & (det3(Gc) > 0.0))
    branches = np.zeros(G_m.shape[2:], dtype=np.int8)
    for i, mask in enumerate(masks.values()):
        branches[mask] = i
    return G_next, ok, branches


BRANCH_NAMES = [BRANCH_EULER, BRANCH_NOOP, BRANCH_EQUILIBRIUM,
                BRANCH_SMALL_DEV, BRANCH_PRINCIPAL]

STEP_RTOL = 1e-4  # step-doubling relative accuracy target per substep


def _attempt_substep(G_m, G_n, G_star, L_star, tau, t_local, dt_sub,
                     dt_total, det_target_end=None):
    """Advance by dt_sub with step-doubling error control.

    The substep is computed once whole and once as two chained halves;
    cells where the two disagree beyond STEP_RTOL (or where either attempt
    is invalid) are flagged for refinement.  Returns the two-half-step
    result, the acceptance mask, and the branch ids.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        G1, ok1, branch = _advance_substep(
            G_m, G_n, G_star, L_star, tau, t_local, dt_sub, dt_total,
            det_target_end)
        Gh, okh, _ = _advance_substep(
            G_m, G_n, G_star, L_star, tau, t_local, 0.5 * dt_sub, dt_total,
            det_target_end)
        G2, ok2, _ = _advance_substep(
            Gh, G_n, G_star, L_star, tau, t_local + 0.5 * dt_sub,
            0.5 * dt_sub, dt_total, det_target_end)
        err = np.max(np.abs(G1 - G2), axis=(0, 1))
        scale = np.maximum(np.max(np.abs(G2), axis=(0, 1)), 1e-300)
        ok = ok1 & okh & ok2 & (err <= STEP_RTOL * scale)
    return G2, ok, branch


def _integrate_cell_adaptive(G_n, G_star, L_star, tau, dt,
                             det_target_end=None):
    """Adaptive-substep fallback for a single cell (trailing shape (1,))."""
    t = 0.0
    dt_sub = 0.5 * dt
    G = np.array(G_n, copy=True)
    successes = 0
    trace = []
    nsub = 0
    while t < dt * (1.0 - 1e-14):
        dt_sub = min(dt_sub, dt - t)
        if dt_sub < MIN_SUBSTEP_FRACTION * dt:
            raise RuntimeError(
                f"strain relaxation substep underflow; branch trace: {trace}")
        G_next, ok, branch = _attempt_substep(
            G, G_n, G_star, L_star, tau, t, dt_sub, dt, det_target_end)
        nsub += 1
        if bool(ok[0]):
            G = G_next
            t += dt_sub
            trace.append(BRANCH_NAMES[int(branch[0])])
            successes += 1
            if successes >= 2:
                dt_sub = min(2.0 * dt_sub, dt)
                successes = 0
        else:
            dt_sub *= 0.5
            successes = 0
    return G, nsub, trace


def integrate(A_n, A_star, dt, tau, det_target_end=None):
    """Relax the distortion over one global step of size dt.

    A_n and A_star are (3, 3, ...) distortion fields before and after the
    transport stage; tau is a scalar or per-cell mixture relaxation time.
    The result recombines the relaxed metric with the transported rotation
    as A_out = R* G_out^(1/2), R* = A* (G*)^(-1/2).
    """
    A_n = np.asarray(A_n, dtype=float)
    A_star = np.asarray(A_star, dtype=float)
    cell_shape = A_n.shape[2:]
    flatten = A_n.ndim > 3 or A_n.ndim == 2
    if A_n.ndim == 2:
        A_n = A_n[..., None]
        A_star = A_star[..., None]
    if A_n.ndim > 3:
        A_n = A_n.reshape(3, 3, -1)
        A_star = A_star.reshape(3, 3, -1)
    if np.ndim(tau):
        tau_arr = np.asarray(tau, dtype=float).reshape(-1)
    else:
        tau_arr = float(tau)
    if det_target_end is not None and np.ndim(det_target_end):
        det_target_end = np.asarray(det_target_end, dtype=float).reshape(-1)

    G_n = matmul3(np.swapaxes(A_n, 0, 1), A_n)
    G_star = matmul3(np.swapaxes(A_star, 0, 1), A_star)
    L_star = (G_star - G_n) / dt

    G_out, ok, branch = _attempt_substep(G_n, G_n, G_star, L_star, tau_arr,
                                         0.0, dt, dt, det_target_end)
    trace = [BRANCH_NAMES[i] for i in sorted(set(branch.ravel().tolist()))]
    substeps = 1

    # batched refinement: retry all rejected cells together on uniformly
    # subdivided steps, doubling the subdivision until they pass
    nsub = 2
    while not np.all(ok) and nsub <= 1024:
        idx = np.argwhere(~ok)[:, 0]
        ti = tau_arr[idx] if np.ndim(tau_arr) else tau_arr
        de = (det_target_end[idx]
              if det_target_end is not None and np.ndim(det_target_end)
              else det_target_end)
        Gs = G_n[:, :, idx]
        G = np.array(Gs, copy=True)
        ok_b = np.ones(idx.size, dtype=bool)
        h = dt / nsub
        for m in range(nsub):
            G, ok_s, branch_b = _attempt_substep(
                G, Gs, G_star[:, :, idx], L_star[:, :, idx], ti, m * h, h,
                dt, de)
            ok_b &= ok_s
        passed = idx[ok_b]
        if passed.size:
            G_out[:, :, passed] = G[:, :, ok_b]
            ok[passed] = True
            substeps = max(substeps, nsub)
            trace.extend(BRANCH_NAMES[i]
                         for i in sorted(set(branch_b[ok_b].tolist()))
                         if BRANCH_NAMES[i] not in trace)
        nsub *= 2

    if not np.all(ok):
        for idx in np.argwhere(~ok)[:, 0]:
            sl = slice(idx, idx + 1)
            ti = tau_arr[sl] if np.ndim(tau_arr) else tau_arr
            de = (det_target_end[sl]
                  if det_target_end is not None
                  and np.ndim(det_target_end) else det_target_end)
            Gc, nsub, tr = _integrate_cell_adaptive(
                G_n[:, :, sl], G_star[:, :, sl], L_star[:, :, sl], ti, dt,
                de)
            G_out[:, :, sl] = Gc
            substeps = max(substeps, nsub)
            trace.extend(t for t in tr if t not in trace)

    R_star = matmul3(A_star, invsqrtm_spd(G_star))
    A_out = matmul3(R_star, sqrtm_spd(G_out))
    if flatten:
        A_out = A_out.reshape((3, 3) + cell_shape)
        G_out = G_out.reshape((3, 3) + cell_shape)
    return RelaxResult(G_out=G_out, A_out=A_out, substeps_used=substeps,
                       branch_trace=trace)
