"""Initial-condition library for the bundled test cases.

Each ``init_*`` routine maps a grid geometry (plus optional physical
parameters) to a fully initialized :class:`~curlflow.stepper.SimulationState`;
the companion ``*_params`` routines hold the matching material constants.
``build_case`` ties both together from a flat configuration dictionary so
the command line can drive every case uniformly.

Conventions shared by all cases:

* the interface field b is only ever initialized as a discrete gradient of
  a scalar colour function, so its vertex curl vanishes to rounding;
* the distortion field starts from the identity (a stress-free reference
  configuration); pure-fluid cases keep it inert by setting c_s = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .grid import GridGeometry, corner_interp, grad_cell_to_vertex
from .state import (A0, AL, B0, NCOMP, P, R1, R2, U1, U2, MaterialParams,
                    prim_to_cons)
from .stepper import SimulationState, StepConfig, sync_cell_copies

__all__ = [
    "CaseSpec", "CASES", "build_case", "init_abgrall", "init_stokes",
    "init_double_shear", "init_riemann", "init_explosion",
    "init_rayleigh_taylor", "init_droplet", "stokes_reference",
]


@dataclass
class CaseSpec:
    """A runnable case: geometry, material constants, initial state."""

    name: str
    geom: GridGeometry
    params: MaterialParams
    state: SimulationState
    t_end: float
    output_every: int = 100
    options: dict = field(default_factory=dict)


def _blank_primitives(geom):
    v = np.zeros((NCOMP, geom.nx, geom.ny))
    for k in range(3):
        v[A0 + 4 * k] = 1.0
    return v


def _make_state(v, geom, params, b_vertex=None):
    b = (np.zeros((3, geom.nvx, geom.nvy)) if b_vertex is None
         else np.asarray(b_vertex, dtype=float))
    A = np.zeros((3, 3, geom.nvx, geom.nvy))
    for k in range(3):
        A[k, k] = 1.0
    # the cell copies of b must enter the primitive state before the
    # energy is assembled, or the surface-energy share of rho E is lost
    v = v.copy()
    v[B0:B0 + 3] = corner_interp(b, None, geom)
    state = SimulationState(geom=geom, q=prim_to_cons(v, params),
                            b_vertex=b, A_vertex=A)
    return sync_cell_copies(state)


# ---------------------------------------------------------------------------
# uniform-flow interface advection (circular jump)
# ---------------------------------------------------------------------------

def abgrall_params(**over) -> MaterialParams:
    base = dict(gamma1=4.0, gamma2=1.4, Pi1=2.0, Pi2=0.0, sigma=0.0,
                c_s=0.0, tau1=1e-14, tau2=1e-14)
    base.update(over)
    return MaterialParams(**base)


def init_abgrall(geom: GridGeometry,
                 params: MaterialParams | None = None) -> SimulationState:
    """Circular density/volume-fraction jump advected by a uniform flow.

    Inside radius 1/2 of the origin: rho1 = 1, rho2 = 1/2, alpha1 = 0.3;
    outside the two phases swap roles.  Pressure and velocity are uniform
    (p = 1, u = (1, 1, 0)), so the exact solution is pure advection and
    any drift in p or u measures a defect of the scheme.
    """
    params = params or abgrall_params()
    xc, yc = geom.cell_centers()
    inside = xc ** 2 + yc ** 2 < 0.25
    v = _blank_primitives(geom)
    v[R1] = np.where(inside, 1.0, 0.5)
    v[R2] = np.where(inside, 0.5, 1.0)
    v[AL] = np.where(inside, 0.3, 0.7)
    v[P] = 1.0
    v[U1] = 1.0
    v[U2] = 1.0
    return _make_state(v, geom, params)


# ---------------------------------------------------------------------------
# impulsively sheared wall layer (erf self-similar profile)
# ---------------------------------------------------------------------------

def stokes_params(nu: float = 1e-2, **over) -> MaterialParams:
    c_s = over.pop("c_s", 1.0)
    tau = 6.0 * nu / c_s ** 2
    base = dict(gamma1=1.4, gamma2=1.4, Pi1=0.0, Pi2=0.0, rho0=1.0,
                c_s=c_s, tau1=tau, tau2=tau)
    base.update(over)
    return MaterialParams(**base)


def init_stokes(geom: GridGeometry, nu: float = 1e-2,
                params: MaterialParams | None = None) -> SimulationState:
    """Opposed tangential streams meeting at x = 1/2.

    rho = 1, p = 1/gamma, u2 = -0.1 for x < 1/2 and +0.1 beyond; the
    viscous smearing of the jump follows the self-similar erf profile
    given by :func:`stokes_reference`.
    """
    params = params or stokes_params(nu)
    xc, _ = geom.cell_centers()
    v = _blank_primitives(geom)
    v[R1] = 1.0
    v[R2] = 1.0
    v[AL] = 0.5
    v[P] = 1.0 / params.gamma1
    v[U2] = np.where(xc < 0.5, -0.1, 0.1)
    return _make_state(v, geom, params)


def stokes_reference(x, t, nu, u0=0.1, x0=0.5):
    """Self-similar tangential velocity profile u2(x, t) of the smeared
    shear jump: u0 * erf((x - x0) / (2 sqrt(nu t)))."""
    if t <= 0.0:
        return u0 * np.sign(np.asarray(x) - x0)
    return u0 * erf((np.asarray(x) - x0) / (2.0 * np.sqrt(nu * t)))


# ---------------------------------------------------------------------------
# periodic double shear layer
# ---------------------------------------------------------------------------

def double_shear_params(nu: float = 2e-3, **over) -> MaterialParams:
    c_s = over.pop("c_s", 8.0)
    tau = 6.0 * nu / c_s ** 2
    base = dict(gamma1=1.4, gamma2=1.4, Pi1=0.0, Pi2=0.0, rho0=1.0,
                c_s=c_s, tau1=tau, tau2=tau)
    base.update(over)
    return MaterialParams(**base)


def init_double_shear(geom: GridGeometry, nu: float = 2e-3,
                      params: MaterialParams | None = None
                      ) -> SimulationState:
    """Two tanh shear layers at y = 1/4 and 3/4 with a sinusoidal kick.

    rho = 1, p = 100 / gamma, layer steepness 30, kick amplitude 0.05;
    both phases carry identical states (alpha = 1/2) so the two-phase
    system emulates a single fluid.
    """
    params = params or double_shear_params(nu)
    steep, kick = 30.0, 0.05
    xc, yc = geom.cell_centers()
    v = _blank_primitives(geom)
    v[R1] = 1.0
    v[R2] = 1.0
    v[AL] = 0.5
    v[P] = 100.0 / params.gamma1
    v[U1] = np.where(yc <= 0.5, np.tanh(steep * (yc - 0.25)),
                     np.tanh(steep * (0.75 - yc)))
    v[U2] = kick * np.sin(2.0 * np.pi * xc)
    return _make_state(v, geom, params)


# ---------------------------------------------------------------------------
# planar two-phase Riemann problems
# ---------------------------------------------------------------------------

# left/right primitive tuples (rho1, rho2, u1, p, alpha1); RP1 follows the
# stated two-phase shock tube, RP2 ships as a configurable volume-fraction
# jump with no canonical values (see README)
RIEMANN_STATES = {
    "rp1": ((1.0, 1.0, 0.0, 1.0, 0.5), (1.0, 0.1, 0.0, 0.1, 0.5)),
    "rp2": ((1.0, 1.0, 0.0, 2.0, 0.8), (1.0, 1.0, 0.0, 1.0, 0.2)),
}


def riemann_params(**over) -> MaterialParams:
    # EOS defaults shared with the circular-jump case
    return abgrall_params(**over)


def init_riemann(geom: GridGeometry, which: str = "rp1",
                 params: MaterialParams | None = None) -> SimulationState:
    """Planar two-phase Riemann problem with the jump at x = 1/2."""
    which = which.lower()
    if which not in RIEMANN_STATES:
        raise ValueError(f"unknown Riemann problem '{which}'; "
                         f"choose from {sorted(RIEMANN_STATES)}")
    params = params or riemann_params()
    left, right = RIEMANN_STATES[which]
    xc, _ = geom.cell_centers()
    mask = xc <= 0.5
    v = _blank_primitives(geom)
    for row, lv, rv in zip((R1, R2, U1, P, AL), left, right):
        v[row] = np.where(mask, lv, rv)
    return _make_state(v, geom, params)


# ---------------------------------------------------------------------------
# circular explosion (stiffened liquid / ideal gas)
# ---------------------------------------------------------------------------

def explosion_params(**over) -> MaterialParams:
    base = dict(gamma1=4.4, gamma2=1.4, Pi1=6e8, Pi2=0.0, sigma=0.0,
                c_s=0.0, tau1=1e-14, tau2=1e-14)
    base.update(over)
    return MaterialParams(**base)


def init_explosion(geom: GridGeometry,
                   params: MaterialParams | None = None) -> SimulationState:
    """High-pressure liquid disc bursting into ambient gas.

    Inside radius 1/2: rho1 = rho2 = 1000, p = 1e10; outside rho2 drops
    to 1 and p to 1e5; alpha = 1/2 everywhere, fluid initially at rest.
    """
    params = params or explosion_params()
    xc, yc = geom.cell_centers()
    inside = xc ** 2 + yc ** 2 < 0.25
    v = _blank_primitives(geom)
    v[R1] = 1000.0
    v[R2] = np.where(inside, 1000.0, 1.0)
    v[AL] = 0.5
    v[P] = np.where(inside, 1e10, 1e5)
    return _make_state(v, geom, params)


# ---------------------------------------------------------------------------
# two-phase Rayleigh-Taylor instability
# ---------------------------------------------------------------------------

def rayleigh_taylor_params(sigma: float = 0.0, c_s: float = 0.3,
                           tau: float = 2e-3, **over) -> MaterialParams:
    base = dict(gamma1=1.4, gamma2=1.4, Pi1=0.0, Pi2=0.0, sigma=sigma,
                c_s=c_s, tau1=tau, tau2=tau, rho0=1.0, g=(0.0, -0.1, 0.0))
    base.update(over)
    return MaterialParams(**base)


def init_rayleigh_taylor(geom: GridGeometry,
                         params: MaterialParams | None = None,
                         rho_top: float = 2.0, rho_bottom: float = 1.0,
                         alpha_floor: float = 1e-4) -> SimulationState:
    """Heavy-over-light column with a cosine-perturbed interface.

    The interface sits at y = 1/2 + 0.01 cos(6 pi x), smeared over a
    width delta = max(0.004, 6 dx) by an erf switch.  Each phase keeps a
    constant density (2 on top, 1 below) and the fluids are distinguished
    purely by the volume fraction, which transitions between alpha_floor
    and 1 - alpha_floor.  The pressure blends the two hydrostatic
    branches, continuous at the unperturbed interface height; b starts as
    the discrete gradient of the colour function, hence exactly curl-free.
    """
    params = params or rayleigh_taylor_params()
    gy = params.g[1]
    xc, yc = geom.cell_centers()
    delta = max(0.004, 6.0 * geom.dx)
    y_i = 0.5 + 0.01 * np.cos(6.0 * np.pi * xc)
    s = 0.5 + 0.5 * erf((yc - y_i) / delta)

    v = _blank_primitives(geom)
    v[R1] = rho_top
    v[R2] = rho_bottom
    v[AL] = s * (1.0 - alpha_floor) + (1.0 - s) * alpha_floor
    # hydrostatic in each half and continuous at y = 1/2: the top branch
    # is anchored at p = 1 on y = 1, the bottom branch continues it
    p_top = 1.0 - rho_top * gy * (1.0 - yc)
    p_bottom = 1.0 - 0.5 * rho_top * gy - rho_bottom * gy * (0.5 - yc)
    v[P] = s * p_top + (1.0 - s) * p_bottom

    colour = 0.5 + 0.5 * erf((yc - y_i) / (2.0 * delta))
    b_vertex = grad_cell_to_vertex(colour, geom)
    return _make_state(v, geom, params, b_vertex=b_vertex)


# ---------------------------------------------------------------------------
# qualitative droplet demos (tanh colour profile, not an equilibrium)
# ---------------------------------------------------------------------------

def droplet_params(sigma: float = 0.01, **over) -> MaterialParams:
    base = dict(gamma1=1.4, gamma2=1.4, Pi1=0.0, Pi2=0.0, sigma=sigma,
                c_s=0.0, tau1=1e-14, tau2=1e-14)
    base.update(over)
    return MaterialParams(**base)


def init_droplet(geom: GridGeometry, params: MaterialParams | None = None,
                 centers=((0.5, 0.5),), radii=(0.2,), aspect=1.0,
                 velocities=((0.0, 0.0),), width=0.02,
                 rho_in: float = 10.0, rho_out: float = 1.0
                 ) -> SimulationState:
    """Smoothed droplet(s) defined by a tanh colour profile.

    A qualitative demo (not an exact capillary equilibrium): each droplet
    contributes a tanh bubble to the colour function c; density, volume
    fraction and initial velocity blend with c, and b = grad_h c.
    ``aspect`` stretches the first droplet in x to seed oscillations.
    """
    params = params or droplet_params()
    xc, yc = geom.cell_centers()
    colour = np.zeros_like(xc)
    u1 = np.zeros_like(xc)
    u2 = np.zeros_like(xc)
    for k, ((cx, cy), rad) in enumerate(zip(centers, radii)):
        ar = aspect if k == 0 else 1.0
        r = np.sqrt(((xc - cx) / ar) ** 2 + (yc - cy) ** 2)
        bump = 0.5 * (1.0 - np.tanh((r - rad) / width))
        colour = np.maximum(colour, bump)
        vx, vy = velocities[min(k, len(velocities) - 1)]
        u1 += vx * bump
        u2 += vy * bump

    v = _blank_primitives(geom)
    v[R1] = rho_in
    v[R2] = rho_out
    v[AL] = 1e-4 + (1.0 - 2e-4) * colour
    v[P] = 1.0
    v[U1] = u1
    v[U2] = u2
    b_vertex = grad_cell_to_vertex(colour, geom)
    return _make_state(v, geom, params, b_vertex=b_vertex)


# ---------------------------------------------------------------------------
# case registry and config plumbing
# ---------------------------------------------------------------------------

def _geom(nx, ny, extent, bc):
    (x0, x1), (y0, y1) = extent
    return GridGeometry(nx, ny, (x1 - x0) / nx, (y1 - y0) / ny, (x0, y0),
                        bc)


# name -> (default nx, default ny, extent, bc, default t_end, builder)
_CASE_TABLE = {
    "abgrall": (128, 128, ((-1.0, 1.0), (-1.0, 1.0)),
                ("periodic", "periodic"), 1.0,
                lambda geom, params, opt: init_abgrall(geom, params),
                abgrall_params),
    "stokes": (500, 50, ((0.0, 1.0), (0.0, 0.1)), ("wall", "periodic"),
               0.4,
               lambda geom, params, opt: init_stokes(
                   geom, opt.get("nu", 1e-2), params),
               lambda **kw: stokes_params(**kw)),
    "double-shear": (128, 128, ((0.0, 1.0), (0.0, 1.0)),
                     ("periodic", "periodic"), 1.8,
                     lambda geom, params, opt: init_double_shear(
                         geom, opt.get("nu", 2e-3), params),
                     lambda **kw: double_shear_params(**kw)),
    "rp1": (2000, 4, ((0.0, 1.0), (0.0, 0.002)), ("wall", "periodic"),
            0.15,
            lambda geom, params, opt: init_riemann(geom, "rp1", params),
            riemann_params),
    "rp2": (2000, 4, ((0.0, 1.0), (0.0, 0.002)), ("wall", "periodic"),
            0.15,
            lambda geom, params, opt: init_riemann(geom, "rp2", params),
            riemann_params),
    "explosion": (512, 512, ((-0.8, 0.8), (-0.8, 0.8)), ("wall", "wall"),
                  6e-5,
                  lambda geom, params, opt: init_explosion(geom, params),
                  explosion_params),
    "rayleigh-taylor": (128, 384, ((0.0, 1.0), (0.0, 3.0)),
                        ("periodic", "wall"), 2.0,
                        lambda geom, params, opt: init_rayleigh_taylor(
                            geom, params),
                        rayleigh_taylor_params),
    "droplet-oscillation": (192, 192, ((0.0, 1.0), (0.0, 1.0)),
                            ("periodic", "periodic"), 1.0,
                            lambda geom, params, opt: init_droplet(
                                geom, params, aspect=1.2),
                            droplet_params),
    "droplet-collision": (192, 192, ((0.0, 1.0), (0.0, 1.0)),
                          ("periodic", "periodic"), 1.0,
                          lambda geom, params, opt: init_droplet(
                              geom, params,
                              centers=((0.3, 0.5), (0.7, 0.5)),
                              radii=(0.12, 0.12),
                              velocities=((0.2, 0.0), (-0.2, 0.0))),
                          droplet_params),
}

CASES = tuple(sorted(_CASE_TABLE))

_MAT_KEYS = ("sigma", "c_s", "tau1", "tau2")

# cases that start from rest with zero transport signal speed need a time
# step cap until the flow develops; expressed as a fraction of t_end
_DT_MAX_FRACTION = {"rp1": 1.0 / 200.0, "rp2": 1.0 / 200.0,
                    "explosion": 1.0 / 200.0}


def build_case(config: dict) -> tuple[CaseSpec, StepConfig]:
    """Resolve a flat configuration dictionary into a runnable case.

    Recognized keys: case, nx, ny, cfl, dt_max, beta, k_L, sigma, c_s,
    tau1, tau2, gammas, Pis, t_end, output_every, picard_iters, cg_tol,
    seed.
    Material keys override the case defaults; gammas and Pis are
    comma-separated pairs.
    """
    if "case" not in config:
        raise KeyError("missing required config key 'case'")
    name = str(config["case"])
    if name not in _CASE_TABLE:
        raise KeyError(f"unknown case '{name}'; choose from {CASES}")
    nx0, ny0, extent, bc, t_end0, builder, params_fn = _CASE_TABLE[name]

    nx = int(config.get("nx", nx0))
    ny = int(config.get("ny", ny0))
    geom = _geom(nx, ny, extent, bc)

    over = {k: float(config[k]) for k in _MAT_KEYS if k in config}
    if "gammas" in config:
        g1, g2 = (float(s) for s in str(config["gammas"]).split(","))
        over["gamma1"], over["gamma2"] = g1, g2
    if "Pis" in config:
        p1, p2 = (float(s) for s in str(config["Pis"]).split(","))
        over["Pi1"], over["Pi2"] = p1, p2
    params = params_fn(**over)

    options = {"seed": int(config.get("seed", 0))}
    state = builder(geom, params, options)
    spec = CaseSpec(name=name, geom=geom, params=params, state=state,
                    t_end=float(config.get("t_end", t_end0)),
                    output_every=int(config.get("output_every", 100)),
                    options=options)
    dt_max_default = spec.t_end * _DT_MAX_FRACTION.get(name, np.inf)
    step_cfg = StepConfig(cfl=float(config.get("cfl", 0.5)),
                          dt_max=float(config.get("dt_max", dt_max_default)),
                          beta=float(config.get("beta", 2.0)),
                          k_L=float(config.get("k_L", 0.1)),
                          picard_iters=int(config.get("picard_iters", 3)),
                          cg_tol=float(config.get("cg_tol", 1e-10)))
    return spec, step_cfg
