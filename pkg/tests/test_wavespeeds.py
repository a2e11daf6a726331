"""Signal speed estimates: closed forms against the full matrix spectrum."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curlflow import state as cs
from curlflow import wavespeeds as ws


def _planar_metric(rng, n):
    # G = A^T A for planar A (zero entries coupling z into xy)
    A = np.tile(np.eye(3)[..., None], (1, 1, n))
    A[0:2, 0:2] += 0.4 * rng.standard_normal((2, 2, n))
    A[2, 2] += 0.4 * rng.standard_normal(n)
    return cs.metric_tensor(A)


def test_identity_metric_limits():
    G = np.tile(np.eye(3)[..., None], (1, 1, 1))
    a, c_s = 1.7, 0.9
    lam = ws.pressure_shear_speed(G, np.array([a]), c_s)
    assert lam[0] == pytest.approx(np.sqrt(a ** 2 + 4.0 * c_s ** 2 / 3.0),
                                   rel=1e-14)
    # without sound speed the shear waves remain
    lam0 = ws.pressure_shear_speed(G, np.array([0.0]), c_s)
    assert lam0[0] == pytest.approx(np.sqrt(4.0 / 3.0) * c_s, rel=1e-14)


def test_closed_form_matches_jacobi_planar():
    rng = np.random.default_rng(0)
    G = _planar_metric(rng, 200)
    a = rng.uniform(0.0, 2.0, 200)
    for c_s in (0.0, 0.5, 2.0):
        lam = ws.pressure_shear_speed(G, a, c_s)
        ref = ws.pressure_shear_speed_jacobi(G, a, c_s)
        assert np.allclose(lam, ref, rtol=1e-10, atol=1e-12)


def test_rotated_metric_matches_y_direction_jacobi():
    # conjugating G into the x-frame must reproduce the y-direction speeds
    rng = np.random.default_rng(1)
    G = _planar_metric(rng, 100)
    Gy = ws._rotate_metric_to_x(G, 0.0, 1.0)
    lam = ws.pressure_shear_speed(Gy, np.zeros(100), 1.3)
    # reference: swap x and y axes of A explicitly via permutation P
    P = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    Gref = np.einsum("ik,kl...,jl->ij...", P, G, P)
    ref = ws.pressure_shear_speed_jacobi(Gref, np.zeros(100), 1.3)
    assert np.allclose(lam, ref, rtol=1e-10, atol=1e-12)


def test_capillary_speed_closed_form():
    # b aligned with the normal carries no transverse wave; b orthogonal
    # to it gives the full speed sqrt(sigma |b| / rho)
    rho = np.array([2.0])
    b_par = np.array([[0.7], [0.0], [0.0]])
    b_perp = np.array([[0.0], [0.7], [0.0]])
    assert ws.capillary_speed(b_par, rho, 1.0, 0.0, 3.0)[0] == 0.0
    got = ws.capillary_speed(b_perp, rho, 1.0, 0.0, 3.0)[0]
    assert got == pytest.approx(np.sqrt(3.0 * 0.7 / 2.0), rel=1e-14)


def test_capillary_speed_floor():
    rho = np.ones(3)
    b = np.full((3, 3), 1e-15)
    assert np.all(ws.capillary_speed(b, rho, 1.0, 0.0, 5.0) == 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_closed_form_property(seed):
    rng = np.random.default_rng(seed)
    G = _planar_metric(rng, 20)
    a = rng.uniform(0.0, 3.0, 20)
    c_s = rng.uniform(0.0, 3.0)
    lam = ws.pressure_shear_speed(G, a, c_s)
    ref = ws.pressure_shear_speed_jacobi(G, a, c_s)
    assert np.allclose(lam, ref, rtol=1e-9, atol=1e-10)


def test_max_signal_speed_advection_dominated():
    params = cs.MaterialParams(gamma1=1.4, gamma2=1.4, Pi1=0.0, Pi2=0.0,
                               sigma=0.0, c_s=0.0, tau1=1.0, tau2=1.0)
    v = np.zeros((cs.NCOMP, 4))
    v[cs.R1] = v[cs.R2] = 1.0
    v[cs.P] = 1.0
    v[cs.AL] = 0.5
    v[cs.U1] = [1.0, -3.0, 0.5, 2.0]
    v[cs.A0:] = np.eye(3).reshape(9, 1)
    # implicit acoustics, no shear, no capillarity: pure transport speed
    s = ws.max_signal_speed([v], params, 1.0, 0.0, include_acoustic=False)
    assert s == pytest.approx(3.0, rel=1e-14)
    # explicit acoustics adds the sound speed sqrt(1.4)
    s2 = ws.max_signal_speed([v], params, 1.0, 0.0, include_acoustic=True)
    assert s2 == pytest.approx(3.0 + np.sqrt(1.4), rel=1e-10)
