"""Tests for the implicit pressure stage."""

import numpy as np
import pytest

from curlflow.grid import GridGeometry
from curlflow.muscl import convective_update
from curlflow.pressure import (CGResult, PressureSolveError, PressureSystem,
                               assemble_system, cg_solve,
                               corner_flux_divergence, final_updates,
                               picard_pressure_loop)
from curlflow.state import (A0, AL, AR1, AR2, EN, MU1, MU2, MU3, NCOMP, P,
                            R1, R2, U1, U2, MaterialParams, cons_to_prim,
                            prim_to_cons, rho_of_prim)


def identity_vertex_fields(geom):
    b = np.zeros((3, geom.nvx, geom.nvy))
    A = np.zeros((3, 3, geom.nvx, geom.nvy))
    for k in range(3):
        A[k, k] = 1.0
    return b, A


def base_primitives(nx, ny, rng=None):
    v = np.zeros((NCOMP, nx, ny))
    v[R1] = 1.0
    v[R2] = 2.0
    v[P] = 1.0
    v[AL] = 0.5
    for k in range(3):
        v[A0 + 4 * k] = 1.0
    if rng is not None:
        v[R1] += 0.4 * rng.random((nx, ny))
        v[R2] += 0.3 * rng.random((nx, ny))
        v[AL] = 0.2 + 0.6 * rng.random((nx, ny))
    return v


def run_stage(v, geom, params, dt, n_picard=3):
    q_star, info = convective_update(v, geom, params, dt)
    b, A = identity_vertex_fields(geom)
    res = picard_pressure_loop(q_star, info, b, A, dt, params, geom,
                               n_picard=n_picard, p_init=v[P])
    return q_star, res


class TestCornerForcing:
    def geom(self):
        return GridGeometry(8, 6, 0.1, 0.1, (0.0, 0.0),
                            ("periodic", "periodic"))

    def test_no_stress_no_gravity_is_zero(self):
        geom = self.geom()
        b, A = identity_vertex_fields(geom)
        params = MaterialParams(sigma=0.0, c_s=2.0)
        rho = np.full((8, 6), 1.3)
        f = corner_flux_divergence(b, A, rho, params, geom)
        assert np.all(f.f1 == 0.0)
        assert np.all(f.f2 == 0.0)
        assert np.all(f.f_cell == 0.0)

    def test_pure_gravity_gives_edge_averaged_rho_g(self):
        geom = self.geom()
        b, A = identity_vertex_fields(geom)
        params = MaterialParams(g=(0.3, -9.8, 0.0))
        rng = np.random.default_rng(3)
        rho = 1.0 + rng.random((8, 6))
        f = corner_flux_divergence(b, A, rho, params, geom)
        from curlflow.grid import avg_cell_to_edge_x, avg_cell_to_edge_y
        np.testing.assert_allclose(
            f.f1, avg_cell_to_edge_x(rho, geom) * 0.3, rtol=0, atol=1e-14)
        np.testing.assert_allclose(
            f.f2, avg_cell_to_edge_y(rho, geom) * -9.8, rtol=0, atol=1e-13)
        np.testing.assert_allclose(f.f_cell[1], rho * -9.8)

    def test_uniform_interface_field_constant_stress(self):
        geom = self.geom()
        b, A = identity_vertex_fields(geom)
        b[0] = 0.4
        b[1] = -0.2
        b[2] = 0.1
        params = MaterialParams(sigma=2.5)
        rho = np.full((8, 6), 1.0)
        f = corner_flux_divergence(b, A, rho, params, geom)
        assert np.max(np.abs(f.f_cell)) < 1e-13

    def test_nonfinite_input_raises(self):
        geom = self.geom()
        b, A = identity_vertex_fields(geom)
        A[0, 0, 2, 3] = np.nan
        params = MaterialParams(c_s=1.0)
        rho = np.ones((8, 6))
        with pytest.raises(PressureSolveError, match="cell"):
            corner_flux_divergence(b, A, rho, params, geom)


class TestAssemble:
    def test_uniform_pressure_velocity_exact_residual(self):
        rng = np.random.default_rng(0)
        geom = GridGeometry(16, 12, 0.1, 0.1, (0.0, 0.0),
                            ("periodic", "periodic"))
        params = MaterialParams(gamma1=1.4, gamma2=2.1, Pi1=0.0, Pi2=1.5)
        v = base_primitives(16, 12, rng)
        v[U1] = 0.7
        v[U2] = -0.3
        v[P] = 2.5
        dt = 0.01
        q_star, info = convective_update(v, geom, params, dt)
        b, A = identity_vertex_fields(geom)
        sys, _ = assemble_system(q_star, info, b, A, dt, params, geom,
                                 p_init=v[P])
        resid = sys.apply(v[P]) + sys.k0 - sys.rhs
        assert np.max(np.abs(resid)) < 1e-11

    def test_rest_state_recovers_pressure(self):
        rng = np.random.default_rng(1)
        geom = GridGeometry(10, 10, 0.2, 0.2, (0.0, 0.0),
                            ("periodic", "periodic"))
        params = MaterialParams(gamma1=1.4, gamma2=1.9, Pi1=0.0, Pi2=0.6)
        v = base_primitives(10, 10, rng)
        v[P] = 3.0
        q_star, res = run_stage(v, geom, params, dt=0.05)
        np.testing.assert_allclose(res.p, 3.0, rtol=0, atol=1e-12)
        q_new = final_updates(q_star, res, params, geom)
        np.testing.assert_allclose(q_new, prim_to_cons(v, params),
                                   rtol=0, atol=1e-12)

    @pytest.mark.parametrize("bc", [("periodic", "periodic"),
                                    ("wall", "wall")])
    def test_operator_symmetric_positive(self, bc):
        rng = np.random.default_rng(2)
        geom = GridGeometry(9, 7, 0.1, 0.15, (0.0, 0.0), bc)
        sys = PressureSystem(
            h_x=rng.random((geom.nex, geom.ny)),
            h_y=rng.random((geom.nx, geom.ney)),
            k0=np.zeros((9, 7)), k1=0.1 + rng.random((9, 7)),
            rhs=np.zeros((9, 7)), dt=0.03, geom=geom)
        for _ in range(100):
            x = rng.standard_normal((9, 7))
            y = rng.standard_normal((9, 7))
            lhs = np.sum(sys.apply(x) * y)
            rhs = np.sum(x * sys.apply(y))
            scale = max(abs(lhs), abs(rhs), 1.0)
            assert abs(lhs - rhs) <= 1e-11 * scale
            assert np.sum(x * sys.apply(x)) >= 0.0

    def test_nonfinite_coefficient_raises(self):
        geom = GridGeometry(6, 6, 0.1, 0.1, (0.0, 0.0),
                            ("periodic", "periodic"))
        params = MaterialParams()
        v = base_primitives(6, 6)
        q_star, info = convective_update(v, geom, params, 0.01)
        b, A = identity_vertex_fields(geom)
        q_star[EN, 2, 2] = np.nan
        with pytest.raises(PressureSolveError, match="cell"):
            assemble_system(q_star, info, b, A, 0.01, params, geom,
                            p_init=v[P])


class TestConjugateGradient:
    def random_system(self, seed, nx=12, ny=9):
        rng = np.random.default_rng(seed)
        geom = GridGeometry(nx, ny, 0.1, 0.1, (0.0, 0.0),
                            ("periodic", "periodic"))
        return PressureSystem(
            h_x=0.5 + rng.random((geom.nex, ny)),
            h_y=0.5 + rng.random((nx, geom.ney)),
            k0=rng.random((nx, ny)), k1=0.2 + rng.random((nx, ny)),
            rhs=np.zeros((nx, ny)), dt=0.05, geom=geom), rng

    def test_manufactured_solution(self):
        sys, rng = self.random_system(4)
        p_exact = rng.standard_normal((12, 9))
        sys.rhs = sys.apply(p_exact) + sys.k0
        res = cg_solve(sys, np.zeros_like(p_exact), tol=1e-12)
        np.testing.assert_allclose(res.p, p_exact, rtol=0, atol=1e-10)

    def test_diagonal_system_single_iteration(self):
        sys, rng = self.random_system(5)
        sys.h_x = np.zeros_like(sys.h_x)
        sys.h_y = np.zeros_like(sys.h_y)
        p_exact = rng.standard_normal((12, 9))
        sys.rhs = sys.k1 * p_exact + sys.k0
        res = cg_solve(sys, np.zeros_like(p_exact), tol=1e-12)
        assert res.iterations <= 1
        np.testing.assert_allclose(res.p, p_exact, rtol=0, atol=1e-12)

    def test_warm_start_zero_iterations(self):
        sys, rng = self.random_system(6)
        p_exact = rng.standard_normal((12, 9))
        sys.rhs = sys.apply(p_exact) + sys.k0
        res = cg_solve(sys, p_exact, tol=1e-10)
        assert res.iterations == 0
        np.testing.assert_array_equal(res.p, p_exact)

    def test_iteration_budget_exhaustion_raises(self):
        sys, rng = self.random_system(7)
        p_exact = rng.standard_normal((12, 9))
        sys.rhs = sys.apply(p_exact) + sys.k0
        with pytest.raises(PressureSolveError, match="residual history"):
            cg_solve(sys, np.zeros_like(p_exact), tol=1e-14, max_iter=2)


class TestPicard:
    def test_uniform_flow_single_pass(self):
        rng = np.random.default_rng(8)
        geom = GridGeometry(16, 12, 0.1, 0.1, (0.0, 0.0),
                            ("periodic", "periodic"))
        params = MaterialParams(gamma1=1.4, gamma2=2.1, Pi1=0.0, Pi2=1.5)
        v = base_primitives(16, 12, rng)
        v[U1] = 0.7
        v[U2] = -0.3
        v[P] = 2.5
        q_star, res = run_stage(v, geom, params, dt=0.01)
        assert len(res.picard_deltas) == 1
        assert res.picard_deltas[0] == 0.0
        assert np.max(np.abs(res.p - 2.5)) == 0.0
        q_new = final_updates(q_star, res, params, geom)
        v_new = cons_to_prim(q_new, params)
        assert np.max(np.abs(v_new[P] - 2.5)) < 1e-13 * 2.5
        assert np.max(np.abs(v_new[U1] - 0.7)) < 1e-14
        assert np.max(np.abs(v_new[U2] + 0.3)) < 1e-14

    def test_hydrostatic_column_stays_at_rest(self):
        rng = np.random.default_rng(9)
        nx, ny = 12, 20
        geom = GridGeometry(nx, ny, 0.1, 0.05, (0.0, 0.0),
                            ("periodic", "wall"))
        g_y = -9.8
        params = MaterialParams(gamma1=1.4, gamma2=2.1, Pi1=2.0, Pi2=3.0,
                                g=(0.0, g_y, 0.0))
        v = base_primitives(nx, ny)
        v[R2] = 2.0 + 0.2 * rng.random(ny)[None, :]
        v[AL] = 0.3 + 0.4 * rng.random(ny)[None, :]
        rho = rho_of_prim(v)
        p = np.zeros((nx, ny))
        p[:, -1] = 10.0
        for j in range(ny - 2, -1, -1):
            p[:, j] = (p[:, j + 1]
                       - geom.dy * 0.5 * (rho[:, j] + rho[:, j + 1]) * g_y)
        v[P] = p
        q_star, res = run_stage(v, geom, params, dt=0.002)
        assert np.max(np.abs(res.m1)) <= 1e-10
        assert np.max(np.abs(res.m2)) <= 1e-10
        assert np.max(np.abs(res.p - p)) <= 1e-10

    def test_pressure_bump_deltas_decrease(self):
        geom = GridGeometry(24, 24, 1.0 / 24, 1.0 / 24, (0.0, 0.0),
                            ("periodic", "periodic"))
        params = MaterialParams(gamma1=1.4, gamma2=2.4, Pi1=0.0, Pi2=1.0)
        v = base_primitives(24, 24)
        xc, yc = geom.cell_centers()
        r2 = (xc - 0.5) ** 2 + (yc - 0.5) ** 2
        v[P] = 1.0 + 4.0 * (r2 < 0.04)
        q_star, info = convective_update(v, geom, params, 0.002)
        b, A = identity_vertex_fields(geom)
        res = picard_pressure_loop(q_star, info, b, A, 0.002, params, geom,
                                   n_picard=5, p_init=v[P])
        d = res.picard_deltas
        assert all(d[i + 1] < d[i] for i in range(len(d) - 1))


class TestFinalUpdates:
    def test_uniform_pressure_momentum_change_is_gravity(self):
        geom = GridGeometry(10, 8, 0.1, 0.1, (0.0, 0.0),
                            ("periodic", "periodic"))
        params = MaterialParams(gamma1=1.4, gamma2=1.8, Pi1=0.5, Pi2=0.5,
                                g=(0.2, -1.5, 0.0))
        v = base_primitives(10, 8)
        v[P] = 2.0
        dt = 0.01
        q_star, res = run_stage(v, geom, params, dt)
        q_new = final_updates(q_star, res, params, geom)
        rho = rho_of_prim(v)
        np.testing.assert_allclose(q_new[MU1] - q_star[MU1], dt * rho * 0.2,
                                   rtol=0, atol=1e-14)
        np.testing.assert_allclose(q_new[MU2] - q_star[MU2], dt * rho * -1.5,
                                   rtol=0, atol=1e-14)
        assert np.all(q_new[MU3] == q_star[MU3])

    def test_mirror_symmetry_preserved(self):
        nx = ny = 20
        geom = GridGeometry(nx, ny, 0.05, 0.05, (0.0, 0.0),
                            ("periodic", "periodic"))
        params = MaterialParams(gamma1=1.4, gamma2=2.0, Pi1=0.0, Pi2=1.0)
        v = base_primitives(nx, ny)
        xc, yc = geom.cell_centers()
        r2 = (xc - 0.5) ** 2 + (yc - 0.5) ** 2
        v[P] = 1.0 + 3.0 * np.exp(-60.0 * r2)
        v[AL] = 0.3 + 0.3 * np.exp(-40.0 * r2)
        # symmetrize exactly about both midplanes
        for arr in (v[P], v[AL]):
            arr += arr[::-1, :].copy()
            arr += arr[:, ::-1].copy()
            arr *= 0.25
        q_star, res = run_stage(v, geom, params, dt=0.004)
        q_new = final_updates(q_star, res, params, geom)
        assert np.array_equal(res.p, res.p[::-1, :])
        assert np.array_equal(res.p, res.p[:, ::-1])
        for c in (AR1, AR2, EN):
            assert np.array_equal(q_new[c], q_new[c][::-1, :])
        assert np.array_equal(q_new[MU1], -q_new[MU1][::-1, :])
        assert np.array_equal(q_new[MU2], -q_new[MU2][:, ::-1])

    def test_periodic_energy_and_momentum_conservation(self):
        rng = np.random.default_rng(11)
        geom = GridGeometry(16, 16, 0.1, 0.1, (0.0, 0.0),
                            ("periodic", "periodic"))
        params = MaterialParams(gamma1=1.4, gamma2=2.1, Pi1=0.0, Pi2=1.5)
        v = base_primitives(16, 16, rng)
        v[P] = 1.0 + 0.5 * rng.random((16, 16))
        v[U1] = 0.2 * rng.standard_normal((16, 16))
        v[U2] = 0.2 * rng.standard_normal((16, 16))
        dt = 0.002
        q_star, res = run_stage(v, geom, params, dt)
        q_new = final_updates(q_star, res, params, geom)
        e0, e1 = np.sum(q_star[EN]), np.sum(q_new[EN])
        assert abs(e1 - e0) <= 1e-11 * abs(e0)
        for c in (AR1, AR2, MU1, MU2, MU3):
            assert abs(np.sum(q_new[c]) - np.sum(q_star[c])) <= 1e-11 * max(
                1.0, abs(np.sum(q_star[c])))
