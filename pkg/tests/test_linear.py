import numpy as np
import pytest
import scipy.sparse.linalg as spla

from axisonic.background import extend_background
from axisonic.basis import build_basis
from axisonic.errors import NoSigmaConvergence, SingularAssembly
from axisonic.linear import (assemble_sigma_system, background_coefficient_set, compatibility_flags, exit_type,
                             extend_problem, galerkin_matrices, l2r_sq, manufactured_problem, modal_h1_sq,
                             reflect, reflection_coefficients, solve_extended, solve_linear, solve_sigma)

from conftest import demo_flow

BASIS = build_basis(8, 48)


@pytest.fixture(scope="module")
def coarse():
    flow = demo_flow(60)
    coeffs, exact, amps = manufactured_problem(flow, BASIS, "cosine")
    return flow, coeffs, amps


class TestModalNorms:
    def test_h1_of_constant_mode(self):
        x = np.linspace(0.0, 2.0, 41)
        A = np.zeros((x.size, BASIS.N))
        A[:, 3] = 1.5
        assert modal_h1_sq(A, x[1] - x[0], BASIS.eigenvalues) == pytest.approx(
            2.0 * 2.25 * (1.0 + BASIS.eigenvalues[3]), rel=1e-12)

    def test_h1_of_linear_profile(self):
        x = np.linspace(0.0, 1.0, 41)
        A = np.zeros((x.size, BASIS.N))
        A[:, 0] = x
        # int x^2 + 1 dx over (0, 1)
        assert modal_h1_sq(A, x[1] - x[0], BASIS.eigenvalues) == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_l2r_matches_modal(self, rng):
        x = np.linspace(0.0, 1.0, 41)
        A = rng.standard_normal((x.size, BASIS.N))
        dens = np.sum(A**2, axis=1)
        from scipy.integrate import simpson
        assert l2r_sq(A @ BASIS.values, x, BASIS) == pytest.approx(simpson(dens, x=x), rel=1e-10)


class TestAssembly:
    def test_background_is_hyperbolic_at_exit(self, coarse):
        flow, coeffs, _ = coarse
        assert exit_type(galerkin_matrices(coeffs, BASIS)) == "free"
        flags = compatibility_flags(coeffs, BASIS)
        assert all(flags.values())

    def test_radially_constant_coefficients_decouple(self, coarse):
        _, coeffs, _ = coarse
        mats = galerkin_matrices(coeffs, BASIS)
        off = mats.a - np.einsum("ijj->ij", mats.a)[:, :, None] * np.eye(BASIS.N)[None]
        assert np.max(np.abs(off)) < 1e-12

    @pytest.mark.parametrize("exit", ["free", "neumann"])
    def test_banded_matches_sparse_direct(self, coarse, exit):
        flow, coeffs, _ = coarse
        mats = galerkin_matrices(coeffs, BASIS)
        system = assemble_sigma_system(mats, 1e-3, flow.h, exit)
        direct = spla.spsolve(system.matrix.tocsc(), system.rhs).reshape(flow.M + 2, BASIS.N)[1:-1]
        np.testing.assert_allclose(solve_sigma(system), direct, rtol=1e-8, atol=1e-12)

    def test_free_node_out_of_range(self, coarse):
        flow, coeffs, _ = coarse
        with pytest.raises(SingularAssembly):
            assemble_sigma_system(galerkin_matrices(coeffs, BASIS), 1e-3, flow.h, free_node=0)


class TestCurvatureSelection:
    def test_selected_member_minimizes_curvature(self, coarse, rng):
        flow, coeffs, _ = coarse
        mats = galerkin_matrices(coeffs, BASIS)
        system = assemble_sigma_system(mats, 1e-3, flow.h, "free", free_node=flow.M - 1)
        A = solve_sigma(system)

        def curvature(B):
            return float(np.sum(((B[2:] - 2 * B[1:-1] + B[:-2]) / flow.h**2) ** 2))

        # other members of the family differ by a homogeneous solution driven at the free node
        E = np.zeros((system.rhs.size, BASIS.N))
        E[system.free_rows, np.arange(BASIS.N)] = 1.0
        homog = spla.spsolve(system.matrix.tocsc(), E).reshape(flow.M + 2, BASIS.N, BASIS.N)[1:-1]
        base = curvature(A)
        for _ in range(5):
            other = A + homog @ (1e-3 * rng.standard_normal(BASIS.N))
            assert curvature(other) >= base * (1.0 - 1e-10)

    def test_sigma_schedule_halves(self, coarse):
        flow, coeffs, _ = coarse
        sol = solve_linear(coeffs, BASIS, sigma0=1e-2)
        s = np.array(sol.certificate.sigmas)
        np.testing.assert_allclose(s[1:] / s[:-1], 0.5)
        assert sol.certificate.converged
        assert sol.certificate.changes[-1] < 1e-8

    def test_norm_stable_along_schedule(self, coarse):
        _, coeffs, _ = coarse
        norms = np.array(solve_linear(coeffs, BASIS, exhaust=True, levels=20).certificate.h1_norms)
        assert np.all(norms[1:] <= 1.05 * norms[:-1])

    def test_no_convergence_raises(self, coarse):
        _, coeffs, _ = coarse
        with pytest.raises(NoSigmaConvergence):
            solve_linear(coeffs, BASIS, levels=2, tol=1e-14)

    def test_zero_source_gives_zero(self, coarse):
        _, coeffs, _ = coarse
        sol = solve_linear(coeffs.with_source(np.zeros_like(coeffs.F0)), BASIS, relative=True)
        assert np.max(np.abs(sol.A)) == 0.0
        assert len(sol.certificate.sigmas) == 2


class TestManufactured:
    def test_second_order_convergence(self):
        errs = []
        for M in (50, 100):
            flow = demo_flow(M)
            coeffs, _, amps = manufactured_problem(flow, BASIS, "cosine")
            sol = solve_linear(coeffs, BASIS)
            errs.append(np.sqrt(l2r_sq((sol.A - amps) @ BASIS.values, flow.x, BASIS)))
        assert 1.7 < np.log2(errs[0] / errs[1]) < 2.3

    def test_energy_ratio_reported(self, coarse):
        _, coeffs, _ = coarse
        cert = solve_linear(coeffs, BASIS, d0=2.0).certificate
        assert 0.0 < cert.energy_ratio < 10.0
        assert cert.min_margin > 0.0
        d = cert.to_dict()
        assert d["exit_condition"] == "free" and d["curvature_selection_node"] == 59


class TestExtension:
    def test_reflection_reproduces_cubics(self):
        c = reflection_coefficients()
        assert np.sum(c) == pytest.approx(1.0)
        p = np.polynomial.Polynomial([1.0, -2.0, 0.5, 3.0])
        x_out = np.linspace(1.0, 1.5, 7)
        np.testing.assert_allclose(reflect(p, 1.0, x_out, c), p(x_out), atol=1e-12)

    def test_extended_coincides_on_domain(self, coarse):
        flow, coeffs, amps = coarse
        direct = solve_linear(coeffs, BASIS)
        problem = extend_problem(coeffs, extend_background(flow), BASIS)
        assert problem.extended and problem.n_inner == flow.M
        ext = solve_extended(problem, BASIS)
        assert ext.certificate.exit == "neumann"
        gap = np.sqrt(l2r_sq((ext.A[: flow.M] - direct.A) @ BASIS.values, flow.x, BASIS))
        err = np.sqrt(l2r_sq((direct.A - amps) @ BASIS.values, flow.x, BASIS))
        assert gap <= 10.0 * err

    def test_elliptic_exit_not_extended(self, coarse):
        flow, coeffs, _ = coarse
        elliptic = background_coefficient_set(flow, BASIS, coeffs.F0)
        elliptic.k11 = np.abs(elliptic.k11) + 0.1
        problem = extend_problem(elliptic, extend_background(flow), BASIS)
        assert not problem.extended
