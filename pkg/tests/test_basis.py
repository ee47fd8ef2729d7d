import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from axisonic.basis import (bessel_j, build_basis, find_eigenvalues, jn_over_zn, quadrature_rule,
                            radial_derivative_terms)
from axisonic.errors import DimensionMismatch


class TestBessel:
    @pytest.mark.parametrize("n", [0, 1, 2, 5])
    def test_against_scipy(self, n):
        z = np.concatenate([np.linspace(0.0, 2.0, 21), np.linspace(2.01, 60.0, 200)])
        np.testing.assert_allclose(bessel_j(n, z), special.jv(n, z), atol=1e-14)

    def test_parity(self):
        z = np.linspace(0.1, 9.0, 13)
        np.testing.assert_allclose(bessel_j(1, -z), -bessel_j(1, z))
        np.testing.assert_allclose(bessel_j(2, -z), bessel_j(2, z))

    def test_regular_ratio_at_origin(self):
        assert jn_over_zn(0, 0.0) == pytest.approx(1.0)
        assert jn_over_zn(1, 0.0) == pytest.approx(0.5)
        assert jn_over_zn(3, 0.0) == pytest.approx(1.0 / 48.0)
        z = np.array([0.5, 3.0, 11.0])
        np.testing.assert_allclose(jn_over_zn(2, z), special.jv(2, z) / z**2, rtol=1e-13)


def test_quadrature_weighted_moments():
    q = quadrature_rule(24)
    for p in range(40):
        assert q.integrate(q.nodes**p) == pytest.approx(1.0 / (p + 2), rel=1e-14)


def test_eigenvalues_are_j1_zeros():
    lam = find_eigenvalues(12)
    assert lam[0] == 0.0
    np.testing.assert_allclose(np.sqrt(lam[1:]), special.jn_zeros(1, 11), rtol=1e-14)


def test_radial_derivative_terms():
    # d/dr = r D, d^2/dr^2 = D + r^2 D^2
    assert radial_derivative_terms(1) == {(1, 1): 1.0}
    assert radial_derivative_terms(2) == {(0, 1): 1.0, (2, 2): 1.0}


class TestRadialBasis:
    def test_orthonormal(self):
        basis = build_basis(16, 128)
        np.testing.assert_allclose(basis.gram(), np.eye(16), atol=1e-10)

    def test_eigen_equation_and_neumann(self, basis):
        res = basis.eigen_residual()[:, 1:-1]
        assert np.max(np.abs(res)) <= 1e-9 * basis.eigenvalues[-1]
        np.testing.assert_allclose(basis.d1[:, -1], 0.0, atol=1e-11)
        np.testing.assert_allclose(basis.d1[:, 0], 0.0, atol=1e-12)

    def test_jet_matches_scipy(self, basis):
        k = np.sqrt(basis.eigenvalues)
        r = basis.r
        expect = basis.normalization[:, None] * special.j0(np.outer(k, r))
        np.testing.assert_allclose(basis.values, expect, atol=1e-12)
        # D b = -c k J1(k r) / r
        inner = slice(1, None)
        d = -basis.normalization[:, None] * k[:, None] * special.j1(np.outer(k, r[inner])) / r[inner]
        np.testing.assert_allclose(basis.jet[1][:, inner], d, atol=1e-9)

    def test_quadrature_safeguard(self):
        with pytest.raises(ValueError):
            build_basis(10, 39)

    def test_project_shapes(self, basis):
        with pytest.raises(DimensionMismatch):
            basis.project(np.ones(7))
        with pytest.raises(DimensionMismatch):
            basis.reconstruct(np.ones(basis.N + 1))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-10.0, 10.0), min_size=12, max_size=12))
    def test_project_reconstruct_roundtrip(self, coeffs):
        basis = build_basis(12, 48)
        c = np.array(coeffs)
        np.testing.assert_allclose(basis.project(basis.reconstruct(c)), c, atol=1e-11 * (1.0 + np.max(np.abs(c))))
