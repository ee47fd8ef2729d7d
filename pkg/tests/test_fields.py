import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from axisonic.basis import build_basis
from axisonic.cutoff import falling_cutoff, rising_cutoff, smoothstep
from axisonic.fd import derivative_matrix, fd_weights
from axisonic.fields import Field2D


class TestSmoothstep:
    def test_quintic_default(self):
        t = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(smoothstep(t), 6 * t**5 - 15 * t**4 + 10 * t**3, atol=1e-15)

    def test_order_four_polynomial(self):
        t = np.linspace(0.0, 1.0, 11)
        expect = 126 * t**5 - 420 * t**6 + 540 * t**7 - 315 * t**8 + 70 * t**9
        np.testing.assert_allclose(smoothstep(t, order=4), expect, atol=1e-13)

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_flat_ends(self, order):
        for d in range(1, order + 1):
            assert smoothstep(np.array([0.0, 1.0]), d, order) == pytest.approx([0.0, 0.0], abs=1e-12)
            # one-sided limits also vanish, at least linearly
            assert abs(smoothstep(1e-10, d, order)) < 1e-5
            assert abs(smoothstep(1.0 - 1e-10, d, order)) < 1e-5

    @settings(max_examples=50, deadline=None)
    @given(a=st.floats(-5.0, 5.0), w=st.floats(0.01, 3.0), order=st.integers(1, 4))
    def test_falling_monotone_and_complementary(self, a, w, order):
        x = np.linspace(a - w, a + 2 * w, 301)
        f = falling_cutoff(x, a, a + w, order=order)
        assert np.all(np.diff(f) <= 1e-13)
        np.testing.assert_allclose(f + rising_cutoff(x, a, a + w, order=order), 1.0, atol=1e-14)
        assert f[0] == 1.0 and f[-1] == 0.0

    def test_derivative_scaling(self):
        x = np.linspace(-1.0, 2.0, 31)
        h = 1e-6
        fd = (falling_cutoff(x + h, 0.0, 0.5) - falling_cutoff(x - h, 0.0, 0.5)) / (2 * h)
        np.testing.assert_allclose(falling_cutoff(x, 0.0, 0.5, 1), fd, atol=1e-6)


class TestFiniteDifferences:
    def test_classic_weights(self):
        np.testing.assert_allclose(fd_weights([-1, 0, 1], 2), [1.0, -2.0, 1.0])
        np.testing.assert_allclose(fd_weights([-2, -1, 0, 1, 2], 1), [1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12], atol=1e-15)

    @pytest.mark.parametrize("deriv", [1, 2, 3, 4])
    def test_exact_on_polynomials(self, deriv):
        x = np.linspace(-1.0, 1.0, 21)
        h = x[1] - x[0]
        D = derivative_matrix(x.size, h, deriv)
        p = np.polynomial.Polynomial([0.3, -1.0, 0.5, 2.0, -0.7])  # degree 4, inside every stencil's reach
        np.testing.assert_allclose(D @ p(x), p.deriv(deriv)(x), atol=1e-8)

    def test_fourth_order(self):
        errs = []
        for M in (41, 81):
            x = np.linspace(0.0, 2.0, M)
            errs.append(np.max(np.abs(derivative_matrix(M, x[1] - x[0], 1) @ np.sin(x) - np.cos(x))))
        assert np.log2(errs[0] / errs[1]) > 3.7


class TestField2D:
    basis = build_basis(6, 32)
    x = np.linspace(0.0, 1.0, 41)

    def test_product_rule(self):
        f = Field2D.from_x_jet(np.stack([np.sin(self.x), np.cos(self.x), -np.sin(self.x),
                                         -np.cos(self.x), np.sin(self.x)]), self.x, self.basis)
        g = Field2D.r_squared(self.x, self.basis)
        fg = f * g
        r = self.basis.r
        np.testing.assert_allclose(fg.values, np.sin(self.x)[:, None] * r**2, atol=1e-14)
        # d/dr (sin x r^2) = 2 r sin x, D = 2 sin x
        np.testing.assert_allclose(fg.deriv(0, 0, 1), 2.0 * np.sin(self.x)[:, None] + 0.0 * r, atol=1e-14)
        np.testing.assert_allclose(fg.deriv(1, 1), 2.0 * np.cos(self.x)[:, None] * r, atol=1e-14)

    def test_reciprocal(self):
        two = Field2D.constant(2.0, self.x, self.basis) + Field2D.r_squared(self.x, self.basis)
        inv = two.reciprocal()
        r = self.basis.r
        np.testing.assert_allclose(inv.values, np.broadcast_to(1.0 / (2.0 + r**2), inv.values.shape), rtol=1e-14)
        # D(1/(2+r^2)) = -2/(2+r^2)^2
        np.testing.assert_allclose(inv.deriv(0, 0, 1), (-2.0 / (2.0 + r**2) ** 2)[None] + 0 * self.x[:, None],
                                   rtol=1e-12)

    def test_modal_derivatives(self):
        A = np.zeros((self.x.size, self.basis.N))
        A[:, 2] = np.exp(self.x)
        f = Field2D.from_modes(A, self.x, self.basis)
        b = self.basis.values[2]
        np.testing.assert_allclose(f.deriv(2, 0), np.outer(np.exp(self.x), b), rtol=1e-5, atol=1e-5)
        np.testing.assert_allclose(f.deriv(0, 2), np.outer(np.exp(self.x), self.basis.d2[2]), atol=1e-10)
