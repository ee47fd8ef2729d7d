import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from axisonic.background import (ForceKind, ForceModel, GasConfig, SonicCase, bernoulli_roots, calibrate_force,
                                 check_sign_pattern, classify_sonic_point, extend_background, linear_force,
                                 solve_background, sonic_level, sonic_speed, verify_multiplier)
from axisonic.errors import NoCertificate, NoRoot, SignPatternViolation, Unclassifiable, ValidationError

from conftest import DEMO_GAS


class TestGasConfig:
    def test_derived_quantities(self):
        gas = GasConfig(2.0, 2.0, 0.5, -1.0, 1.0)
        assert gas.J == pytest.approx(1.0)
        assert gas.B0 == pytest.approx(0.125 + 2.0 * 2.0)

    @pytest.mark.parametrize("args", [
        (1.0, 1.0, 0.5, -1.0, 1.0),
        (1.4, -1.0, 0.5, -1.0, 1.0),
        (1.4, 1.0, 0.0, -1.0, 1.0),
        (1.4, 1.0, 0.5, 1.0, 1.0),
        (1.4, 1.0, 2.0, -1.0, 1.0),   # supersonic inlet
    ])
    def test_rejects_bad_state(self, args):
        with pytest.raises(ValidationError):
            GasConfig(*args)


class TestBernoulliRoots:
    def test_cubic_factorization(self):
        # gamma=2, J=1: t^2/2 + 2/t = 5/2  <=>  t^3 - 5t + 4 = (t - 1)(t^2 + t - 4)
        lo, hi = bernoulli_roots(2.5, 1.0, 2.0)
        assert lo == pytest.approx(1.0, abs=1e-12)
        assert hi == pytest.approx((-1.0 + np.sqrt(17.0)) / 2.0, abs=1e-12)

    def test_sonic_level_gives_double_root(self):
        J, g = 0.7, 1.4
        lo, hi = bernoulli_roots(sonic_level(J, g), J, g)
        assert lo == pytest.approx(sonic_speed(J, g), rel=1e-7)
        assert hi == pytest.approx(sonic_speed(J, g), rel=1e-7)

    def test_below_minimum(self):
        with pytest.raises(NoRoot):
            bernoulli_roots(0.99 * sonic_level(1.0, 1.4), 1.0, 1.4)

    @settings(max_examples=60, deadline=None)
    @given(g=st.floats(1.05, 3.0), J=st.floats(0.05, 5.0), excess=st.floats(1e-3, 10.0))
    def test_roots_solve_and_straddle_sonic_speed(self, g, J, excess):
        level = sonic_level(J, g) * (1.0 + excess)
        lo, hi = bernoulli_roots(level, J, g)
        K = g * J ** (g - 1.0) / (g - 1.0)
        for t in (lo, hi):
            assert 0.5 * t * t + K * t ** (1.0 - g) == pytest.approx(level, rel=1e-12)
        assert lo < sonic_speed(J, g) < hi


def test_sonic_speed_closed_form():
    assert sonic_speed(1.0, 2.0) == pytest.approx(2.0 ** (1.0 / 3.0), rel=1e-15)
    g, J = 1.4, 0.5
    c = sonic_speed(J, g)
    # u = c and c^2 = gamma rho^(gamma-1) with rho = J / u
    assert c**2 == pytest.approx(g * (J / c) ** (g - 1.0), rel=1e-14)


class TestForce:
    def test_sign_pattern(self):
        check_sign_pattern(linear_force(2.0), -1.0, 1.0)
        with pytest.raises(SignPatternViolation):
            check_sign_pattern(linear_force(-1.0), -1.0, 1.0)

    def test_calibration_hits_sonic_level(self):
        force = calibrate_force(linear_force(1.0), DEMO_GAS)
        integral = force.primitive(0.0) - force.primitive(DEMO_GAS.L0)
        assert DEMO_GAS.B0 + float(integral) == pytest.approx(sonic_level(DEMO_GAS.J, DEMO_GAS.gamma), rel=1e-13)

    def test_table_force_matches_linear(self):
        xs = np.linspace(-2.0, 2.0, 41)
        table = ForceModel(ForceKind.TABLE, (tuple(xs), tuple(xs)))
        x = np.linspace(-1.9, 1.9, 17)
        np.testing.assert_allclose(table(x), x, atol=1e-12)


class TestClassification:
    def test_linear_force_is_positive_acceleration(self):
        c = classify_sonic_point(linear_force(3.0), 1.4)
        assert c.case is SonicCase.POSITIVE_ACCEL
        assert c.leading_derivative == pytest.approx(np.sqrt(3.0 / 2.4))

    @pytest.mark.parametrize("power, case, m, exponent", [
        (5, SonicCase.ZERO_ACCEL_SMOOTH, 1, 3.0),
        (9, SonicCase.ZERO_ACCEL_SMOOTH, 2, 5.0),
        (3, SonicCase.ZERO_ACCEL_JUMP, 1, 2.0),
        (7, SonicCase.ZERO_ACCEL_JUMP, 2, 4.0),
    ])
    def test_odd_monomials(self, power, case, m, exponent):
        coeffs = np.zeros(power + 1)
        coeffs[power] = 1.0
        c = classify_sonic_point(ForceModel(ForceKind.POLYNOMIAL, tuple(coeffs)), 1.4)
        assert (c.case, c.m, c.predicted_exponent) == (case, m, exponent)

    def test_jump_is_holder(self):
        c = classify_sonic_point(ForceModel(ForceKind.POLYNOMIAL, (-1.0,), 1.0, (1.0,)), 1.4)
        assert c.case is SonicCase.HOLDER
        assert c.predicted_exponent == 0.5

    def test_even_order_unclassifiable(self):
        with pytest.raises(Unclassifiable):
            classify_sonic_point(ForceModel(ForceKind.POLYNOMIAL, (0.0, 0.0, 1.0)), 1.4)


class TestBackgroundSolve:
    def test_conservation(self, flow):
        assert np.max(np.abs(flow.mass_residual())) <= 1e-10
        assert np.max(np.abs(flow.bernoulli_residual())) <= 1e-10

    def test_transonic_structure(self, flow):
        assert np.all(flow.mach[flow.x < -1e-12] < 1.0)
        assert np.all(flow.mach[flow.x > 1e-12] > 1.0)
        assert np.all(np.diff(flow.u) > 0.0)
        assert flow.at(0.0)["u"][0] == pytest.approx(flow.c_star, rel=1e-12)

    def test_inlet_state(self, flow):
        assert flow.u[0] == pytest.approx(DEMO_GAS.u0, rel=1e-12)
        assert flow.rho[0] == pytest.approx(DEMO_GAS.rho0, rel=1e-12)

    def test_derivative_matches_differences(self, flow):
        x = np.array([-1.3, -0.4, 0.35, 0.8])
        h = 1e-5
        fd = (flow.at(x + h)["u"] - flow.at(x - h)["u"]) / (2 * h)
        np.testing.assert_allclose(flow.at(x)["du"], fd, rtol=1e-7)

    def test_sonic_slope(self, flow):
        nu = np.sqrt(flow.force.derivatives_at_0(1)[1] / (DEMO_GAS.gamma + 1.0))
        assert flow.at(0.0)["du"][0] == pytest.approx(nu, rel=1e-10)


class TestMultiplier:
    def test_demo_certificate(self, certificate):
        assert certificate.kappa_star > 0.0
        assert np.min(certificate.min_margin_6) > 0.0
        assert np.min(certificate.min_margin_7) >= 4.0
        assert certificate.d0 > DEMO_GAS.L1

    def test_explicit_d0_too_small(self, flow):
        with pytest.raises(NoCertificate):
            verify_multiplier(flow, d0=1.0 + 1e-9)

    def test_extension_keeps_margins(self, flow):
        ext = extend_background(flow)
        assert ext.n_inner == flow.M
        assert ext.L2 >= 2 * DEMO_GAS.L1 - 1e-12
        assert np.min(ext.min_margin_8) >= ext.kappa_star
        assert np.min(ext.min_margin_9) >= 4.0
        # on the original interval the extended background is the original one
        np.testing.assert_allclose(ext.flow.u[: flow.M], flow.u, rtol=1e-12)
        # coefficient a11 is 1 past the cutoff, i.e. elliptic at the exit
        assert ext.a11[-1] == pytest.approx(1.0)
