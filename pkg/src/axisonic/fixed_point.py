"""Nonlinear transonic solve by Picard iteration on the frozen-coefficient map.

The potential is phi = phi_bar + psi_1 with psi_1 = psi + eps psi_0, where
psi_0 carries the inlet flow-angle data and psi vanishes at the inlet.  Each
step freezes the coefficients at the current iterate and calls the linear
mixed-type solver.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import prod

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .background import BackgroundFlow1D
from .basis import RadialBasis
from .cutoff import falling_cutoff
from .errors import (CompatibilityViolation, DenominatorDegeneracy, GateViolation, MultipleCrossings,
                     NoContraction, ValidationError)
from .fd import fd_weights
from .fields import DEPTH, Field2D, x_derivatives
from .linear import (CoefficientSet, LinearCertificate, SIGMA0, TOL_SIGMA, compatibility_flags, modal_h1_sq,
                     solve_linear)
from .norms import weighted_norms


# -- inlet data ----------------------------------------------------------------------

@dataclass(frozen=True)
class InletData:
    """Inlet flow-angle profile h1(r) = amplitude r (1 - r^2/a^2)^power on r < a = 1 - beta0.

    The profile is odd in r (so h1(0) = h1''(0) = 0), vanishes identically on
    the flat zone [1 - beta0, 1] and is C^(power-1) across r = a.
    """

    eps: float
    amplitude: float = 1e-3
    beta0: float = 0.2
    power: int = 8

    def __post_init__(self):
        if self.eps < 0.0:
            raise ValidationError("eps must be non-negative", "inlet.eps")
        if not 0.0 < self.beta0 < 1.0:
            raise ValidationError("beta0 must lie in (0, 1)", "inlet.beta0")
        if self.power < DEPTH + 1:
            raise ValidationError(f"power must be at least {DEPTH + 1} for H^4_r data", "inlet.power")

    @property
    def edge(self) -> float:
        return 1.0 - self.beta0

    def _bump(self, r, k: int):
        """(1 - r^2/a^2)^k on r < a, zero beyond."""
        t = 1.0 - (np.asarray(r, dtype=float) / self.edge) ** 2
        return np.where(t > 0.0, np.clip(t, 0.0, None) ** k, 0.0)

    def h1(self, r) -> np.ndarray:
        return self.amplitude * np.asarray(r, dtype=float) * self._bump(r, self.power)

    def dh1(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        a2 = self.edge**2
        p = self.power
        return self.amplitude * (self._bump(r, p) - 2.0 * p * r**2 / a2 * self._bump(r, p - 1))

    def primitive_jet(self, r: np.ndarray, depth: int = DEPTH) -> np.ndarray:
        """D^m of g(r) = int_0^r h1 for m = 0..depth, with D = (1/r) d/dr."""
        a2 = self.edge**2
        p = self.power
        out = np.zeros((depth + 1, r.size))
        out[0] = self.amplitude * a2 / (2.0 * (p + 1)) * (1.0 - self._bump(r, p + 1))
        for m in range(1, depth + 1):
            falling = prod(range(p - m + 2, p + 1))  # p (p-1) ... (p-m+2)
            out[m] = self.amplitude * (-2.0 / a2) ** (m - 1) * falling * self._bump(r, p - m + 1)
        return out

    def check(self, tol: float = 1e-12) -> None:
        r = np.linspace(0.0, 1.0, 2001)
        flat = r >= self.edge
        if np.any(self.h1(r[flat]) != 0.0):
            raise CompatibilityViolation("h1 does not vanish on the flat zone")
        step = 1e-3
        second = float(fd_weights(np.arange(5), 2) @ self.h1(step * np.arange(5))) / step**2
        if abs(float(self.h1(0.0))) > tol or abs(second) > 1e-3 * max(self.amplitude, 1e-300):
            raise CompatibilityViolation("h1(0) and h1''(0) must vanish")


ETA0_ORDER = 4  # C^4 so that psi_0 has finite H^4_r norm


def inlet_cutoff(x: np.ndarray, L0: float, deriv: int = 0) -> np.ndarray:
    """Decreasing eta_0: 1 up to 15 L0/16, 0 from 7 L0/8 on."""
    return falling_cutoff(x, 15.0 * L0 / 16.0, 7.0 * L0 / 8.0, deriv, ETA0_ORDER)


def build_psi0(inlet: InletData, x: np.ndarray, basis: RadialBasis, L0: float, depth: int = DEPTH) -> Field2D:
    """psi_0(x1, r) = eta_0(x1) int_0^r h1(t) dt as a jet field."""
    inlet.check()
    xjet = np.stack([inlet_cutoff(x, L0, a) for a in range(depth + 1)])
    rjet = inlet.primitive_jet(basis.r, depth)
    return Field2D.from_x_jet(xjet, x, basis, depth) * Field2D.from_r_jet(rjet, x, basis, depth)


# -- frozen coefficients ------------------------------------------------------------------

def _x_field(values: np.ndarray, flow: BackgroundFlow1D, basis: RadialBasis, depth: int) -> Field2D:
    return Field2D.from_x_jet(x_derivatives(values, flow.h, depth), flow.x, basis, depth)


@dataclass
class FrozenState:
    """Derived fields of the current iterate (even in r; odd factors of r stripped)."""

    c2: Field2D
    den: Field2D
    k11: Field2D
    k12_r: Field2D   # k12 / r
    k1: Field2D
    k2_r: Field2D    # k2 / r
    F: Field2D


def frozen_state(psi1: Field2D, flow: BackgroundFlow1D, basis: RadialBasis, depth: int = 2) -> FrozenState:
    g = flow.gas.gamma
    P = psi1.truncated(depth + 1, depth + 1)
    Ub = _x_field(flow.u, flow, basis, depth)
    dUb = _x_field(flow.du, flow, basis, depth)
    C2b = _x_field(flow.c2, flow, basis, depth)
    accel = _x_field(flow.f - (g + 1.0) * flow.u * flow.du, flow, basis, depth)
    R2 = Field2D.r_squared(flow.x, basis, depth)
    Px = P.dx()
    DP = P.D()
    radial_sq = R2 * DP * DP
    c2 = C2b - 0.5 * (g - 1.0) * (2.0 * Ub * Px + Px * Px + radial_sq)
    den = c2 - radial_sq
    inv = den.reciprocal()
    phix = Ub + Px
    return FrozenState(
        c2=c2,
        den=den,
        k11=(c2 - phix * phix) * inv,
        k12_r=-(phix * DP) * inv,
        k1=accel * inv,
        k2_r=(DP * DP) * inv,
        F=dUb * inv * (0.5 * (g + 1.0) * Px * Px + 0.5 * (g - 1.0) * radial_sq),
    )


def coefficients_from_state(psi_hat: Field2D, psi0: Field2D, eps: float, flow: BackgroundFlow1D,
                            basis: RadialBasis, delta0: float | None = None) -> CoefficientSet:
    """Nodal k11, k12, k1, k2 and F0 = F + (inlet correction) frozen at psi_hat + eps psi0."""
    if delta0 is not None:
        h4 = weighted_norms(psi_hat, 4).h4r
        if h4 > delta0:
            raise GateViolation(f"||psi||_H4 = {h4:.3e} exceeds delta0 = {delta0:.3e}")
    psi1 = psi_hat + eps * psi0 if eps != 0.0 else psi_hat
    st = frozen_state(psi1, flow, basis)
    floor = 0.5 * float(np.min(flow.c2))
    if float(np.min(st.den.values)) < floor:
        raise DenominatorDegeneracy(
            f"c^2 - (d_r psi_1)^2 drops to {np.min(st.den.values):.4e}, below {floor:.4e}")
    r = basis.r
    r2 = r**2
    k11 = st.k11.values
    k1 = st.k1.values
    k12_r = st.k12_r.values
    k2_r = st.k2_r.values
    F0 = st.F.values.copy()
    if eps != 0.0:
        x2 = psi0.deriv(2, 0)
        x1 = psi0.deriv(1, 0)
        mixed_D = psi0.mixed(1, 1)          # D d/dx1 psi0, so psi0_{x1 r} = r * mixed_D
        D0 = psi0.mixed(0, 1)
        lap_r = psi0.deriv(0, 2) + D0
        F0 -= eps * (k11 * x2 + k1 * x1 + 2.0 * r2 * k12_r * mixed_D + r2 * k2_r * D0)
        F0 -= eps * lap_r
    dr_k12 = k12_r + r2 * st.k12_r.mixed(0, 1)
    coeffs = CoefficientSet(flow.x, k11, r * k12_r, k1, r * k2_r, F0, dr_k12, k12_r)
    coeffs.flags = compatibility_flags(coeffs, basis)
    return coeffs


# -- fixed point ------------------------------------------------------------------------------

@dataclass
class FixedPointParams:
    delta0: float | None = None      # None means sqrt(eps)
    tol_fp: float = 1e-10
    max_iter: int = 20
    damping: float = 1.0
    sigma0: float = SIGMA0
    levels: int = 40
    tol_sigma: float = TOL_SIGMA
    auto_damp: bool = True
    sigma_relative: bool = True      # perturbations are tiny, so an absolute sigma tolerance is too loose
    eps_max: float | None = None

    def radius(self, eps: float) -> float:
        return float(np.sqrt(eps)) if self.delta0 is None else self.delta0


@dataclass
class SolveReport:
    eps: float
    iterations: int
    converged: bool
    increments: list
    ratios: list
    gate_norms: list
    delta0: float
    damping: float
    elapsed: float
    certificate: LinearCertificate | None = None
    flags: dict = field(default_factory=dict)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "iterations": self.iterations,
            "converged": self.converged,
            "h1_increments": [float(v) for v in self.increments],
            "contraction_ratios": [float(v) for v in self.ratios],
            "max_ratio": float(self.max_ratio),
            "h4_gate_norms": [float(v) for v in self.gate_norms],
            "delta0": self.delta0,
            "damping": self.damping,
            "linear_certificate": None if self.certificate is None else self.certificate.to_dict(),
            "compatibility_flags": self.flags,
        }


@dataclass
class TransonicSolution:
    psi: Field2D        # vanishes at the inlet
    psi0: Field2D
    eps: float
    flow: BackgroundFlow1D
    report: SolveReport

    @property
    def psi1(self) -> Field2D:
        return self.psi + self.eps * self.psi0 if self.eps != 0.0 else self.psi


def _picard(inlet, flow, basis, params, psi0, d0, damping):
    eps = inlet.eps
    delta0 = params.radius(eps)
    h = flow.h
    lam = basis.eigenvalues
    A = np.zeros((flow.M, basis.N))
    increments, ratios, gates = [], [], []
    streak = 0
    cert = None
    flags = {}
    for it in range(1, params.max_iter + 1):
        psi_hat = Field2D.from_modes(A, flow.x, basis)
        gates.append(weighted_norms(psi_hat, 4).h4r)
        if gates[-1] > delta0:
            raise GateViolation(f"iterate {it - 1}: ||psi||_H4 = {gates[-1]:.3e} > delta0 = {delta0:.3e}")
        coeffs = coefficients_from_state(psi_hat, psi0, eps, flow, basis)
        flags = coeffs.flags
        sol = solve_linear(coeffs, basis, params.sigma0, params.levels, params.tol_sigma, d0=d0,
                           relative=params.sigma_relative)
        cert = sol.certificate
        A_new = A + damping * (sol.A - A)
        inc = float(np.sqrt(modal_h1_sq(A_new - A, h, lam)))
        if increments:
            ratio = inc / increments[-1] if increments[-1] > 0.0 else 0.0
            ratios.append(ratio)
            streak = streak + 1 if ratio >= 1.0 else 0
            if streak >= 3:
                raise NoContraction(f"increment ratio >= 1 for 3 consecutive steps (last {ratio:.3f})")
        increments.append(inc)
        A = A_new
        if inc < params.tol_fp:
            psi = Field2D.from_modes(A, flow.x, basis)
            gates.append(weighted_norms(psi, 4).h4r)
            if gates[-1] > delta0:
                raise GateViolation(f"converged iterate leaves the ball: {gates[-1]:.3e} > {delta0:.3e}")
            return A, it, True, increments, ratios, gates, cert, flags
    return A, params.max_iter, False, increments, ratios, gates, cert, flags


def fixed_point_solve(inlet: InletData, flow: BackgroundFlow1D, basis: RadialBasis,
                      params: FixedPointParams | None = None, d0: float | None = None) -> TransonicSolution:
    """Iterate psi_{k+1} = T psi_k from psi_0 = 0 until the H^1_r increment is below tol_fp."""
    params = FixedPointParams() if params is None else params
    if params.eps_max is not None and inlet.eps > params.eps_max:
        raise NoContraction(f"eps = {inlet.eps:g} exceeds eps_max = {params.eps_max:g}; contraction is not claimed there")
    start = time.perf_counter()
    psi0 = build_psi0(inlet, flow.x, basis, flow.gas.L0)
    damping = params.damping
    try:
        out = _picard(inlet, flow, basis, params, psi0, d0, damping)
    except NoContraction:
        if not params.auto_damp:
            raise
        damping *= 0.5
        out = _picard(inlet, flow, basis, params, psi0, d0, damping)
    A, its, ok, incs, ratios, gates, cert, flags = out
    if not ok:
        raise NoContraction(f"no convergence in {params.max_iter} iterations; last increment {incs[-1]:.3e}")
    report = SolveReport(inlet.eps, its, ok, incs, ratios, gates, params.radius(inlet.eps), damping,
                         time.perf_counter() - start, cert, flags)
    psi = Field2D.from_modes(A, flow.x, basis)
    return TransonicSolution(psi=psi, psi0=psi0, eps=inlet.eps, flow=flow, report=report)


def apply_map(solution: TransonicSolution, basis: RadialBasis, params: FixedPointParams | None = None,
              d0: float | None = None) -> np.ndarray:
    """One more application of the solution map; returns the modal amplitudes of T psi."""
    params = FixedPointParams() if params is None else params
    coeffs = coefficients_from_state(solution.psi, solution.psi0, solution.eps, solution.flow, basis)
    return solve_linear(coeffs, basis, params.sigma0, params.levels, params.tol_sigma, d0=d0,
                        relative=params.sigma_relative).A


# -- diagnostics -------------------------------------------------------------------------------

def potential_residual(psi1: Field2D, flow: BackgroundFlow1D) -> np.ndarray:
    """Pointwise residual of the full potential equation for phi = phi_bar + psi1.

    (c^2 - phi_x^2) phi_xx + (c^2 - phi_r^2) phi_rr - 2 phi_x phi_r phi_xr + c^2 phi_r / r + f phi_x
    """
    g = flow.gas.gamma
    r = psi1.basis.r
    Px = psi1.deriv(1, 0)
    Pxx = psi1.deriv(2, 0)
    Prr = psi1.deriv(0, 2)
    DP = psi1.mixed(0, 1)
    DPx = psi1.mixed(1, 1)
    u = flow.u[:, None]
    du = flow.du[:, None]
    phix = u + Px
    phir = r * DP
    c2 = flow.c2[:, None] - 0.5 * (g - 1.0) * (2.0 * u * Px + Px**2 + phir**2)
    return ((c2 - phix**2) * (du + Pxx) + (c2 - phir**2) * Prr - 2.0 * phix * phir * (r * DPx)
            + c2 * DP + flow.f[:, None] * phix)


@dataclass
class ResidualReport:
    l2r: float
    max_abs: float

    def to_dict(self) -> dict:
        return {"l2r": self.l2r, "max_abs": self.max_abs}


def nonlinear_residual(psi1: Field2D, flow: BackgroundFlow1D, margin: int = 2) -> ResidualReport:
    """L^2_r and max norms of the potential-equation residual on interior x1 nodes."""
    res = potential_residual(psi1, flow)[margin:-margin]
    x = flow.x[margin:-margin]
    l2 = float(np.sqrt(max(simpson((res**2) @ psi1.basis.w, x=x), 0.0)))
    return ResidualReport(l2r=l2, max_abs=float(np.max(np.abs(res[:, 1:-1]))))


@dataclass
class SonicFront:
    r: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray

    @property
    def c1_norm(self) -> float:
        return float(np.max(np.abs(self.xi)) + np.max(np.abs(self.dxi)))

    def to_dict(self) -> dict:
        return {"c1_norm": self.c1_norm, "max_abs_xi": float(np.max(np.abs(self.xi)))}


def sonic_front(psi1: Field2D, flow: BackgroundFlow1D, xtol: float = 1e-13) -> SonicFront:
    """x1 = xi(r) where c^2(rho) = |grad phi|^2, one crossing per quadrature node."""
    g = flow.gas.gamma
    basis = psi1.basis
    r = basis.r
    cols = np.arange(1, r.size - 1)
    u = flow.u[:, None]
    Px = psi1.deriv(1, 0)
    phir2 = (r * psi1.mixed(0, 1)) ** 2
    # indicator minus its background part c_bar^2 - u_bar^2
    pert = -0.5 * (g - 1.0) * (2.0 * u * Px + Px**2 + phir2) - (2.0 * u * Px + Px**2 + phir2)
    base = flow.c2 - flow.u**2
    total = base[:, None] + pert
    xi = np.empty(cols.size)
    for k, q in enumerate(cols):
        col = total[:, q]
        change = np.nonzero(np.signbit(col[1:]) != np.signbit(col[:-1]))[0]
        if change.size != 1:
            raise MultipleCrossings(f"{change.size} sonic crossings at r = {r[q]:.4f}")
        i = int(change[0])
        spline = CubicSpline(flow.x, pert[:, q])

        slope_pert = spline.derivative()

        def indicator(s):
            st = flow.at(s)
            return float(st["c2"][0] - st["u"][0] ** 2 + spline(s))

        def slope(s):
            st = flow.at(s)  # d/dx (c^2 - u^2) of the background is -(gamma + 1) u u'
            return float(-(g + 1.0) * st["u"][0] * st["du"][0] + slope_pert(s))

        a, b = flow.x[i], flow.x[i + 1]
        fa, fb = indicator(a), indicator(b)
        if fa == 0.0:
            xi[k] = a
        elif fb == 0.0:
            xi[k] = b
        else:
            root = brentq(indicator, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
            # Newton polish: the front is O(eps) and xi' is differenced, so root noise matters
            best = abs(indicator(root))
            for _ in range(3):
                trial = root - indicator(root) / slope(root)
                val = abs(indicator(trial))
                if not (a <= trial <= b) or val >= best:
                    break
                root, best = trial, val
            xi[k] = root
    rq = r[cols]
    dxi = np.gradient(xi, rq, edge_order=2)
    return SonicFront(r=rq, xi=xi, dxi=dxi)


def perturbation_scaling_study(inlet: InletData, eps_list, flow: BackgroundFlow1D, basis: RadialBasis,
                               params: FixedPointParams | None = None, d0: float | None = None,
                               mapper=map) -> dict:
    """Rows (eps, ||phi - phi_bar||_H2, ||.||_H4, c1_norm, iterations, max ratio) and log-log slopes.

    ``mapper`` may be an executor's map to run the solves concurrently.
    """
    def one(eps):
        data = InletData(eps, inlet.amplitude, inlet.beta0, inlet.power)
        sol = fixed_point_solve(data, flow, basis, params, d0)
        nrm = weighted_norms(sol.psi1, 4)
        front = sonic_front(sol.psi1, flow)
        return {
            "eps": float(eps),
            "h2": float(nrm.h2r),
            "h4": float(nrm.h4r),
            "c1_norm": front.c1_norm,
            "iterations": sol.report.iterations,
            "max_ratio": float(sol.report.max_ratio),
        }

    rows = list(mapper(one, list(eps_list)))
    pos = [row for row in rows if row["eps"] > 0.0]
    slopes = {"slope_h2": None, "slope_c1": None}
    if len(pos) >= 2:
        log_eps = np.log([p["eps"] for p in pos])
        for key, col in (("slope_h2", "h2"), ("slope_c1", "c1_norm")):
            slopes[key] = float(np.polyfit(log_eps, np.log([p[col] for p in pos]), 1)[0])
    return {"rows": rows, **slopes}
