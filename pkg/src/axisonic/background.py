"""One-dimensional transonic background flow driven by an external force.

The flow solves mass conservation rho u = J and Bernoulli's law

    u^2 / 2 + gamma / (gamma - 1) rho^(gamma - 1) - int_{L0}^{x} f = B0

with P = rho^gamma.  Velocities are carried as the relative offset
s = u / c_* - 1 from the sonic speed, which keeps every near-sonic quantity
(u - c_*, c^2 - u^2, the acceleration) free of cancellation.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from math import factorial, sqrt

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .cutoff import falling_cutoff
from .errors import (
    ClassificationMismatch,
    ExtensionFailure,
    Infeasible,
    NewtonDivergence,
    NoCertificate,
    NoRoot,
    RootConvergenceFailure,
    SignPatternViolation,
    Unclassifiable,
    ValidationError,
)
from .fd import derivative_matrix

SWITCH_CELLS = 10
SERIES_RADIUS = 0.05
SERIES_TERMS = 24
SIGN_SAMPLES = 4001


@dataclass(frozen=True)
class GasConfig:
    gamma: float
    rho0: float
    u0: float
    L0: float
    L1: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValidationError("gamma must exceed 1", "gas.gamma")
        if not self.rho0 > 0.0:
            raise ValidationError("must be positive", "gas.rho0")
        if not self.u0 > 0.0:
            raise ValidationError("must be positive", "gas.u0")
        if not (self.L0 < 0.0 < self.L1):
            raise ValidationError("need L0 < 0 < L1", "gas.L0")
        if self.u0**2 >= self.gamma * self.rho0 ** (self.gamma - 1.0):
            raise ValidationError("inlet must be subsonic", "gas.u0")

    @property
    def J(self) -> float:
        return self.rho0 * self.u0

    @property
    def B0(self) -> float:
        g = self.gamma
        return 0.5 * self.u0**2 + g / (g - 1.0) * self.rho0 ** (g - 1.0)


class ForceKind(str, enum.Enum):
    LINEAR = "linear"
    POLYNOMIAL = "polynomial"
    TABLE = "table"


@dataclass(frozen=True)
class ForceModel:
    """External force f(x1) = amplitude * shape(x1).

    ``params`` holds ascending polynomial coefficients (linear: the single
    slope a of a * x1), or for tables a pair (x samples, f samples).  A
    polynomial may use a different coefficient list on x1 > 0 through
    ``params_right``; that is how forces with a jump at the sonic point are
    described.
    """

    kind: ForceKind
    params: tuple
    amplitude: float = 1.0
    params_right: tuple | None = None
    _spline: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ForceKind(self.kind))
        if self.kind is ForceKind.TABLE:
            xs, fs = (np.asarray(p, dtype=float) for p in self.params)
            object.__setattr__(self, "_spline", CubicSpline(xs, fs))

    # -- polynomial helpers -------------------------------------------------
    def _coeffs(self, right: bool) -> np.ndarray:
        if self.kind is ForceKind.LINEAR:
            return np.array([0.0, float(self.params[0])])
        if right and self.params_right is not None:
            return np.asarray(self.params_right, dtype=float)
        return np.asarray(self.params, dtype=float)

    @property
    def analytic(self) -> bool:
        return self.kind is not ForceKind.TABLE

    @property
    def smooth_at_sonic(self) -> bool:
        if not self.analytic or self.params_right is None:
            return True
        a, b = self._coeffs(False), self._coeffs(True)
        n = max(a.size, b.size)
        return np.array_equal(np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size)))

    def with_amplitude(self, amplitude: float) -> "ForceModel":
        return replace(self, amplitude=float(amplitude))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is ForceKind.TABLE:
            return self.amplitude * self._spline(x)
        left = np.polynomial.polynomial.polyval(x, self._coeffs(False))
        right = np.polynomial.polynomial.polyval(x, self._coeffs(True))
        out = np.where(x < 0.0, left, right)
        return self.amplitude * np.where(x == 0.0, 0.0, out)

    def primitive(self, x) -> np.ndarray:
        """int_0^x f."""
        x = np.asarray(x, dtype=float)
        if self.kind is ForceKind.TABLE:
            anti = self._spline.antiderivative()
            return self.amplitude * (anti(x) - anti(0.0))
        out = []
        for right in (False, True):
            c = self._coeffs(right)
            P = np.polynomial.polynomial.polyint(c)
            out.append(np.polynomial.polynomial.polyval(x, P))
        return self.amplitude * np.where(x < 0.0, out[0], out[1])

    def primitive_over_x2(self, x) -> np.ndarray:
        """int_0^x f / x^2, evaluated without cancellation near x = 0."""
        x = np.asarray(x, dtype=float)
        if self.kind is ForceKind.TABLE:
            safe = np.where(x == 0.0, 1.0, x)
            return np.where(x == 0.0, 0.5 * self.amplitude * self._spline(0.0, 1), self.primitive(x) / safe**2)
        out = []
        for right in (False, True):
            c = self._coeffs(right)
            if c.size and c[0] != 0.0:
                raise ValueError("force does not vanish at the sonic point")
            # sum_k c_k x^(k-1) / (k+1), k >= 1
            q = np.array([c[k] / (k + 1.0) for k in range(1, c.size)]) if c.size > 1 else np.zeros(1)
            out.append(np.polynomial.polynomial.polyval(x, q))
        return self.amplitude * np.where(x < 0.0, out[0], out[1])

    def derivatives_at_0(self, order: int = 5, side: str = "left") -> np.ndarray:
        """f^(0..order)(0) from the given side (analytic kinds only)."""
        if not self.analytic:
            raise Unclassifiable("derivatives at 0 unavailable for tabulated forces")
        c = self._coeffs(side == "right")
        d = np.zeros(order + 1)
        for k in range(min(order + 1, c.size)):
            d[k] = c[k] * factorial(k)
        return self.amplitude * d


def linear_force(a: float = 1.0) -> ForceModel:
    return ForceModel(ForceKind.LINEAR, (float(a),))


def sonic_speed(J: float, gamma: float) -> float:
    if J <= 0 or gamma <= 1:
        raise ValueError("need J > 0 and gamma > 1")
    return gamma ** (1.0 / (gamma + 1.0)) * J ** ((gamma - 1.0) / (gamma + 1.0))


def sonic_level(J: float, gamma: float) -> float:
    """Minimum over t of t^2/2 + gamma J^(gamma-1) t^(1-gamma) / (gamma-1)."""
    return (gamma + 1.0) / (2.0 * (gamma - 1.0)) * sonic_speed(J, gamma) ** 2


def check_sign_pattern(force: ForceModel, L0: float, L1: float) -> None:
    left = np.linspace(L0, 0.0, SIGN_SAMPLES)[:-1]
    right = np.linspace(0.0, L1, SIGN_SAMPLES)[1:]
    if np.any(force(left) >= 0.0):
        raise SignPatternViolation("force must be negative on [L0, 0)")
    if np.any(force(right) <= 0.0):
        raise SignPatternViolation("force must be positive on (0, L1]")


def calibrate_force(shape: ForceModel, gas: GasConfig) -> ForceModel:
    """Rescale the amplitude so the flow passes the sonic point exactly at 0."""
    check_sign_pattern(shape, gas.L0, gas.L1)
    if shape.kind is ForceKind.TABLE and abs(float(shape._spline(0.0))) > 1e-12 * np.max(np.abs(shape.params[1])):
        raise SignPatternViolation("force must vanish at x1 = 0")
    target = sonic_level(gas.J, gas.gamma) - gas.B0
    current = -float(shape.primitive(gas.L0))  # int_{L0}^0 f
    if current >= 0.0:
        raise SignPatternViolation("int_{L0}^0 f must be negative")
    factor = target / current
    if not factor > 0.0:
        raise Infeasible(f"required amplitude factor {factor:.6g} is not positive")
    if abs(factor - 1.0) <= 1e-14:
        return shape
    return shape.with_amplitude(shape.amplitude * factor)


# -- energy function in the relative offset s = u/c_* - 1 ----------------------

def _series_coeffs(gamma: float, n: int = SERIES_TERMS) -> np.ndarray:
    """c_k (k = 2..n+1) with q(s) = sum c_k s^(k-2)."""
    alpha = 1.0 - gamma
    out = np.empty(n)
    binom = 1.0
    for k in range(1, n + 2):
        binom *= (alpha - k + 1.0) / k
        if k >= 2:
            out[k - 2] = binom / (gamma - 1.0)
    out[0] += 0.5
    return out


@dataclass(frozen=True)
class EnergyOffset:
    """q(s) = (E(c_*(1+s)) - E(c_*)) / (c_*^2 s^2) and its derivative."""

    gamma: float
    coeffs: np.ndarray

    @classmethod
    def for_gamma(cls, gamma: float) -> "EnergyOffset":
        return cls(gamma, _series_coeffs(gamma))

    def q(self, s: float) -> float:
        if abs(s) < SERIES_RADIUS:
            return float(np.polynomial.polynomial.polyval(s, self.coeffs))
        g = self.gamma
        b = s + 0.5 * s * s + np.expm1((1.0 - g) * np.log1p(s)) / (g - 1.0)
        return b / (s * s)

    def dq(self, s: float) -> float:
        if abs(s) < SERIES_RADIUS:
            d = np.polynomial.polynomial.polyder(self.coeffs)
            return float(np.polynomial.polynomial.polyval(s, d))
        g = self.gamma
        b = s + 0.5 * s * s + np.expm1((1.0 - g) * np.log1p(s)) / (g - 1.0)
        db = 1.0 + s - (1.0 + s) ** (-g)
        return (db * s - 2.0 * b) / s**3

    def w(self, s: float) -> float:
        """Signed square root of the energy offset: s sqrt(q(s))."""
        return s * sqrt(self.q(s))


def bernoulli_roots(level: float, J: float, gamma: float, max_iter: int = 200) -> tuple[float, float]:
    """Both roots t of t^2/2 + gamma J^(gamma-1) t^(1-gamma)/(gamma-1) = level.

    Bracketed bisection/Brent on (0, t*] and [t*, T_max], polished by Newton.
    """
    g = gamma
    K = g * J ** (g - 1.0) / (g - 1.0)

    def F(t):
        return 0.5 * t * t + K * t ** (1.0 - g) - level

    def dF(t):
        return t - (g - 1.0) * K * t ** (-g)

    t_star = sonic_speed(J, g)
    f_star = F(t_star)
    if f_star > 8.0 * np.finfo(float).eps * abs(level):
        raise NoRoot(f"level {level:.16g} below the sonic minimum")
    if f_star >= 0.0:  # sonic level up to rounding
        return t_star, t_star
    lo = t_star
    while F(lo) <= 0.0:
        lo *= 0.5
    hi = t_star
    while F(hi) <= 0.0:
        hi *= 2.0
    roots = []
    for a, b in ((lo, t_star), (t_star, hi)):
        try:
            t = brentq(F, a, b, xtol=1e-300, rtol=8.9e-16, maxiter=max_iter)
        except RuntimeError as exc:
            raise RootConvergenceFailure(str(exc)) from exc
        for _ in range(3):
            d = dF(t)
            if d == 0.0:
                break
            step = F(t) / d
            if not np.isfinite(step) or abs(step) > 1e-8 * t:
                break
            t -= step
        roots.append(t)
    return roots[0], roots[1]


# -- classification -------------------------------------------------------------

class SonicCase(str, enum.Enum):
    POSITIVE_ACCEL = "positive_accel"
    ZERO_ACCEL_SMOOTH = "zero_accel_smooth"
    ZERO_ACCEL_JUMP = "zero_accel_jump"
    HOLDER = "holder"


@dataclass(frozen=True)
class SonicClassification:
    case: SonicCase
    m: int
    predicted_exponent: float
    leading_derivative: float | None = None  # u^(exponent)(0) where defined

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "m": self.m,
            "predicted_exponent": self.predicted_exponent,
            "leading_derivative": self.leading_derivative,
        }


def classify_sonic_point(force: ForceModel, gamma: float, max_order: int = 25) -> SonicClassification:
    left = force.derivatives_at_0(max_order, "left")
    right = force.derivatives_at_0(max_order, "right")
    scale = max(np.max(np.abs(left)), np.max(np.abs(right)), 1e-300)
    tiny = 1e-14 * scale
    nz_left = np.flatnonzero(np.abs(left) > tiny)
    nz_right = np.flatnonzero(np.abs(right) > tiny)
    if nz_left.size == 0 or nz_right.size == 0:
        raise Unclassifiable("force vanishes to all available orders at 0")
    smooth = np.allclose(left, right, rtol=1e-14, atol=tiny)
    if smooth:
        n = int(nz_left[0])
        d = left[n]
        if n == 0 or d <= 0.0:
            raise Unclassifiable("first non-vanishing derivative at 0 must be positive and of order >= 1")
        if n == 1:
            nu = sqrt(d / (gamma + 1.0))
            return SonicClassification(SonicCase.POSITIVE_ACCEL, 0, 1.0, nu)
        if n % 4 == 1:
            m = (n - 1) // 4
            lead = factorial(2 * m + 1) * sqrt(2.0 * d / ((gamma + 1.0) * factorial(4 * m + 2)))
            return SonicClassification(SonicCase.ZERO_ACCEL_SMOOTH, m, 2.0 * m + 1.0, lead)
        if n % 4 == 3:
            m = (n + 1) // 4
            lead = factorial(2 * m) * sqrt(2.0 / (gamma + 1.0) * d / factorial(4 * m))
            return SonicClassification(SonicCase.ZERO_ACCEL_JUMP, m, 2.0 * m, lead)
        raise Unclassifiable(f"first non-vanishing derivative has even order {n}")
    n = int(min(nz_left[0], nz_right[0]))
    if n % 2 == 0 and left[n] < 0.0 < right[n] and nz_left[0] == nz_right[0]:
        m = n // 2
        return SonicClassification(SonicCase.HOLDER, m, m + 0.5, None)
    raise Unclassifiable("one-sided derivative pattern matches no known case")


# -- background solve -----------------------------------------------------------

@dataclass(frozen=True)
class BackgroundFlow1D:
    x: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    c2: np.ndarray
    k11: np.ndarray
    k1: np.ndarray
    du: np.ndarray
    s: np.ndarray
    f: np.ndarray
    gas: GasConfig
    force: ForceModel
    J: float
    c_star: float
    B0: float
    classification: SonicClassification

    @property
    def M(self) -> int:
        return self.x.size

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def mach(self) -> np.ndarray:
        return np.exp(0.5 * (self.gas.gamma + 1.0) * np.log1p(self.s))

    def at(self, x) -> dict:
        """Background state at arbitrary points of the flow interval."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s, du = _solve_offsets(x, self.gas, self.force, self.classification, self.h * SWITCH_CELLS)
        return _state_from_offsets(x, s, du, self.gas, self.force)

    def mass_residual(self) -> np.ndarray:
        return self.rho * self.u - self.J

    def bernoulli_residual(self) -> np.ndarray:
        g = self.gas.gamma
        level = self.force.primitive(self.x) - self.force.primitive(self.gas.L0)
        return 0.5 * self.u**2 + g / (g - 1.0) * self.rho ** (g - 1.0) - level - self.B0


def _newton_window(x: float, force: ForceModel, energy: EnergyOffset, c_star: float, nu: float) -> float:
    """Solve y sqrt(q(x y / c_*)) = sqrt(Phi(x) / x^2) for y, starting at nu."""
    rhs = float(force.primitive_over_x2(x))
    if rhs <= 0.0:
        raise NewtonDivergence(f"non-positive reduced primitive at x1={x:.3e}")
    target = sqrt(rhs)
    y = nu
    for _ in range(60):
        s = x * y / c_star
        q = energy.q(s)
        sq = sqrt(q)
        R = y * sq - target
        dR = sq + y * energy.dq(s) * (x / c_star) / (2.0 * sq)
        step = R / dR
        y -= step
        if not np.isfinite(y) or y <= 0.0:
            break
        if abs(step) <= 4e-16 * abs(y) or abs(R) <= 8.0 * np.finfo(float).eps * target:
            return y
    raise NewtonDivergence(f"desingularized Newton failed at x1={x:.3e}")


def _branch_offset(x: float, force: ForceModel, energy: EnergyOffset, c_star: float) -> float:
    phi = float(force.primitive(x))
    if not phi > 0.0:
        raise NoRoot(f"no Bernoulli root at x1={x:.6g}")
    target = np.copysign(sqrt(phi), x) / c_star

    def g(s):
        return energy.w(s) - target

    if x < 0.0:
        lo = -0.5
        while g(lo) > 0.0:
            lo = -1.0 + 0.5 * (1.0 + lo) * 1e-3
            if lo <= -1.0 + 1e-300:
                raise NoRoot("subsonic branch escapes to zero velocity")
        a, b = lo, 0.0
    else:
        hi = 1.0
        while g(hi) < 0.0:
            hi *= 2.0
        a, b = 0.0, hi
    try:
        return brentq(g, a, b, xtol=1e-300, rtol=8.9e-16, maxiter=400)
    except RuntimeError as exc:
        raise RootConvergenceFailure(str(exc)) from exc


def _solve_offsets(x, gas, force, classification, window):
    g = gas.gamma
    J = gas.J
    c_star = sonic_speed(J, g)
    energy = EnergyOffset.for_gamma(g)
    positive = classification.case is SonicCase.POSITIVE_ACCEL
    nu = classification.leading_derivative if positive else None
    s = np.zeros(x.size)
    du = np.full(x.size, np.nan)
    for i, xi in enumerate(x):
        if xi == 0.0:
            s[i] = 0.0
            if positive:
                du[i] = nu
            elif classification.case in (SonicCase.ZERO_ACCEL_SMOOTH, SonicCase.ZERO_ACCEL_JUMP):
                du[i] = 0.0
            else:
                du[i] = np.inf
        elif positive and abs(xi) < window:
            s[i] = xi * _newton_window(xi, force, energy, c_star, nu) / c_star
        else:
            s[i] = _branch_offset(xi, force, energy, c_star)
    fx = force(x)
    nz = s != 0.0
    # u' = u f / (u^2 - c^2) = -u f / (c^2 k11), all factors cancellation-free
    u = c_star * (1.0 + s[nz])
    c2 = c_star**2 * np.exp((1.0 - g) * np.log1p(s[nz]))
    k11 = -np.expm1((g + 1.0) * np.log1p(s[nz]))
    du[nz] = -u * fx[nz] / (c2 * k11)
    return s, du


def _state_from_offsets(x, s, du, gas, force) -> dict:
    g = gas.gamma
    J = gas.J
    c_star = sonic_speed(J, g)
    u = c_star * (1.0 + s)
    rho = J / u
    c2 = c_star**2 * np.exp((1.0 - g) * np.log1p(s))
    k11 = -np.expm1((g + 1.0) * np.log1p(s))
    f = force(x)
    k1 = (f - (g + 1.0) * u * du) / c2
    return {"x": x, "u": u, "rho": rho, "c2": c2, "k11": k11, "k1": k1, "du": du, "s": s, "f": f}


def uniform_grid(L0: float, L1: float, M: int) -> np.ndarray:
    return np.linspace(L0, L1, M)


def solve_background(gas: GasConfig, force: ForceModel, M: int,
                     classification: SonicClassification | None = None,
                     x: np.ndarray | None = None) -> BackgroundFlow1D:
    """Background flow on a uniform grid of M nodes over [L0, L1] (or on x)."""
    if classification is None:
        classification = classify_sonic_point(force, gas.gamma) if force.analytic else \
            SonicClassification(SonicCase.POSITIVE_ACCEL, 0, 1.0, sqrt(float(force._spline(0.0, 1)) * force.amplitude / (gas.gamma + 1.0)))
    if force.analytic:
        actual = classify_sonic_point(force, gas.gamma)
        if actual.case is not classification.case:
            raise ClassificationMismatch(f"force is {actual.case.value}, not {classification.case.value}")
    if x is None:
        x = uniform_grid(gas.L0, gas.L1, M)
    h = float(x[1] - x[0])
    s, du = _solve_offsets(x, gas, force, classification, SWITCH_CELLS * h)
    st = _state_from_offsets(x, s, du, gas, force)
    return BackgroundFlow1D(
        x=x, u=st["u"], rho=st["rho"], c2=st["c2"], k11=st["k11"], k1=st["k1"], du=du, s=s,
        f=st["f"], gas=gas, force=force, J=gas.J, c_star=sonic_speed(gas.J, gas.gamma), B0=gas.B0,
        classification=classification,
    )


def background_coefficients(flow: BackgroundFlow1D) -> tuple[np.ndarray, np.ndarray]:
    return flow.k11, flow.k1


def sonic_limit_k1(flow: BackgroundFlow1D) -> float:
    """Removable-singularity value of k1 at the sonic point."""
    g = flow.gas.gamma
    d1 = flow.force.derivatives_at_0(1)[1]
    return -sqrt((g + 1.0) * d1) / flow.c_star


# -- multiplier certificate ----------------------------------------------------

@dataclass(frozen=True)
class MultiplierCertificate:
    d0: float
    kappa_star: float
    min_margin_6: np.ndarray
    min_margin_7: np.ndarray

    def to_dict(self) -> dict:
        return {
            "d0": self.d0,
            "kappa_star": self.kappa_star,
            "min_margin_6": [float(v) for v in self.min_margin_6],
            "min_margin_7": [float(v) for v in self.min_margin_7],
        }


def _margins(x, a11, a11p, a1, d0, jmax6, jmax7):
    m6 = np.array([np.min(-(2.0 * a1 + (2 * j - 1) * a11p)) for j in range(jmax6 + 1)])
    d = 6.0 * (x - d0)
    # (a1 + j a11') d - (a11 d)'/2 with d' = 6
    m7 = np.array([np.min((a1 + j * a11p) * d - 0.5 * (a11p * d + 6.0 * a11)) for j in range(jmax7 + 1)])
    return m6, m7


def _search_d0(x, a11, a11p, a1, start, d0=None):
    if d0 is not None:
        return d0, _margins(x, a11, a11p, a1, d0, 3, 3)
    worst = -np.inf
    for k in range(1, 201):
        cand = start + 0.5 * k
        m6, m7 = _margins(x, a11, a11p, a1, cand, 3, 3)
        if np.min(m7) >= 4.0:
            return cand, (m6, m7)
        worst = max(worst, float(np.min(m7)))
    raise NoCertificate(f"no d0 in ({start}, {start + 100}] gives margin 4; best worst-case margin {worst:.4g}")


def verify_multiplier(flow: BackgroundFlow1D, d0: float | None = None) -> MultiplierCertificate:
    if flow.classification.case is not SonicCase.POSITIVE_ACCEL:
        raise NoCertificate("multiplier certificate needs a positive-acceleration flow")
    k11p = derivative_matrix(flow.M, flow.h, 1) @ flow.k11
    found, (m6, m7) = _search_d0(flow.x, flow.k11, k11p, flow.k1, flow.gas.L1, d0)
    kappa = float(np.min(m6))
    if not kappa > 0.0:
        raise NoCertificate(f"kappa_* = {kappa:.4g} is not positive")
    if d0 is not None and np.min(m7) < 4.0:
        raise NoCertificate(f"d0 = {d0} gives margin {np.min(m7):.4g} < 4")
    return MultiplierCertificate(d0=float(found), kappa_star=kappa, min_margin_6=m6, min_margin_7=m7)


# -- extension to a longer cylinder --------------------------------------------------

@dataclass(frozen=True)
class ExtendedBackground:
    flow: BackgroundFlow1D          # background solved on the extended grid
    a11: np.ndarray
    a11p: np.ndarray
    a1: np.ndarray
    zeta1: np.ndarray
    zeta2: np.ndarray
    k0: float
    layer: float
    L2: float
    n_inner: int                    # nodes belonging to [L0, L1]
    d0: float
    kappa_star: float
    min_margin_8: np.ndarray
    min_margin_9: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.flow.x


def extension_cutoffs(x, L1: float, layer: float, deriv: int = 0):
    zeta1 = falling_cutoff(x, L1 + 2 * layer, L1 + 4 * layer, deriv)
    zeta2 = falling_cutoff(x, L1 + layer, L1 + 2 * layer, deriv)
    return zeta1, zeta2


def extend_background(flow: BackgroundFlow1D, k0: float | None = None, layer: float | None = None,
                      max_doublings: int = 40) -> ExtendedBackground:
    """Background continued to [L0, ~2 L1] with cutoffs that turn the exit elliptic."""
    gas = flow.gas
    L1 = gas.L1
    layer = L1 / 20.0 if layer is None else layer
    h = flow.h
    extra = int(np.ceil(L1 / h - 1e-9))
    x = np.concatenate((flow.x, L1 + h * np.arange(1, extra + 1)))
    L2 = float(x[-1])
    probe = np.linspace(0.0, L2, 8 * SIGN_SAMPLES)[1:]
    if np.any(flow.force(probe) <= 0.0):
        raise ExtensionFailure("force extension is not positive on (0, 2 L1]")
    ext = solve_background(gas, flow.force, x.size, flow.classification, x=x)
    k11p = derivative_matrix(ext.M, h, 1) @ ext.k11
    z1, z2 = extension_cutoffs(x, L1, layer)
    z1p, _ = extension_cutoffs(x, L1, layer, 1)
    a11 = ext.k11 * z1 + (1.0 - z1)
    a11p = k11p * z1 + (ext.k11 - 1.0) * z1p

    # k0 cannot move the margins where zeta2 = 1, so the target kappa_* is
    # the smaller of the certified one and what the untouched part delivers
    kappa = verify_multiplier(flow).kappa_star
    untouched = z2 == 1.0
    for j in range(5):
        kappa = min(kappa, float(np.min(-(2.0 * ext.k1 + (2 * j - 1) * a11p)[untouched])))
    if not kappa > 0.0:
        raise ExtensionFailure("background margins fail before the cutoffs act")
    kk = 1.0 if k0 is None else float(k0)
    for _ in range(max_doublings):
        a1 = ext.k1 * z2 - kk * (1.0 - z2)
        m8 = np.array([np.min(-(2.0 * a1 + (2 * j - 1) * a11p)) for j in range(5)])
        if np.min(m8) >= kappa or k0 is not None:
            break
        kk *= 2.0
    else:
        raise ExtensionFailure(f"k0 doubling did not reach margin kappa_* = {kappa:.4g}")
    if np.min(m8) < kappa:
        raise ExtensionFailure(f"k0 = {kk} leaves margin {np.min(m8):.4g} < kappa_* = {kappa:.4g}")
    d0, (_, m9) = _search_d0(x, a11, a11p, a1, L2)
    return ExtendedBackground(
        flow=ext, a11=a11, a11p=a11p, a1=a1, zeta1=z1, zeta2=z2, k0=kk, layer=layer, L2=L2,
        n_inner=flow.M, d0=d0, kappa_star=kappa, min_margin_8=m8, min_margin_9=m9,
    )
