"""Neumann eigenbasis of the axisymmetric radial Laplacian on [0, 1].

Modes are b_j(r) = c_j J0(k_j r) with k_1 = 0 and k_j the (j-1)-th positive
zero of J1, orthonormal for the inner product int_0^1 f g r dr.

Besides b_j itself the basis carries the regular radial jet
D^m b_j, where D = (1/r) d/dr.  Every radial derivative, and every term with
a 1/r factor that the weighted norms need, is a polynomial in r times some
D^m b_j, so nothing is ever divided by r numerically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionMismatch, RootBracketFailure

SERIES_CUTOFF = 2.0
JET_DEPTH = 5


def _series_jn_over_zn(m: int, z: np.ndarray) -> np.ndarray:
    """J_m(z) / z**m from the ascending series (good for small z)."""
    q = -(z * z) / 4.0
    term = np.full_like(z, 1.0 / (2.0**m * factorial(m)))
    total = term.copy()
    for k in range(1, 40):
        term = term * q / (k * (m + k))
        total += term
    return total


def _miller(z: np.ndarray, nmax: int) -> np.ndarray:
    """J_0..J_nmax at positive z by backward recurrence, normalized by
    J0 + 2 (J2 + J4 + ...) = 1."""
    zmax = float(np.max(z))
    start = 2 * ((nmax + int(zmax) + 30 + int(np.sqrt(60.0 * (zmax + nmax)))) // 2)
    out = np.zeros((nmax + 1, z.size))
    jp1 = np.zeros_like(z)
    jk = np.full_like(z, 1e-300)
    norm = np.zeros_like(z)
    for k in range(start, 0, -1):
        jm1 = (2.0 * k / z) * jk - jp1
        jp1, jk = jk, jm1
        if k - 1 <= nmax:
            out[k - 1] = jk
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * jk
        big = np.abs(jk) > 1e250
        if np.any(big):
            jk[big] *= 1e-250
            jp1[big] *= 1e-250
            norm[big] *= 1e-250
            out[:, big] *= 1e-250
    norm += jk
    return out / norm


def bessel_j(n: int, z) -> np.ndarray:
    """Bessel function of the first kind J_n for real z (n >= 0)."""
    z = np.asarray(z, dtype=float)
    flat = np.abs(z.ravel())
    res = np.empty_like(flat)
    small = flat <= SERIES_CUTOFF
    if np.any(small):
        res[small] = _series_jn_over_zn(n, flat[small]) * flat[small] ** n
    if np.any(~small):
        res[~small] = _miller(flat[~small], n)[n]
    sign = np.where((z.ravel() < 0) & (n % 2 == 1), -1.0, 1.0)
    return (sign * res).reshape(z.shape)


def jn_over_zn(n: int, z) -> np.ndarray:
    """J_n(z) / z**n, regular at z = 0 where it equals 1 / (2**n n!)."""
    z = np.abs(np.asarray(z, dtype=float))
    flat = z.ravel()
    res = np.empty_like(flat)
    small = flat <= SERIES_CUTOFF
    if np.any(small):
        res[small] = _series_jn_over_zn(n, flat[small])
    if np.any(~small):
        res[~small] = _miller(flat[~small], n)[n] / flat[~small] ** n
    return res.reshape(z.shape)


@dataclass(frozen=True)
class WeightedQuadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.nodes.size

    def integrate(self, samples: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.tensordot(samples, self.weights, axes=([axis], [0]))


def quadrature_rule(Q: int) -> WeightedQuadrature:
    """Gauss-Legendre rule on (0, 1) with the weight r folded in."""
    if Q < 8:
        raise ValueError("quadrature order must be at least 8")
    xi, w = np.polynomial.legendre.leggauss(Q)
    r = 0.5 * (1.0 + xi)
    return WeightedQuadrature(nodes=r, weights=0.5 * w * r)


def j1_zero_guess(s: int) -> float:
    # McMahon expansion for the s-th positive zero of J1
    beta = (s + 0.25) * np.pi
    return beta - 3.0 / (8.0 * beta) + 3.0 / (128.0 * beta**3)


def find_eigenvalues(N: int) -> np.ndarray:
    """Eigenvalues 0 = lambda_1 < lambda_2 < ... < lambda_N."""
    if N < 1:
        raise ValueError("N must be positive")
    lam = np.zeros(N)

    def dprofile(k):
        # derivative at r = 1 of J0(k r), up to the factor -k
        return float(bessel_j(1, k))

    for s in range(1, N):
        g = j1_zero_guess(s)
        lo, hi = g - 0.5, g + 0.5
        if dprofile(lo) * dprofile(hi) > 0:
            raise RootBracketFailure(f"no sign change around zero {s} of J1 near {g:.6f}")
        k = brentq(dprofile, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        lam[s] = k * k
    if np.any(np.diff(lam) <= 0):
        raise RootBracketFailure("eigenvalues are not strictly increasing")
    return lam


@dataclass(frozen=True)
class RadialBasis:
    """Orthonormal modes sampled on an extended radial grid.

    ``r`` holds the quadrature nodes with r = 0 and r = 1 appended at both
    ends; ``w`` are the matching weights (zero at the two end points), so
    boundary values ride along with every nodal computation for free.
    """

    eigenvalues: np.ndarray
    normalization: np.ndarray
    quadrature: WeightedQuadrature
    r: np.ndarray
    w: np.ndarray
    jet: np.ndarray = field(repr=False)  # (JET_DEPTH, N, Q+2): D^m b_j(r)

    @property
    def N(self) -> int:
        return self.eigenvalues.size

    @property
    def values(self) -> np.ndarray:
        return self.jet[0]

    def radial_derivative(self, n: int) -> np.ndarray:
        """d^n b_j / dr^n on the extended grid, shape (N, Q+2)."""
        return radial_derivative_from_jet(self.jet, n, self.r)

    @property
    def d1(self) -> np.ndarray:
        return self.radial_derivative(1)

    @property
    def d2(self) -> np.ndarray:
        return self.radial_derivative(2)

    def project(self, samples: np.ndarray) -> np.ndarray:
        """Modal coefficients of samples given on the extended radial grid
        (last axis of length Q+2) or on the bare quadrature nodes (Q)."""
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[-1]
        if n == self.r.size:
            return samples @ (self.w * self.values).T
        if n == self.quadrature.order:
            return samples @ (self.quadrature.weights * self.values[:, 1:-1]).T
        raise DimensionMismatch(f"expected {self.r.size} or {self.quadrature.order} radial samples, got {n}")

    def reconstruct(self, coefficients: np.ndarray) -> np.ndarray:
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape[-1] != self.N:
            raise DimensionMismatch(f"expected {self.N} coefficients, got {coefficients.shape[-1]}")
        return coefficients @ self.values

    def gram(self) -> np.ndarray:
        B = self.values
        return (B * self.w) @ B.T

    def eigen_residual(self) -> np.ndarray:
        lap = self.radial_derivative(2) + self.jet[1]  # b'' + b'/r
        return -lap - self.eigenvalues[:, None] * self.values


def radial_derivative_terms(n: int) -> dict[tuple[int, int], float]:
    """d^n/dr^n expressed as sum c * r^p * D^m, where D = (1/r) d/dr.

    Uses d/dr (r^p D^m g) = p r^(p-1) D^m g + r^(p+1) D^(m+1) g.
    """
    terms = {(0, 0): 1.0}
    for _ in range(n):
        nxt: dict[tuple[int, int], float] = {}
        for (p, m), c in terms.items():
            if p:
                nxt[(p - 1, m)] = nxt.get((p - 1, m), 0.0) + c * p
            nxt[(p + 1, m + 1)] = nxt.get((p + 1, m + 1), 0.0) + c
        terms = nxt
    return terms


def radial_derivative_from_jet(jet: np.ndarray, n: int, r: np.ndarray, shift: int = 0) -> np.ndarray:
    """d^n/dr^n of D^shift g, given jet[m] = D^m g sampled at radii r."""
    out = np.zeros(jet.shape[1:])
    for (p, m), c in radial_derivative_terms(n).items():
        out = out + c * r**p * jet[m + shift]
    return out


def build_basis(N: int, Q: int) -> RadialBasis:
    if Q < 4 * N:
        raise ValueError(f"quadrature order {Q} below the 4N = {4 * N} safeguard")
    quad = quadrature_rule(Q)
    lam = find_eigenvalues(N)
    k = np.sqrt(lam)
    r = np.concatenate(([0.0], quad.nodes, [1.0]))
    w = np.concatenate(([0.0], quad.weights, [0.0]))
    jet = np.zeros((JET_DEPTH, N, r.size))
    z = np.outer(k, r)
    for m in range(JET_DEPTH):
        # D^m J0(k r) = (-k^2)^m J_m(z) / z^m
        jet[m] = (-(k[:, None] ** 2)) ** m * jn_over_zn(m, z)
    norm = 1.0 / np.sqrt((jet[0][:, 1:-1] ** 2) @ quad.weights)
    jet *= norm[None, :, None]
    return RadialBasis(eigenvalues=lam, normalization=norm, quadrature=quad, r=r, w=w, jet=jet)
