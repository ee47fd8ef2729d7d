"""Invariant suites shared by the `verify` subcommand and the test-suite."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .background import BackgroundFlow1D, verify_multiplier
from .basis import RadialBasis, build_basis
from .errors import CertificateError
from .fields import Field2D
from .norms import (algebra_check, cartesian_seminorm_sq, lifted_identity_sq, linf_bound_check,
                    weighted_norms)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}"


def random_band_limited(rng: np.random.Generator, x: np.ndarray, basis: RadialBasis, modes: int = 4,
                        harmonics: int = 3, axis_zero: bool = False) -> Field2D:
    """Smooth field sum_j sum_k c_jk cos(k pi s) b_j(r), s in [0, 1] along x1.

    With ``axis_zero`` the first mode is adjusted so the field vanishes on r = 0.
    """
    modes = min(modes, basis.N)
    s = (x - x[0]) / (x[-1] - x[0])
    c = rng.standard_normal((modes, harmonics)) / (1.0 + np.arange(modes))[:, None]
    phase = rng.uniform(0.0, np.pi, size=(modes, harmonics))
    k = np.arange(harmonics)
    A = np.zeros((x.size, basis.N))
    A[:, :modes] = np.einsum("jk,xjk->xj", c, np.cos(np.pi * k * s[:, None, None] + phase[None]))
    if axis_zero:
        b0 = basis.values[:modes, 0]
        A[:, 0] = -(A[:, 1:modes] @ b0[1:]) / b0[0]
    return Field2D.from_modes(A, x, basis)


def multiplier_suite(flow: BackgroundFlow1D) -> SuiteResult:
    try:
        cert = verify_multiplier(flow)
    except CertificateError as exc:
        return SuiteResult("multiplier certificate", False, {"error": str(exc)})
    ok = bool(np.min(cert.min_margin_6) > 0.0 and np.min(cert.min_margin_7) >= 4.0)
    return SuiteResult("multiplier certificate", ok, cert.to_dict())


def orthonormality_suite(N: int = 16, Q: int = 128, tol: float = 1e-10) -> SuiteResult:
    basis = build_basis(N, Q)
    gram_dev = float(np.max(np.abs(basis.gram() - np.eye(N))))
    eig_res = float(np.max(np.abs(basis.eigen_residual()[:, 1:-1])) / max(basis.eigenvalues[-1], 1.0))
    increasing = bool(np.all(np.diff(basis.eigenvalues) > 0.0))
    ok = gram_dev <= tol and eig_res <= 1e-9 and increasing
    return SuiteResult("basis orthonormality", ok,
                       {"gram_deviation": gram_dev, "relative_eigen_residual": eig_res, "increasing": increasing})


def norm_equivalence_suite(rng: np.random.Generator, count: int = 5, M: int = 41, N: int = 8, Q: int = 48,
                           tol: float = 1e-8) -> SuiteResult:
    """Lifted Cartesian norms against the weighted closed forms, k = 0..4."""
    basis = build_basis(N, Q)
    x = np.linspace(-1.0, 1.0, M)
    worst = 0.0
    for _ in range(count):
        f = random_band_limited(rng, x, basis)
        cart = 0.0
        for k in range(5):
            cart += cartesian_seminorm_sq(f, k)
            exact = 2.0 * np.pi * lifted_identity_sq(f, k)
            worst = max(worst, abs(cart - exact) / exact)
    return SuiteResult("norm equivalence", worst <= tol, {"max_relative_gap": worst, "fields": count})


def _suite_ratios(seeds, M: int, basis: RadialBasis) -> tuple[float, float]:
    x = np.linspace(-1.0, 1.0, M)
    alg, linf = [], []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        f = random_band_limited(rng, x, basis)
        g = random_band_limited(rng, x, basis, axis_zero=True)
        lhs, rhs = algebra_check(f, g, 2)
        alg.append(lhs / rhs)
        linf.append(linf_bound_check(g)[2])
    return max(alg), max(linf)


def algebra_linf_suite(seed: int = 0, count: int = 50, M: int = 41, N: int = 8, Q: int = 48) -> SuiteResult:
    """Banach-algebra and sup-bound ratios over random fields, then on a grid twice as fine."""
    basis = build_basis(N, Q)
    seeds = np.random.SeedSequence(seed).generate_state(count)
    coarse = _suite_ratios(seeds, M, basis)
    fine = _suite_ratios(seeds, 2 * M - 1, basis)
    drift = [max(a, b) / min(a, b) for a, b in zip(coarse, fine)]
    ok = all(np.isfinite(v) and v < 2.0 for v in drift)
    return SuiteResult("algebra and sup bounds", ok, {
        "algebra_ratio": [coarse[0], fine[0]],
        "linf_ratio": [coarse[1], fine[1]],
        "drift": drift,
        "fields": count,
    })


def weighted_norm_smoke(basis: RadialBasis) -> SuiteResult:
    """psi = x1 on (-1, 1) x (0, 1): ||psi||^2 = 1/3 and ||d_x psi||^2 = 1."""
    x = np.linspace(-1.0, 1.0, 41)
    A = np.zeros((x.size, basis.N))
    A[:, 0] = x / basis.values[0, 0]
    rep = weighted_norms(Field2D.from_modes(A, x, basis), 1)
    ok = abs(rep.l2r**2 - 1.0 / 3.0) < 1e-10 and abs(rep.components["grad"] - 1.0) < 1e-10
    return SuiteResult("weighted norm closed form", ok, {"l2r_sq": rep.l2r**2, "grad_sq": rep.components["grad"]})


def run_all(flow: BackgroundFlow1D, seed: int = 0) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    return [
        multiplier_suite(flow),
        orthonormality_suite(),
        weighted_norm_smoke(build_basis(4, 16)),
        norm_equivalence_suite(rng),
        algebra_linf_suite(seed),
    ]
