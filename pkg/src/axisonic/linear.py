"""Galerkin / sigma-regularized solver for the linearized mixed-type equation

    k11 psi_xx + 2 k12 psi_xr + psi_rr + psi_r / r + k1 psi_x + k2 psi_r = F0

with psi(L0, r) = 0 and Neumann conditions in r.  psi is expanded in the
radial eigenbasis, which turns the problem into a coupled system of ODEs in
x1 for the modal amplitudes.  A small third-order term sigma A''' makes the
system well posed; sigma is then driven to zero along a geometric schedule.

Grid layout: physical nodes 0..M-1 plus one ghost node on each side.  The
ghost rows carry the extra boundary conditions of the regularized problem
(A'' = 0 at the inlet, and A'' = 0 or A' = 0 at the exit), so that at
sigma -> 0 they decouple from the physical unknowns whenever the matching
boundary layer is thinner than a cell.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, solve_banded

from .background import BackgroundFlow1D, ExtendedBackground
from .basis import RadialBasis
from .errors import NoSigmaConvergence, SingularAssembly, SingularMatrix
from .fd import derivative_matrix, fd_weights
from .fields import Field2D

Exit = Literal["free", "neumann"]

SIGMA0 = 1e-2
LEVELS = 40
TOL_SIGMA = 1e-8


@dataclass
class CoefficientSet:
    """Nodal coefficients on the x1 grid times the extended radial grid."""

    x: np.ndarray
    k11: np.ndarray
    k12: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    F0: np.ndarray
    dr_k12: np.ndarray | None = None     # d k12 / dr, for the certificate
    k12_over_r: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.x.size

    def with_source(self, F0: np.ndarray) -> "CoefficientSet":
        return CoefficientSet(self.x, self.k11, self.k12, self.k1, self.k2, F0,
                              self.dr_k12, self.k12_over_r, dict(self.flags))


def compatibility_flags(c: CoefficientSet, basis: RadialBasis, tol: float = 1e-8) -> dict:
    """Boundary identities at r = 0 and r = 1 (first and last radial column)."""
    def small(arr, ref):
        scale = max(float(np.max(np.abs(ref))), 1.0)
        return bool(np.max(np.abs(arr)) <= tol * scale)

    def edge_slope(arr):
        # radial slope at the ends from the two nearest samples
        r = basis.r
        left = (arr[:, 1] - arr[:, 0]) / (r[1] - r[0])
        right = (arr[:, -1] - arr[:, -2]) / (r[-1] - r[-2])
        return left, right

    flags = {
        "k12_axis": small(c.k12[:, 0], c.k12),
        "k12_wall": small(c.k12[:, -1], c.k12),
        "k2_axis": small(c.k2[:, 0], c.k2),
        "k2_wall": small(c.k2[:, -1], c.k2),
        "k11_inlet_positive": bool(np.all(c.k11[0] > 0.0)),
        "k11_exit_negative": bool(np.all(c.k11[-1] < 0.0)),
    }
    return flags


def background_coefficient_set(flow: BackgroundFlow1D, basis: RadialBasis, F0: np.ndarray | None = None) -> CoefficientSet:
    R = basis.r.size
    ones = np.ones((1, R))
    k11 = flow.k11[:, None] * ones
    k1 = flow.k1[:, None] * ones
    zero = np.zeros_like(k11)
    F0 = zero.copy() if F0 is None else F0
    c = CoefficientSet(flow.x, k11, zero.copy(), k1, zero.copy(), F0, zero.copy(), zero.copy())
    c.flags = compatibility_flags(c, basis)
    return c


# -- Galerkin projection ------------------------------------------------------------

@dataclass
class GalerkinMatrices:
    a: np.ndarray   # (M, N, N), indexed [i, j, m]
    b: np.ndarray
    c: np.ndarray
    F: np.ndarray   # (M, N)

    @property
    def N(self) -> int:
        return self.F.shape[1]

    @property
    def M(self) -> int:
        return self.F.shape[0]


def galerkin_matrices(coeffs: CoefficientSet, basis: RadialBasis) -> GalerkinMatrices:
    B = basis.values
    dB = basis.d1
    w = basis.w
    a = np.einsum("iq,jq,mq->ijm", coeffs.k11 * w, B, B, optimize=True)
    b = np.einsum("iq,jq,mq->ijm", coeffs.k1 * w, B, B, optimize=True)
    b += 2.0 * np.einsum("iq,jq,mq->ijm", coeffs.k12 * w, dB, B, optimize=True)
    c = np.einsum("iq,jq,mq->ijm", coeffs.k2 * w, dB, B, optimize=True)
    c -= np.diag(basis.eigenvalues)[None]
    F = (coeffs.F0 * w) @ B.T
    return GalerkinMatrices(a=a, b=b, c=c, F=F)


# -- assembly ------------------------------------------------------------------------

@dataclass
class SigmaSystem:
    sigma: float
    matrix: sp.csr_matrix
    rhs: np.ndarray
    N: int
    M: int
    h: float
    exit: str
    free_node: int | None = None   # node whose equations are traded for free amplitudes
    select_nodes: int | None = None  # curvature selection looks at nodes [0, select_nodes)

    @property
    def free_rows(self) -> np.ndarray | None:
        if self.free_node is None:
            return None
        return (self.free_node + 1) * self.N + np.arange(self.N)

    @property
    def bandwidth(self) -> tuple[int, int]:
        coo = self.matrix.tocoo()
        d = coo.col - coo.row
        return int(max(0, -d.min())), int(max(0, d.max()))


_D1 = np.array([-0.5, 0.0, 0.5])
_D2 = np.array([1.0, -2.0, 1.0])
_D3 = np.array([-0.5, 1.0, 0.0, -1.0, 0.5])


def _block_entries(coef: np.ndarray, i_rows: np.ndarray, i_cols: np.ndarray, N: int):
    """COO entries of node blocks: coef[k, j, m] couples equation (i_rows[k], m) to unknown (i_cols[k], j)."""
    K = i_rows.size
    m = np.arange(N)
    rows = (i_rows[:, None, None] + 1) * N + m[None, None, :]
    cols = (i_cols[:, None, None] + 1) * N + m[None, :, None]
    return (np.broadcast_to(rows, (K, N, N)).ravel(), np.broadcast_to(cols, (K, N, N)).ravel(),
            np.asarray(coef, dtype=float).ravel())


def _diag_entries(value: float | np.ndarray, i_rows: np.ndarray, i_cols: np.ndarray, N: int):
    m = np.arange(N)
    rows = ((i_rows[:, None] + 1) * N + m).ravel()
    cols = ((i_cols[:, None] + 1) * N + m).ravel()
    vals = np.broadcast_to(np.asarray(value, dtype=float).reshape(-1, 1), (i_rows.size, N)).ravel()
    return rows, cols, vals


def _assemble_parts(mats: GalerkinMatrices, h: float, exit: Exit):
    """(sigma-free matrix, third-derivative matrix, rhs); the system is base + sigma * third."""
    N, M = mats.N, mats.M
    if M < 6:
        raise SingularAssembly(f"grid of {M} nodes is too coarse for the stencils")
    n = (M + 2) * N
    parts = []
    interior = np.arange(1, M - 1) if exit == "free" else np.arange(1, M)
    for offs, wts, coef, scale in (
        ((-1, 0, 1), _D2, mats.a, h**2),
        ((-1, 0, 1), _D1, mats.b, h),
    ):
        for off, wgt in zip(offs, wts):
            if wgt != 0.0:
                parts.append(_block_entries(coef[interior] * (wgt / scale), interior, interior + off, N))
    if exit == "free":
        last = np.array([M - 1])
        for off, wgt in zip(range(-3, 1), fd_weights([-3, -2, -1, 0], 2)):
            parts.append(_block_entries(mats.a[last] * (wgt / h**2), last, last + off, N))
        for off, wgt in zip(range(-2, 1), fd_weights([-2, -1, 0], 1)):
            parts.append(_block_entries(mats.b[last] * (wgt / h), last, last + off, N))
    eq = np.arange(1, M)
    parts.append(_block_entries(mats.c[eq], eq, eq, N))
    # inlet ghost row A''(L0) = 0 and the Dirichlet row
    for k, wgt in zip((-1, 0, 1), _D2):
        parts.append(_diag_entries(wgt / h**2, np.array([-1]), np.array([k]), N))
    parts.append(_diag_entries(1.0, np.array([0]), np.array([0]), N))
    if exit == "free":
        for k, wgt in zip((M - 2, M - 1, M), _D2):  # A''(L1) = 0
            parts.append(_diag_entries(wgt / h**2, np.array([M]), np.array([k]), N))
    else:
        for k, wgt in zip((M - 2, M), (-0.5, 0.5)):  # A'(L1) = 0
            parts.append(_diag_entries(wgt / h, np.array([M]), np.array([k]), N))
    rows, cols, vals = (np.concatenate(z) for z in zip(*parts))
    base = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    base.sum_duplicates()

    parts = []
    centered = np.arange(1, M - 1)
    for off, wgt in zip(range(-2, 3), _D3):
        if wgt != 0.0:
            parts.append(_diag_entries(wgt / h**3, centered, centered + off, N))
    last = np.array([M - 1])
    for off, wgt in zip(range(-3, 2), fd_weights([-3, -2, -1, 0, 1], 3)):
        parts.append(_diag_entries(wgt / h**3, last, last + off, N))
    rows, cols, vals = (np.concatenate(z) for z in zip(*parts))
    third = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    rhs = np.zeros(n)
    rhs[N * 2: N * (M + 1)] = mats.F[1:].ravel()
    return base, third, rhs


def _free_rows_parts(parts, N: int, M: int, free_node: int):
    """Replace the equations at free_node by identity rows (once per schedule)."""
    if not 1 <= free_node <= M - 1:
        raise SingularAssembly(f"free node {free_node} outside the equation rows")
    base, third, rhs = parts
    rows = (free_node + 1) * N + np.arange(N)
    keep = np.ones(base.shape[0])
    keep[rows] = 0.0
    mask = sp.diags(keep)
    base = (mask @ base + sp.csr_matrix((np.ones(N), (rows, rows)), shape=base.shape)).tocsr()
    third = (mask @ third).tocsr()
    rhs = rhs * keep
    return base, third, rhs


def assemble_sigma_system(mats: GalerkinMatrices, sigma: float, h: float, exit: Exit = "free",
                          parts=None, free_node: int | None = None,
                          select_nodes: int | None = None) -> SigmaSystem:
    """Global sparse matrix over A_j at nodes -1..M (node-major ordering).

    With ``free_node`` the equations at that node are replaced by identity
    rows, leaving an N-parameter family of discrete solutions; solve_sigma
    then picks the member with the smallest x1 second derivative.  ``parts``
    may carry a precomputed (base, third, rhs) triple, already freed.
    """
    if parts is None:
        parts = _assemble_parts(mats, h, exit)
        if free_node is not None:
            parts = _free_rows_parts(parts, mats.N, mats.M, free_node)
    base, third, rhs = parts
    A = base + sigma * third if sigma != 0.0 else base.copy()
    return SigmaSystem(sigma=sigma, matrix=A.tocsr(), rhs=rhs, N=mats.N, M=mats.M, h=h, exit=exit,
                       free_node=free_node, select_nodes=select_nodes)


def _banded_solve(system: SigmaSystem, rhs: np.ndarray) -> np.ndarray:
    A = system.matrix
    l, u = system.bandwidth
    n = A.shape[0]
    coo = A.tocoo()
    ab = np.zeros((l + u + 1, n))
    ab[u + coo.row - coo.col, coo.col] = coo.data
    try:
        sol = solve_banded((l, u), ab, rhs, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SingularMatrix(f"sigma={system.sigma:g}, M={system.M}, N={system.N}: {exc}; try a larger sigma") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularMatrix(f"non-finite solution at sigma={system.sigma:g}, M={system.M}; try a larger sigma")
    return sol


def solve_sigma(system: SigmaSystem) -> np.ndarray:
    """Banded LU with partial pivoting; returns A with shape (M, N).

    When the system carries a free node, the N free amplitudes are fixed by
    least squares on sum_i sum_j (A_j'')^2 over the physical nodes.  This
    discards the log-type homogeneous solutions that sit at sonic points,
    whose second derivative is not square integrable.
    """
    N, M, h = system.N, system.M, system.h
    rows = system.free_rows
    rhs = system.rhs
    if rows is None:
        sol = _banded_solve(system, rhs)
    else:
        E = np.zeros((rhs.size, N))
        E[rows, np.arange(N)] = 1.0
        X = _banded_solve(system, np.column_stack([rhs, E]))
        phys = X.reshape(M + 2, N, N + 1)[1:-1][: system.select_nodes]
        curv = ((phys[2:] - 2.0 * phys[1:-1] + phys[:-2]) / h**2).reshape(-1, N + 1)
        amps, *_ = np.linalg.lstsq(curv[:, 1:], -curv[:, 0], rcond=None)
        sol = X[:, 0] + X[:, 1:] @ amps
        rhs = rhs + E @ amps
        size = np.max(np.abs(X)) * (1.0 + np.sum(np.abs(amps)))
    A = system.matrix
    if rows is None:
        size = np.max(np.abs(sol))
    res = np.max(np.abs(A @ sol - rhs))
    scale = max(np.max(np.abs(rhs)), 1e-300)
    if res > 1e-10 * scale and res > 1e-13 * np.max(np.abs(A.data)) * size:
        raise SingularMatrix(f"residual {res:.3e} at sigma={system.sigma:g}; matrix is numerically singular")
    return sol.reshape(M + 2, N)[1:-1].copy()


# -- norms on modal amplitudes ----------------------------------------------------------

def modal_h1_sq(A: np.ndarray, h: float, eigenvalues: np.ndarray) -> float:
    """||psi||^2_{H^1_r} for psi = sum A_j b_j (orthonormal modes)."""
    dA = derivative_matrix(A.shape[0], h, 1) @ A
    dens = np.sum((1.0 + eigenvalues) * A**2 + dA**2, axis=1)
    return float(simpson(dens, dx=h))


def l2r_sq(values: np.ndarray, x: np.ndarray, basis: RadialBasis) -> float:
    return float(simpson((values**2) @ basis.w, x=x))


# -- driver -------------------------------------------------------------------------------

@dataclass
class LinearCertificate:
    sigmas: list
    changes: list
    h1_norms: list
    energy_ratio: float
    min_margin: float | None
    exit: str
    converged: bool
    free_node: int | None = None

    def to_dict(self) -> dict:
        return {
            "sigma_schedule": [float(s) for s in self.sigmas],
            "interlevel_h1_change": [float(c) for c in self.changes],
            "h1_norms": [float(v) for v in self.h1_norms],
            "energy_ratio": float(self.energy_ratio),
            "min_multiplier_margin": None if self.min_margin is None else float(self.min_margin),
            "exit_condition": self.exit,
            "curvature_selection_node": self.free_node,
            "converged": bool(self.converged),
        }


@dataclass
class LinearSolution:
    A: np.ndarray
    x: np.ndarray
    basis: RadialBasis
    certificate: LinearCertificate

    def field(self, depth: int = 4) -> Field2D:
        return Field2D.from_modes(self.A, self.x, self.basis, depth=depth)


def exit_type(mats: GalerkinMatrices) -> Exit:
    """Free exit when the equation is hyperbolic in x1 there, Neumann when elliptic."""
    diag = np.diagonal(mats.a[-1])
    return "free" if np.all(diag < 0.0) else "neumann"


def multiplier_margin(coeffs: CoefficientSet, d0: float, basis: RadialBasis) -> float:
    """min over quadrature nodes of d k1 - (d k11)_x / 2 - d (k12)_r - d k12 / r."""
    x = coeffs.x
    d = 6.0 * (x - d0)
    h = float(x[1] - x[0])
    Dx = derivative_matrix(x.size, h, 1)
    dk11 = Dx @ (d[:, None] * coeffs.k11)
    drk12 = coeffs.dr_k12 if coeffs.dr_k12 is not None else np.zeros_like(coeffs.k12)
    k12r = coeffs.k12_over_r if coeffs.k12_over_r is not None else np.zeros_like(coeffs.k12)
    integrand = d[:, None] * coeffs.k1 - 0.5 * dk11 - d[:, None] * drk12 - d[:, None] * k12r
    return float(np.min(integrand[:, 1:-1]))


def solve_linear(coeffs: CoefficientSet, basis: RadialBasis, sigma0: float = SIGMA0, levels: int = LEVELS,
                 tol: float = TOL_SIGMA, d0: float | None = None, exit: Exit | None = None,
                 exhaust: bool = False, relative: bool = False, free_node: int | str | None = "auto",
                 select_nodes: int | None = None) -> LinearSolution:
    """Solve along sigma_k = sigma0 2^-k, k = 0..levels.

    Stops once the H^1_r change between consecutive levels drops below tol
    (relative to the solution norm if ``relative``); with ``exhaust`` every
    level is solved.  For a hyperbolic exit the exit equations are traded
    for the smallest-curvature selection (``free_node="auto"``).  With
    ``select_nodes`` both the selection and the stopping test only look at
    nodes [0, select_nodes), which is how the extended problem is measured on
    the original domain.
    """
    mats = galerkin_matrices(coeffs, basis)
    x = coeffs.x
    h = float(x[1] - x[0])
    exit = exit_type(mats) if exit is None else exit
    if free_node == "auto":
        free_node = coeffs.M - 1 if exit == "free" else None
    sigmas, changes, norms = [], [], []
    prev = None
    A = None
    converged = False
    parts = _assemble_parts(mats, h, exit)
    if free_node is not None:
        parts = _free_rows_parts(parts, mats.N, mats.M, free_node)
    for k in range(levels + 1):
        sigma = sigma0 * 2.0**-k
        A = solve_sigma(assemble_sigma_system(mats, sigma, h, exit, parts, free_node, select_nodes))
        sigmas.append(sigma)
        norms.append(np.sqrt(modal_h1_sq(A[:select_nodes], h, basis.eigenvalues)))
        if prev is not None:
            change = np.sqrt(modal_h1_sq((A - prev)[:select_nodes], h, basis.eigenvalues))
            changes.append(change)
            bound = tol * norms[-1] if relative else tol
            if change < bound or change == 0.0:
                converged = True
                if not exhaust:
                    break
        prev = A
    if exhaust and changes:
        converged = changes[-1] < (tol * norms[-1] if relative else tol) or changes[-1] == 0.0
    f_norm = np.sqrt(l2r_sq(coeffs.F0, x, basis))
    ratio = norms[-1] / f_norm if f_norm > 0.0 else 0.0
    margin = multiplier_margin(coeffs, d0, basis) if d0 is not None else None
    cert = LinearCertificate(sigmas, changes, norms, ratio, margin, exit, converged, free_node)
    if not converged and not exhaust:
        raise NoSigmaConvergence(
            f"sigma schedule exhausted after {levels} levels; last change {changes[-1]:.3e} >= {tol:g}",
        )
    return LinearSolution(A=A, x=x, basis=basis, certificate=cert)


# -- manufactured problem --------------------------------------------------------------------

_PROFILES = {
    # profile g(s), g'(s), g''(s) in s = x1 - L0; all vanish at s = 0
    "quadratic": (lambda s: s**2, lambda s: 2.0 * s, lambda s: 2.0 + 0.0 * s),
    "cosine": (lambda s: 1.0 - np.cos(s), np.sin, np.cos),
}


def manufactured_problem(flow: BackgroundFlow1D, basis: RadialBasis, profile: str = "quadratic"):
    """psi_m = g(x1 - L0) cos(pi r) and the source F0 = L psi_m (background coefficients).

    ``quadratic`` uses g(s) = s^2, which the central stencils reproduce
    exactly; ``cosine`` uses g(s) = 1 - cos s and exposes the truncation error.
    Returns (coefficients, exact nodal psi_m, exact modal amplitudes).  The
    amplitudes solve the Galerkin system exactly because r-independent
    coefficients keep the modes decoupled.
    """
    g, dg, d2g = _PROFILES[profile]
    x = flow.x
    r = basis.r
    s = x - flow.gas.L0
    cr = np.cos(np.pi * r)
    lap_r = -np.pi**2 * cr - np.pi * np.pi * np.sinc(r)  # psi_rr + psi_r / r for cos(pi r)
    F0 = ((flow.k11 * d2g(s) + flow.k1 * dg(s))[:, None] * cr[None]
          + g(s)[:, None] * lap_r[None])
    coeffs = background_coefficient_set(flow, basis, F0)
    exact = g(s)[:, None] * cr[None]
    amps = np.outer(g(s), basis.project(cr))
    return coeffs, exact, amps


# -- extension to a longer cylinder --------------------------------------------------------

def reflection_coefficients() -> np.ndarray:
    """c_1..c_4 with sum_j (-1/j)^k c_j = 1 for k = 0..3."""
    j = np.arange(1, 5, dtype=float)
    V = np.array([(-1.0 / j) ** k for k in range(4)])
    return np.linalg.solve(V, np.ones(4))


def reflect(g, L1: float, x_out: np.ndarray, cj: np.ndarray | None = None):
    """Higher-order reflection of g across L1, evaluated at x_out > L1.

    g is a callable of x1 returning arrays whose leading axis follows x1.
    """
    cj = reflection_coefficients() if cj is None else cj
    total = 0.0
    for j, c in enumerate(cj, start=1):
        total = total + c * g(L1 + (L1 - x_out) / j)
    return total


@dataclass
class ExtendedProblem:
    coeffs: CoefficientSet
    n_inner: int
    L2: float
    layer: float
    k0: float
    d0: float | None
    cj: np.ndarray
    extended: bool


def extend_problem(coeffs: CoefficientSet, ext: ExtendedBackground | None, basis: RadialBasis) -> ExtendedProblem:
    """Extended coefficients a11, a12, a1, a2 and source G0 on [L0, L2]."""
    cj = reflection_coefficients()
    if ext is None or np.all(coeffs.k11[-1, 1:-1] > 0.0):
        # already elliptic at the exit: nothing to extend
        return ExtendedProblem(coeffs, coeffs.M, float(coeffs.x[-1]), 0.0, 0.0, None, cj, False)
    M = coeffs.M
    x_in = coeffs.x
    L1 = float(x_in[-1])
    x_out = ext.x[M:]
    kb11 = ext.flow.k11[:M, None]
    kb1 = ext.flow.k1[:M, None]

    def refl(arr):
        spline = CubicSpline(x_in, arr, axis=0)
        return reflect(spline, L1, x_out, cj)

    def joined(inner, outer):
        return np.concatenate((inner, outer), axis=0)

    a11 = joined(coeffs.k11, ext.a11[M:, None] + refl(coeffs.k11 - kb11))
    a1 = joined(coeffs.k1, ext.a1[M:, None] + refl(coeffs.k1 - kb1))
    a12 = joined(coeffs.k12, refl(coeffs.k12))
    a2 = joined(coeffs.k2, refl(coeffs.k2))
    G0 = joined(coeffs.F0, refl(coeffs.F0))
    drk = joined(coeffs.dr_k12, refl(coeffs.dr_k12)) if coeffs.dr_k12 is not None else None
    k12r = joined(coeffs.k12_over_r, refl(coeffs.k12_over_r)) if coeffs.k12_over_r is not None else None
    out = CoefficientSet(ext.x, a11, a12, a1, a2, G0, drk, k12r)
    out.flags = compatibility_flags(out, basis)
    return ExtendedProblem(out, M, ext.L2, ext.layer, ext.k0, ext.d0, cj, True)


def solve_extended(problem: ExtendedProblem, basis: RadialBasis, sigma0: float = SIGMA0, levels: int = LEVELS,
                   tol: float = TOL_SIGMA, **kw) -> LinearSolution:
    if problem.extended:
        kw.setdefault("free_node", problem.n_inner - 1)
        kw.setdefault("select_nodes", problem.n_inner)
        return solve_linear(problem.coeffs, basis, sigma0, levels, tol, d0=problem.d0, exit="neumann", **kw)
    return solve_linear(problem.coeffs, basis, sigma0, levels, tol, d0=problem.d0, **kw)
