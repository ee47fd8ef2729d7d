"""Finite-difference weights and dense derivative matrices on uniform grids."""
from __future__ import annotations

from math import factorial

import numpy as np


def fd_weights(offsets, deriv: int) -> np.ndarray:
    """Weights w such that sum(w * f(x + k h)) ~ h**deriv * f^(deriv)(x).

    Solves the moment (Vandermonde) system for integer offsets ``k``.
    """
    k = np.asarray(offsets, dtype=float)
    n = len(k)
    if deriv >= n:
        raise ValueError("stencil too short for requested derivative")
    V = np.vander(k, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = factorial(deriv)
    return np.linalg.solve(V, rhs)


def stencil(i: int, M: int, width: int) -> np.ndarray:
    """Offsets of a width-point stencil at node i, centered when possible."""
    half = width // 2
    start = min(max(i - half, 0), M - width)
    return np.arange(start, start + width) - i


def derivative_matrix(M: int, h: float, deriv: int, accuracy: int = 4) -> np.ndarray:
    """Dense (M, M) matrix of the deriv-th derivative, given order of accuracy.

    Interior rows use the centered stencil, rows near the ends a shifted
    stencil one point wider so the order is kept.
    """
    if deriv == 0:
        return np.eye(M)
    centered = 2 * ((deriv + 1) // 2) - 1 + accuracy
    edge = deriv + accuracy
    if M < edge:
        raise ValueError(f"need at least {edge} nodes for derivative {deriv}")
    D = np.zeros((M, M))
    half = centered // 2
    for i in range(M):
        if half <= i < M - half:
            offs = np.arange(-half, half + 1)
        else:
            offs = stencil(i, M, edge)
        D[i, i + offs] = fd_weights(offs, deriv)
    return D / h**deriv


def derivative_stack(M: int, h: float, max_deriv: int, accuracy: int = 4) -> list[np.ndarray]:
    return [derivative_matrix(M, h, d, accuracy) for d in range(max_deriv + 1)]
