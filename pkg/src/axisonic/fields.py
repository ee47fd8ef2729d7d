"""Axisymmetric fields on the (x1, r) grid, stored as derivative jets.

A field keeps jet[a, m] = d^a/dx1^a D^m f sampled on the x1 grid times the
extended radial grid, with D = (1/r) d/dr.  Both d/dx1 and D are
derivations, so sums, products and reciprocals of fields act on jets by the
Leibniz rule and stay exact; radial derivatives and every 1/r term are
recovered as polynomials in r times jet entries.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .basis import RadialBasis, radial_derivative_terms
from .fd import derivative_matrix

DEPTH = 4  # highest x1 order and highest D order kept


@lru_cache(maxsize=64)
def _dx_stack(M: int, h: float, depth: int, accuracy: int) -> tuple:
    return tuple(derivative_matrix(M, h, a, accuracy) for a in range(depth + 1))


def x_derivatives(values: np.ndarray, h: float, depth: int = DEPTH, accuracy: int = 4) -> np.ndarray:
    """Stack of x1-derivatives (axis 0 of values is x1) by finite differences."""
    M = values.shape[0]
    usable = min(depth, M - accuracy)
    mats = _dx_stack(M, float(h), usable, accuracy)
    flat = values.reshape(M, -1)
    out = [(D @ flat).reshape(values.shape) for D in mats]
    # orders the grid cannot resolve are marked rather than silently faked
    out += [np.full(values.shape, np.nan)] * (depth - usable)
    return np.stack(out)


@dataclass
class Field2D:
    x: np.ndarray
    basis: RadialBasis
    jet: np.ndarray                 # (ax+1, ad+1, M, R)
    coeffs: np.ndarray | None = None  # (M, N) when the field is modal

    # -- constructors -------------------------------------------------------------
    @classmethod
    def from_modes(cls, coeffs: np.ndarray, x: np.ndarray, basis: RadialBasis,
                   depth: int = DEPTH, accuracy: int = 4) -> "Field2D":
        coeffs = np.asarray(coeffs, dtype=float)
        h = float(x[1] - x[0])
        dA = x_derivatives(coeffs, h, depth, accuracy)
        jet = np.einsum("amn,knr->akmr", dA, basis.jet[: depth + 1])
        return cls(x=x, basis=basis, jet=jet, coeffs=coeffs)

    @classmethod
    def from_x_jet(cls, xjet: np.ndarray, x: np.ndarray, basis: RadialBasis, depth: int = DEPTH) -> "Field2D":
        """Field depending on x1 only; xjet[a] = a-th x1-derivative."""
        na = xjet.shape[0]
        jet = np.zeros((na, depth + 1, x.size, basis.r.size))
        jet[:, 0] = xjet[:, :, None]
        return cls(x=x, basis=basis, jet=jet)

    @classmethod
    def from_r_jet(cls, rjet: np.ndarray, x: np.ndarray, basis: RadialBasis, depth: int = DEPTH) -> "Field2D":
        """Field depending on r only; rjet[m] = D^m g on the extended radial grid."""
        nd = rjet.shape[0]
        jet = np.zeros((depth + 1, nd, x.size, basis.r.size))
        jet[0] = np.broadcast_to(rjet[:, None, :], (nd, x.size, basis.r.size))
        return cls(x=x, basis=basis, jet=jet)

    @classmethod
    def constant(cls, value: float, x: np.ndarray, basis: RadialBasis, depth: int = DEPTH) -> "Field2D":
        jet = np.zeros((depth + 1, depth + 1, x.size, basis.r.size))
        jet[0, 0] = value
        return cls(x=x, basis=basis, jet=jet)

    @classmethod
    def r_squared(cls, x: np.ndarray, basis: RadialBasis, depth: int = DEPTH) -> "Field2D":
        """The field r^2 (D r^2 = 2, higher D vanish)."""
        rj = np.zeros((depth + 1, basis.r.size))
        rj[0] = basis.r**2
        rj[1] = 2.0
        return cls.from_r_jet(rj, x, basis, depth)

    # -- shape helpers -------------------------------------------------------------
    @property
    def M(self) -> int:
        return self.x.size

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def depth(self) -> tuple[int, int]:
        return self.jet.shape[0] - 1, self.jet.shape[1] - 1

    @property
    def values(self) -> np.ndarray:
        return self.jet[0, 0]

    def truncated(self, ax: int, ad: int) -> "Field2D":
        return Field2D(self.x, self.basis, self.jet[: ax + 1, : ad + 1], self.coeffs)

    def _like(self, jet: np.ndarray) -> "Field2D":
        return Field2D(self.x, self.basis, jet)

    def _common(self, other: "Field2D"):
        a = min(self.depth[0], other.depth[0])
        d = min(self.depth[1], other.depth[1])
        return self.jet[: a + 1, : d + 1], other.jet[: a + 1, : d + 1]

    # -- algebra -------------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Field2D):
            p, q = self._common(other)
            return self._like(p + q)
        jet = self.jet.copy()
        jet[0, 0] = jet[0, 0] + other
        return self._like(jet)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.jet)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Field2D):
            return self._like(self.jet * other)
        p, q = self._common(other)
        na, nd = p.shape[:2]
        out = np.zeros_like(p)
        for a in range(na):
            for m in range(nd):
                acc = 0.0
                for b in range(a + 1):
                    for k in range(m + 1):
                        acc = acc + comb(a, b) * comb(m, k) * p[b, k] * q[a - b, m - k]
                out[a, m] = acc
        return self._like(out)

    __rmul__ = __mul__

    def reciprocal(self) -> "Field2D":
        g = self.jet
        na, nd = g.shape[:2]
        out = np.zeros_like(g)
        g0 = g[0, 0]
        for a in range(na):
            for m in range(nd):
                if a == 0 and m == 0:
                    out[0, 0] = 1.0 / g0
                    continue
                acc = 0.0
                for b in range(a + 1):
                    for k in range(m + 1):
                        if b == 0 and k == 0:
                            continue
                        acc = acc + comb(a, b) * comb(m, k) * g[b, k] * out[a - b, m - k]
                out[a, m] = -acc / g0
        return self._like(out)

    def __truediv__(self, other):
        if isinstance(other, Field2D):
            return self * other.reciprocal()
        return self._like(self.jet / other)

    def dx(self) -> "Field2D":
        return self._like(self.jet[1:])

    def D(self) -> "Field2D":
        """(1/r) d/dr."""
        return self._like(self.jet[:, 1:])

    # -- derivative samples ----------------------------------------------------------
    def deriv(self, ax: int = 0, nr: int = 0, shift: int = 0) -> np.ndarray:
        """d^ax/dx1^ax d^nr/dr^nr D^shift f on the grid."""
        r = self.basis.r
        out = np.zeros(self.jet.shape[2:])
        for (p, m), c in radial_derivative_terms(nr).items():
            out = out + c * r**p * self.jet[ax, m + shift]
        return out

    def mixed(self, ax: int = 0, ad: int = 0) -> np.ndarray:
        return self.jet[ax, ad]
