"""Weighted Sobolev norms H^0_r .. H^4_r on D = (L0, L1) x (0, 1).

Squared norms integrate against r dr dx1.  Tensor terms such as |grad^2 f|^2
sum over ordered index tuples, so the mixed derivative f_{x1 r} is counted
twice; with that convention the axisymmetric lift to three dimensions
reproduces the weighted norms exactly for k <= 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial, pi

import numpy as np
from scipy.integrate import simpson

from .errors import InsufficientResolution, PreconditionViolation
from .fields import Field2D


def integrate(field_values: np.ndarray, f: Field2D) -> float:
    """int int g r dr dx1 for nodal samples g on f's grid."""
    radial = field_values @ f.basis.w
    return float(simpson(radial, x=f.x))


def _sq(f: Field2D, arr: np.ndarray) -> float:
    return integrate(arr * arr, f)


def gradient_power(f: Field2D, k: int, shift: int = 0) -> float:
    """|| grad^k (D^shift f) ||^2 with ordered-tuple multiplicities."""
    total = 0.0
    for a in range(k + 1):  # a radial derivatives, k - a in x1
        total += comb(k, a) * _sq(f, f.deriv(k - a, a, shift))
    return total


@dataclass
class NormReport:
    l2r: float
    h1r: float
    h2r: float | None = None
    h3r: float | None = None
    h4r: float | None = None
    components: dict = field(default_factory=dict)

    def norm(self, m: int) -> float:
        return [self.l2r, self.h1r, self.h2r, self.h3r, self.h4r][m]

    def rows(self) -> list[dict]:
        out = []
        for m in range(5):
            v = self.norm(m)
            if v is None:
                break
            out.append({"m": m, "norm": v})
        return out


def weighted_norms(f: Field2D, up_to: int = 4) -> NormReport:
    if up_to > 4 or up_to < 0:
        raise ValueError("up_to must be in 0..4")
    need_x = {0: 1, 1: 2, 2: 3, 3: 4, 4: 9}[up_to]
    if f.M < need_x or (up_to == 4 and f.M < 9):
        raise InsufficientResolution(f"H^{up_to}_r needs at least {need_x} x1 nodes, got {f.M}")
    c = {}
    c["f"] = _sq(f, f.deriv())
    sq = [c["f"]]
    if up_to >= 1:
        c["grad"] = gradient_power(f, 1)
        sq.append(sq[-1] + c["grad"])
    if up_to >= 2:
        c["grad2"] = gradient_power(f, 2)
        c["Df"] = _sq(f, f.deriv(0, 0, 1))
        sq.append(sq[-1] + c["grad2"] + c["Df"])
    if up_to >= 3:
        c["grad3"] = gradient_power(f, 3)
        c["grad_Df"] = gradient_power(f, 1, shift=1)
        sq.append(sq[-1] + c["grad3"] + c["grad_Df"])
    if up_to >= 4:
        c["grad4"] = gradient_power(f, 4)
        c["grad2_Df"] = gradient_power(f, 2, shift=1)
        c["DDf"] = _sq(f, f.deriv(0, 0, 2))
        sq.append(sq[-1] + c["grad4"] + c["grad2_Df"] + c["DDf"])
    norms = [float(np.sqrt(v)) for v in sq] + [None] * (5 - len(sq))
    return NormReport(*norms, components=c)


def linf_bound_check(g: Field2D) -> tuple[float, float, float]:
    """max |g|^2 against ||g||^2 + ||grad g||^2 + ||grad^2 g||^2."""
    rep = weighted_norms(g, 2)
    scale = rep.l2r
    axis = g.values[:, 0]
    if np.max(np.abs(axis)) > 1e-8 * max(scale, 1e-300) and np.max(np.abs(axis)) > 0.0:
        raise PreconditionViolation("field does not vanish on the axis r = 0")
    lhs = float(np.max(g.values**2))
    rhs = rep.components["f"] + rep.components["grad"] + rep.components["grad2"]
    ratio = lhs / rhs if rhs > 0.0 else 0.0
    return lhs, rhs, ratio


def algebra_check(f: Field2D, g: Field2D, m: int = 2) -> tuple[float, float]:
    if m not in (2, 3):
        raise ValueError("m must be 2 or 3")
    fg = (f * g).truncated(m, m)
    lhs = weighted_norms(fg, m).norm(m)
    rhs = weighted_norms(f, m).norm(m) * weighted_norms(g, m).norm(m)
    return lhs, rhs


def _cartesian_terms(b: int, c: int) -> dict[tuple[int, int, int], float]:
    """d_y^b d_z^c of a radial function as sum coeff * y^p z^q * D^m."""
    terms = {(0, 0, 0): 1.0}
    for axis, count in ((0, b), (1, c)):
        for _ in range(count):
            nxt: dict[tuple[int, int, int], float] = {}
            for (p, q, m), v in terms.items():
                e = (p, q)[axis]
                if e:
                    key = (p - 1, q, m) if axis == 0 else (p, q - 1, m)
                    nxt[key] = nxt.get(key, 0.0) + v * e
                key = (p + 1, q, m + 1) if axis == 0 else (p, q + 1, m + 1)
                nxt[key] = nxt.get(key, 0.0) + v
            terms = nxt
    return terms


def cartesian_seminorm_sq(f: Field2D, k: int, n_theta: int = 32) -> float:
    """Sum over ordered k-tuples of ||d^k f_check||^2_{L^2(Omega)} on a polar grid."""
    theta = 2.0 * pi * np.arange(n_theta) / n_theta
    r = f.basis.r
    y = np.outer(np.cos(theta), r)  # (P, R)
    z = np.outer(np.sin(theta), r)
    total = 0.0
    for a in range(k + 1):
        for b in range(k - a + 1):
            cc = k - a - b
            mult = factorial(k) // (factorial(a) * factorial(b) * factorial(cc))
            acc = np.zeros((f.M, n_theta, r.size))
            for (p, q, m), v in _cartesian_terms(b, cc).items():
                acc += v * f.jet[a, m][:, None, :] * (y**p * z**q)[None]
            sq = np.mean(acc * acc, axis=1) * 2.0 * pi  # angular integral
            total += mult * float(simpson(sq @ f.basis.w, x=f.x))
    return total


def norm_equivalence_check(f: Field2D, k: int, n_theta: int = 32) -> tuple[float, float, float]:
    """(weighted H^k_r norm, Cartesian H^k norm of the lift, ratio)."""
    if not 0 <= k <= 4:
        raise ValueError("k must be in 0..4")
    cart = sum(cartesian_seminorm_sq(f, j, n_theta) for j in range(k + 1))
    weighted = weighted_norms(f, k).norm(k)
    cart = float(np.sqrt(cart))
    return weighted, cart, cart / weighted if weighted > 0.0 else 0.0


def lifted_identity_sq(f: Field2D, k: int) -> float:
    """Closed form of ||f_check||^2_{H^k(Omega)} / (2 pi) in weighted terms.

    Derived from grad f_check = y Df, grad^2 f_check = Df I + y y^T D^2 f, ...
    """
    rep = weighted_norms(f, k)
    c = rep.components
    if k <= 2:
        return rep.norm(k) ** 2
    low = rep.norm(2) ** 2 + c["grad3"] + 3.0 * c["grad_Df"]
    if k == 3:
        return low
    return low + c["grad4"] + 6.0 * c["grad2_Df"] + 9.0 * c["DDf"]
