"""Polynomial smoothstep cutoffs and their derivatives.

The default order 2 is the quintic 6t^5 - 15t^4 + 10t^3; order n gives the
degree 2n + 1 step whose first n derivatives vanish at both ends (a C^n cutoff).
"""
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial


@lru_cache(maxsize=None)
def _step_polys(order: int) -> tuple:
    bump = Polynomial([0.0, 1.0, -1.0]) ** order  # (t(1 - t))^order
    p = bump.integ()
    p = p / p(1.0)
    polys = [p]
    for _ in range(order + 4):
        polys.append(polys[-1].deriv())
    return tuple(polys)


def smoothstep(t, deriv: int = 0, order: int = 2) -> np.ndarray:
    """deriv-th derivative of the C^order smoothstep, clamped to 0 / 1 outside [0, 1]."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    out = np.where(inside, _step_polys(order)[deriv](np.clip(t, 0.0, 1.0)), 0.0)
    if deriv == 0:
        out = np.where(t >= 1.0, 1.0, out)
    return out


def falling_cutoff(x, start: float, stop: float, deriv: int = 0, order: int = 2) -> np.ndarray:
    """Equals 1 for x <= start and 0 for x >= stop (start < stop), non-increasing."""
    width = stop - start
    t = (np.asarray(x, dtype=float) - start) / width
    if deriv == 0:
        return 1.0 - smoothstep(t, order=order)
    return -smoothstep(t, deriv, order) / width**deriv


def rising_cutoff(x, start: float, stop: float, deriv: int = 0, order: int = 2) -> np.ndarray:
    """Equals 0 for x <= start and 1 for x >= stop."""
    width = stop - start
    t = (np.asarray(x, dtype=float) - start) / width
    return smoothstep(t, deriv, order) / width**deriv
