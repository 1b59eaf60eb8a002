"""
Bump Profile
Smooth cutoff equal to 1 on [-1, 1] and 0 outside [-9/8, 9/8], with closed-form derivatives
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List

import numpy as np
import sympy as sp

# Outside [EDGE, 1 - EDGE] the step equals its limit to below exp(-1/EDGE).
EDGE = 1e-3
MAX_BUMP_ORDER = 6


@lru_cache(maxsize=1)
def _step_derivatives(max_order: int = MAX_BUMP_ORDER) -> List[Callable[[np.ndarray], np.ndarray]]:
    """S^(k) for k = 0..max_order as numpy callables, S(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})"""
    t = sp.symbols("t", positive=True)
    left = sp.exp(-1 / t)
    right = sp.exp(-1 / (1 - t))
    expr = left / (left + right)
    funcs = []
    for _ in range(max_order + 1):
        funcs.append(sp.lambdify(t, expr, modules="numpy", cse=True))
        expr = sp.diff(expr, t)
    return funcs


def smooth_step(t: np.ndarray, order: int = 0) -> np.ndarray:
    """k-th derivative of the C-infinity step that is 0 for t <= 0 and 1 for t >= 1"""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    if order == 0:
        out[t >= 1.0 - EDGE] = 1.0
    inside = (t > EDGE) & (t < 1.0 - EDGE)
    if np.any(inside):
        out[inside] = _step_derivatives()[order](t[inside])
    return out


@dataclass(frozen=True)
class BumpSpec:
    """
    One-dimensional profile theta(u) = S(9 - 8|u|) and its derivatives.

    theta is 1 on [-1, 1], 0 outside [-9/8, 9/8] and C-infinity; a cube bump is
    the tensor product of theta over coordinates scaled by the half-side.
    """

    order: int

    def __post_init__(self):
        if not 0 <= self.order <= MAX_BUMP_ORDER:
            raise ValueError(f"bump derivatives are tabulated up to order {MAX_BUMP_ORDER}")

    def profile(self, u: np.ndarray, k: int = 0) -> np.ndarray:
        """theta^(k)(u)"""
        u = np.asarray(u, dtype=float)
        chain = (-8.0 * np.sign(u)) ** k
        return smooth_step(9.0 - 8.0 * np.abs(u), k) * chain

    def table(self, U: np.ndarray) -> np.ndarray:
        """Stack theta^(k)(U) for k = 0..order along a new leading axis"""
        return np.stack([self.profile(U, k) for k in range(self.order + 1)])
