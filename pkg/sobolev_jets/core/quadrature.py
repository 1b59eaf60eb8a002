"""
Cube Quadrature
Tensor Gauss-Legendre rules on families of axis-aligned cubes
"""

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterator, Optional, Tuple

import numpy as np

from .geometry import Cube


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Legendre order per cube, integration window and batching"""

    order: int = 4
    window: Optional[Cube] = None
    refinement_check: bool = False
    refinement_tolerance: float = 0.05
    chunk_cubes: int = 64

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"quadrature order must be >= 1, got {self.order}")

    def for_jet_order(self, m: int) -> "QuadratureSpec":
        """Raise the order to at least m + 1"""
        return replace(self, order=max(self.order, m + 1))

    def refined(self, extra: int = 2) -> "QuadratureSpec":
        return replace(self, order=self.order + extra)


@lru_cache(maxsize=None)
def gauss_legendre(order: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor nodes in [-1, 1]^dim and their weights"""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = np.asarray(list(itertools.product(x, repeat=dim)))
    weights = np.prod(np.asarray(list(itertools.product(w, repeat=dim))), axis=1)
    return nodes, weights


def cube_nodes(centers: np.ndarray, halves: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes (C, G, n) and weights (C, G) of the tensor rule mapped onto each cube"""
    dim = centers.shape[1]
    nodes, weights = gauss_legendre(order, dim)
    X = centers[:, None, :] + halves[:, None, None] * nodes[None, :, :]
    W = weights[None, :] * halves[:, None] ** dim
    return X, W


def chunks(count: int, size: int) -> Iterator[np.ndarray]:
    for start in range(0, count, size):
        yield np.arange(start, min(start + size, count))
