"""
Geometry Primitives
Cubes, uniform-norm distances and the nested separated nets {E_i} of a finite set
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import DimensionMismatchError, EmptySetError, GeometryError

logger = logging.getLogger(__name__)

MAX_DIM = 3
REL_TOL = 1e-12


def as_points(E, allow_empty: bool = False) -> np.ndarray:
    """Coerce a point set to a float array of shape (k, n)"""
    arr = np.asarray(E, dtype=float)
    if arr.size == 0:
        if allow_empty:
            return arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 0)
        raise EmptySetError("point set is empty")
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise GeometryError(f"point set must be two-dimensional, got shape {arr.shape}")
    if not 1 <= arr.shape[1] <= MAX_DIM:
        raise GeometryError(f"dimension must be in 1..{MAX_DIM}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("point coordinates must be finite")
    return arr


def lex_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting points lexicographically (first coordinate most significant)"""
    return np.lexsort(points.T[::-1])


def diameter(points: np.ndarray) -> float:
    """Uniform-norm diameter; the max norm makes it the largest coordinate spread"""
    if len(points) < 2:
        return 0.0
    return float(np.max(np.ptp(points, axis=0)))


def min_separation(points: np.ndarray) -> float:
    """Smallest uniform-norm distance between two distinct points (inf for a singleton)"""
    if len(points) < 2:
        return math.inf
    dist, _ = cKDTree(points).query(points, k=2, p=np.inf)
    return float(np.min(dist[:, 1]))


@dataclass(frozen=True)
class Cube:
    """Closed axis-aligned cube Q(c, r) = {x : ||x - c|| <= r} in the uniform norm"""

    center: Tuple[float, ...]
    half_side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.half_side > 0 or not math.isfinite(self.half_side):
            raise GeometryError(f"half_side must be positive, got {self.half_side}")
        if not 1 <= len(self.center) <= MAX_DIM:
            raise GeometryError(f"cube dimension must be in 1..{MAX_DIM}")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def diam(self) -> float:
        return 2.0 * self.half_side

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.half_side

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.half_side

    @property
    def volume(self) -> float:
        return self.diam ** self.dim

    def dilate(self, factor: float) -> "Cube":
        return dilate(self, factor)

    def contains(self, x, tol: float = REL_TOL) -> bool:
        """Closed containment with a relative tolerance"""
        x = np.asarray(x, dtype=float)
        _check_dim(self.dim, x.shape[-1])
        gap = np.max(np.abs(x - np.asarray(self.center)))
        return bool(gap <= self.half_side * (1.0 + tol))

    def intersects(self, other: "Cube", tol: float = REL_TOL) -> bool:
        """Closed cubes meet (shared faces and corners count)"""
        _check_dim(self.dim, other.dim)
        gap = np.max(np.abs(np.asarray(self.center) - np.asarray(other.center)))
        reach = self.half_side + other.half_side
        return bool(gap <= reach * (1.0 + tol))

    def interiors_overlap(self, other: "Cube", tol: float = REL_TOL) -> bool:
        """Open cubes meet"""
        _check_dim(self.dim, other.dim)
        gap = np.max(np.abs(np.asarray(self.center) - np.asarray(other.center)))
        reach = self.half_side + other.half_side
        return bool(gap < reach * (1.0 - tol))

    def touches_boundary(self, window: "Cube", tol: float = REL_TOL) -> bool:
        """Lies in window and shares at least part of a face with its boundary"""
        _check_dim(self.dim, window.dim)
        lower, upper = window.lower, window.upper
        slack = tol * window.half_side
        if np.any(self.lower < lower - slack) or np.any(self.upper > upper + slack):
            return False
        return bool(np.any(self.lower <= lower + slack) or np.any(self.upper >= upper - slack))

    def to_dict(self) -> Dict[str, object]:
        return {"center": list(self.center), "half_side": self.half_side}


def dilate(Q: Cube, factor: float) -> Cube:
    """Dilation lambda*Q about the center of Q"""
    if not factor > 0:
        raise GeometryError(f"dilation factor must be positive, got {factor}")
    return Cube(Q.center, Q.half_side * factor)


def _check_dim(n1: int, n2: int) -> None:
    if n1 != n2:
        raise DimensionMismatchError(f"dimension mismatch: {n1} vs {n2}")


def _as_cubes(operand) -> Tuple[np.ndarray, np.ndarray]:
    """Represent a point, cube, point set or cube list as (centers, half_sides)"""
    if isinstance(operand, Cube):
        return np.asarray([operand.center]), np.asarray([operand.half_side])
    if isinstance(operand, (list, tuple)) and operand and all(isinstance(q, Cube) for q in operand):
        centers = np.asarray([q.center for q in operand])
        return centers, np.asarray([q.half_side for q in operand])
    arr = np.asarray(operand, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 0)), np.zeros(0)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr, np.zeros(len(arr))


def uniform_dist(a, b) -> float:
    """
    Uniform-norm distance between points, cubes or finite sets of either.

    Args:
        a: point, Cube, (k, n) point array or list of Cubes
        b: same kinds as a

    Returns:
        inf over an empty operand, otherwise min over pairs of
        max(0, ||c_a - c_b|| - r_a - r_b)
    """
    ca, ha = _as_cubes(a)
    cb, hb = _as_cubes(b)
    if len(ca) == 0 or len(cb) == 0:
        return math.inf
    _check_dim(ca.shape[1], cb.shape[1])

    if not np.any(hb) and len(cb) > 32:
        gaps, _ = cKDTree(cb).query(ca, k=1, p=np.inf)
        return float(np.min(np.maximum(gaps - ha, 0.0)))

    gaps = np.max(np.abs(ca[:, None, :] - cb[None, :, :]), axis=2)
    gaps = gaps - ha[:, None] - hb[None, :]
    return float(np.min(np.maximum(gaps, 0.0)))


@dataclass(frozen=True)
class DyadicNets:
    """
    Nested nets E_{i+1} <= E_i of a finite set E.

    Each level is 2^i-separated and a 2^{i+1}-net in E. Levels are stored
    as index arrays into points, in lexicographic point order.
    """

    points: np.ndarray
    i_min: int
    i_max: int
    members: Dict[int, np.ndarray] = field(repr=False)

    def level(self, i: int) -> np.ndarray:
        if i <= self.i_min:
            return self.members[self.i_min]
        if i >= self.i_max:
            return self.members[self.i_max]
        return self.members[i]

    def contains(self, i: int, index: int) -> bool:
        return bool(np.any(self.level(i) == index))

    def nearest(self, i: int, x) -> int:
        """Index of the point of E_i closest to x (first in lexicographic order on ties)"""
        idx = self.level(i)
        gaps = np.max(np.abs(self.points[idx] - np.asarray(x, dtype=float)), axis=1)
        return int(idx[int(np.argmin(gaps))])

    def check(self) -> List[str]:
        """Verify nesting, separation and covering on every stored level"""
        violations: List[str] = []
        for i in range(self.i_min, self.i_max + 1):
            pts = self.points[self.level(i)]
            if len(pts) >= 2 and min_separation(pts) < 2.0 ** i:
                violations.append(f"level {i}: points closer than 2^{i}")
            gaps, _ = cKDTree(pts).query(self.points, k=1, p=np.inf)
            if np.max(gaps) > 2.0 ** (i + 1):
                violations.append(f"level {i}: some point farther than 2^{i + 1} from the net")
            if i > self.i_min and not np.all(np.isin(self.level(i), self.level(i - 1))):
                violations.append(f"level {i}: not nested in level {i - 1}")
        return violations


def build_dyadic_nets(E) -> DyadicNets:
    """
    Build nested separated nets by greedy thinning.

    Args:
        E: finite point set, shape (k, n)

    Returns:
        DyadicNets with E_{i_min} = E and a singleton at i_max
    """
    points = as_points(E)
    order = lex_order(points)

    if len(points) == 1:
        return DyadicNets(points, 0, 0, {0: order})

    separation = min_separation(points)
    if separation <= 0:
        raise GeometryError("point set has repeated points")

    i_min = math.floor(math.log2(separation))
    while 2.0 ** i_min > separation:
        i_min -= 1
    i_max = math.ceil(math.log2(diameter(points))) + 3

    members: Dict[int, np.ndarray] = {i_min: order}
    for i in range(i_min + 1, i_max + 1):
        radius = 2.0 ** i
        kept: List[int] = []
        for idx in members[i - 1]:
            if kept:
                gaps = np.max(np.abs(points[kept] - points[idx]), axis=1)
                if np.min(gaps) < radius:
                    continue
            kept.append(int(idx))
        members[i] = np.asarray(kept, dtype=int)

    logger.debug("built dyadic nets on %d points, levels %d..%d", len(points), i_min, i_max)
    return DyadicNets(points, i_min, i_max, members)


def dyadic_point_sets(nets: DyadicNets) -> Sequence[Tuple[int, np.ndarray]]:
    """(level, points) pairs for reporting"""
    return [(i, nets.points[nets.level(i)]) for i in range(nets.i_min, nets.i_max + 1)]

