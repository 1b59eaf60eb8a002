"""
Whitney Decomposition
Dyadic Whitney cubes of a bounded window around E, adjacency T(K) and the smooth partition of unity
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import CollarError, EmptySetError, GeometryError
from .bump import BumpSpec
from .geometry import Cube, as_points, min_separation
from .jets import MultiIndex, below, binom_mi, multi_indices

logger = logging.getLogger(__name__)

STAR = 9.0 / 8.0
ADJ_TOL = 1e-9
SINGLETON_DEPTH = 8


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    """
    Whitney cubes of window minus E, stored as arrays.

    Cube i has center centers[i], half-side half_sides[i] and dyadic level
    levels[i] (half-side = window.half_side / 2^level). neighbors[i] is T(K_i),
    the closed-touching cubes including i itself. Cubes still too close to E
    at depth_cap form the collar.
    """

    points: np.ndarray
    window: Cube
    depth_cap: int
    centers: np.ndarray
    half_sides: np.ndarray
    levels: np.ndarray
    dists: np.ndarray
    collar_centers: np.ndarray
    collar_half_side: float
    neighbors: List[np.ndarray] = field(repr=False)
    level_index: Dict[int, Tuple[cKDTree, np.ndarray]] = field(repr=False)

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def diams(self) -> np.ndarray:
        return 2.0 * self.half_sides

    def cube(self, i: int) -> Cube:
        return Cube(tuple(self.centers[i]), float(self.half_sides[i]))

    @property
    def collar_measure(self) -> float:
        return float(len(self.collar_centers) * (2.0 * self.collar_half_side) ** self.dim)

    def boundary_mask(self) -> np.ndarray:
        """Cubes sharing a face with the window boundary"""
        return np.asarray([self.cube(i).touches_boundary(self.window, ADJ_TOL) for i in range(len(self))], dtype=bool)

    def locate(self, x) -> np.ndarray:
        """A_x = {Q : x in Q*}, the cubes whose bump is nonzero near x"""
        x = np.asarray(x, dtype=float).reshape(-1)
        found: List[int] = []
        for level, (tree, idx) in self.level_index.items():
            h = self.window.half_side / 2.0 ** level
            hits = tree.query_ball_point(x, r=STAR * h * (1.0 + ADJ_TOL), p=np.inf)
            found.extend(int(idx[j]) for j in hits)
        return np.asarray(sorted(found), dtype=int)

    def owner(self, x, candidates: Optional[np.ndarray] = None) -> Optional[int]:
        """A cube containing x (closed), or None"""
        x = np.asarray(x, dtype=float).reshape(-1)
        candidates = self.locate(x) if candidates is None else candidates
        for i in candidates:
            if np.max(np.abs(x - self.centers[i])) <= self.half_sides[i] * (1.0 + ADJ_TOL):
                return int(i)
        return None

    def in_window(self, x) -> bool:
        return self.window.contains(x)

    def collar_distance(self, x) -> Optional[float]:
        """Distance to E when x falls in an unresolved collar cube, else None"""
        x = np.asarray(x, dtype=float).reshape(-1)
        if len(self.collar_centers) == 0:
            return None
        gaps = np.max(np.abs(self.collar_centers - x), axis=1)
        if np.min(gaps) <= self.collar_half_side * (1.0 + ADJ_TOL):
            return float(np.min(np.max(np.abs(self.points - x), axis=1)))
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "window": self.window.to_dict(),
            "depth_cap": self.depth_cap,
            "cubes": [
                {
                    "center": self.centers[i].tolist(),
                    "half_side": float(self.half_sides[i]),
                    "neighbors": [int(j) for j in self.neighbors[i] if j != i],
                }
                for i in range(len(self))
            ],
            "collar": {
                "cubes": int(len(self.collar_centers)),
                "half_side": self.collar_half_side,
                "measure": self.collar_measure,
            },
        }


def auto_depth(points: np.ndarray, window_half_side: float, max_depth: int, resolution_factor: float = 64.0) -> int:
    """Depth at which cubes near each point are small against the point separation"""
    if len(points) == 1:
        return min(SINGLETON_DEPTH, max_depth)
    separation = min_separation(points)
    depth = math.ceil(math.log2(2.0 * window_half_side * resolution_factor / separation))
    if depth > max_depth:
        logger.warning("automatic depth %d clipped to max_depth %d; close points may share lacunae", depth, max_depth)
    return int(min(max(depth, 1), max_depth))


def root_window(points: np.ndarray, inflate: float) -> Cube:
    """Bounding cube of E dilated about its center"""
    lo, hi = points.min(axis=0), points.max(axis=0)
    half = float(np.max(hi - lo)) / 2.0
    if half == 0.0:
        half = 0.5
    return Cube(tuple((lo + hi) / 2.0), inflate * half)


def whitney_decompose(
    E,
    inflate: float = 4.0,
    depth_cap: Optional[int] = None,
    max_depth: int = 14,
    window: Optional[Cube] = None,
    resolution_factor: float = 64.0,
) -> WhitneyCover:
    """
    Whitney cubes of the window minus E by level-by-level dyadic refinement.

    A dyadic cube is emitted as soon as diam Q <= dist(Q, E); its parent was
    refused, which forces dist(Q, E) < 4 diam Q. Cubes still refused at
    depth_cap become the collar.

    Args:
        E: finite point set
        inflate: window = bounding cube of E dilated by this factor
        depth_cap: maximal refinement depth; None picks it from the separation of E
        max_depth: ceiling for the automatic depth
        window: explicit root cube (must contain E)

    Returns:
        WhitneyCover with adjacency and per-level spatial indexes
    """
    points = as_points(E)
    if len(points) == 0:
        raise EmptySetError("cannot decompose around an empty set")
    if inflate < 4.0 and window is None:
        raise GeometryError(f"inflate must be >= 4, got {inflate}")
    window = window or root_window(points, inflate)
    if not all(window.contains(x) for x in points):
        raise GeometryError("window does not contain E")
    if depth_cap is None:
        depth_cap = auto_depth(points, window.half_side, max_depth, resolution_factor)
    if depth_cap < 1:
        raise GeometryError(f"depth_cap must be >= 1, got {depth_cap}")

    n = points.shape[1]
    tree = cKDTree(points)
    origin = np.asarray(window.center) - window.half_side
    offsets = np.asarray(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)

    centers, halves, levels, dists = [], [], [], []
    active = np.zeros((1, n), dtype=np.int64)
    collar = np.zeros((0, n))
    collar_half = window.half_side / 2.0 ** depth_cap

    for level in range(depth_cap + 1):
        h = window.half_side / 2.0 ** level
        mids = origin + (2 * active + 1) * h
        gaps, _ = tree.query(mids, k=1, p=np.inf)
        dist = np.maximum(gaps - h, 0.0)
        emit = 2.0 * h <= dist
        if np.any(emit):
            centers.append(mids[emit])
            halves.append(np.full(int(emit.sum()), h))
            levels.append(np.full(int(emit.sum()), level))
            dists.append(dist[emit])
        refused = active[~emit]
        if level == depth_cap:
            collar = mids[~emit]
            break
        active = (2 * refused[:, None, :] + offsets[None, :, :]).reshape(-1, n)

    centers = np.concatenate(centers) if centers else np.zeros((0, n))
    halves = np.concatenate(halves) if halves else np.zeros(0)
    levels = np.concatenate(levels).astype(int) if levels else np.zeros(0, dtype=int)
    dists = np.concatenate(dists) if dists else np.zeros(0)

    level_index = {
        int(lv): (cKDTree(centers[levels == lv]), np.flatnonzero(levels == lv))
        for lv in np.unique(levels)
    }
    neighbors = _adjacency(centers, halves, levels, level_index, window.half_side)

    logger.info(
        "whitney cover: %d cubes, depth %d, %d collar cubes", len(centers), depth_cap, len(collar)
    )
    return WhitneyCover(
        points=points,
        window=window,
        depth_cap=int(depth_cap),
        centers=centers,
        half_sides=halves,
        levels=levels,
        dists=dists,
        collar_centers=collar,
        collar_half_side=collar_half,
        neighbors=neighbors,
        level_index=level_index,
    )


def _adjacency(centers, halves, levels, level_index, root_half) -> List[np.ndarray]:
    """Closed-touching pairs across every pair of levels"""
    touching: List[set] = [{i} for i in range(len(centers))]
    keys = sorted(level_index)
    for a, b in itertools.combinations_with_replacement(keys, 2):
        tree_a, idx_a = level_index[a]
        tree_b, idx_b = level_index[b]
        reach = root_half / 2.0 ** a + root_half / 2.0 ** b
        hits = tree_a.query_ball_tree(tree_b, r=reach * (1.0 + ADJ_TOL), p=np.inf)
        for ia, partners in enumerate(hits):
            gi = int(idx_a[ia])
            for jb in partners:
                gj = int(idx_b[jb])
                touching[gi].add(gj)
                touching[gj].add(gi)
    return [np.asarray(sorted(s), dtype=int) for s in touching]


def touching(cover: WhitneyCover, K: int) -> np.ndarray:
    """T(K): every cover cube meeting the closed cube K, K included"""
    if not 0 <= K < len(cover):
        raise IndexError(f"cube index {K} out of range")
    return cover.neighbors[K]


# ============================================================================
# Partition of unity
# ============================================================================

def derivative_closure(alphas: Iterable[MultiIndex]) -> Tuple[MultiIndex, ...]:
    """All beta below some alpha, ordered so that lower orders come first"""
    found = set()
    for alpha in alphas:
        found.update(below(tuple(alpha)))
    return tuple(sorted(found, key=lambda b: (sum(b), b)))


def _tensor_bumps(U: np.ndarray, scale: np.ndarray, betas: Sequence[MultiIndex]) -> Dict[MultiIndex, np.ndarray]:
    """D^beta psi from scaled offsets U (..., n) and half-sides broadcast to U.shape[:-1]"""
    order = max((max(b) for b in betas), default=0)
    table = BumpSpec(order).table(U)
    out = {}
    for beta in betas:
        value = np.ones(U.shape[:-1])
        for axis, k in enumerate(beta):
            value = value * table[k, ..., axis]
        out[beta] = value * scale ** (-float(sum(beta)))
    return out


def bump_derivatives(centers: np.ndarray, halves: np.ndarray, X: np.ndarray, betas: Sequence[MultiIndex]) -> Dict[MultiIndex, np.ndarray]:
    """D^beta psi_K at every row of X for every cube K, shape (K, N) per beta"""
    U = (X[None, :, :] - centers[:, None, :]) / halves[:, None, None]
    return _tensor_bumps(U, halves[:, None], betas)


def _quotient(psi: Dict[MultiIndex, np.ndarray], betas: Sequence[MultiIndex], axis: int) -> Dict[MultiIndex, np.ndarray]:
    """
    D^beta of psi_K / sum_J psi_J, cubes along axis.

    The quotient rule is unrolled as D^beta phi = (D^beta psi - sum_{gamma < beta}
    C(beta, gamma) D^gamma phi D^{beta-gamma} S) / S with S = sum psi.
    """
    total = {beta: np.expand_dims(psi[beta].sum(axis=axis), axis) for beta in betas}
    zero = (0,) * len(betas[0])
    S = total[zero]
    safe = np.where(S > 0, S, 1.0)

    phi: Dict[MultiIndex, np.ndarray] = {}
    for beta in betas:
        acc = psi[beta].copy()
        for gamma in below(beta):
            if gamma == beta:
                continue
            rest = tuple(b - g for b, g in zip(beta, gamma))
            acc -= binom_mi(beta, gamma) * phi[gamma] * total[rest]
        phi[beta] = np.where(S > 0, acc / safe, 0.0)
    return phi


def partition_derivatives(
    cover: WhitneyCover, ids: Sequence[int], X: np.ndarray, alphas: Iterable[MultiIndex]
) -> Dict[MultiIndex, np.ndarray]:
    """
    D^beta phi_K(x) for phi_K = psi_K / sum_J psi_J.

    ids must contain every cube whose star meets the points X.

    Returns:
        beta -> array of shape (len(ids), N) for all beta below some alpha
    """
    ids = np.asarray(ids, dtype=int)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    betas = derivative_closure(alphas)
    psi = bump_derivatives(cover.centers[ids], cover.half_sides[ids], X, betas)
    return _quotient(psi, betas, axis=0)


def padded_neighbors(cover: WhitneyCover, cube_ids: Sequence[int]) -> np.ndarray:
    """T(K) of each listed cube as rows of a (C, Kmax) index table padded with -1"""
    rows = [cover.neighbors[int(i)] for i in cube_ids]
    width = max((len(r) for r in rows), default=0)
    table = np.full((len(rows), width), -1, dtype=int)
    for r, nbrs in enumerate(rows):
        table[r, : len(nbrs)] = nbrs
    return table


def local_partition_derivatives(
    cover: WhitneyCover, nbr: np.ndarray, X: np.ndarray, alphas: Iterable[MultiIndex]
) -> Dict[MultiIndex, np.ndarray]:
    """
    D^beta phi_K on points X (C, G, n) lying in cube c, over K in row c of nbr.

    Returns:
        beta -> array (C, Kmax, G); padded slots hold 0
    """
    betas = derivative_closure(alphas)
    mask = nbr >= 0
    safe_ids = np.where(mask, nbr, 0)
    centers = cover.centers[safe_ids]
    halves = cover.half_sides[safe_ids]
    U = (X[:, None, :, :] - centers[:, :, None, :]) / halves[:, :, None, None]
    psi = _tensor_bumps(U, halves[:, :, None], betas)
    for beta in betas:
        psi[beta] = np.where(mask[:, :, None], psi[beta], 0.0)
    return _quotient(psi, betas, axis=1)


def pou_eval(cover: WhitneyCover, Q: int, alpha: MultiIndex, x) -> float:
    """
    D^alpha phi_Q(x).

    Raises:
        CollarError: x lies in the unresolved collar
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if not 0 <= Q < len(cover):
        raise IndexError(f"cube index {Q} out of range")
    distance = cover.collar_distance(x)
    if distance is not None and cover.owner(x) is None:
        raise CollarError(f"point {x.tolist()} lies in the collar", distance)
    candidates = cover.locate(x)
    if Q not in candidates:
        return 0.0
    phi = partition_derivatives(cover, candidates, x[None, :], [tuple(alpha)])
    row = int(np.flatnonzero(candidates == Q)[0])
    return float(phi[tuple(alpha)][row, 0])


def packing_bound(dim: int) -> int:
    """
    Largest |T(K)| allowed when touching diameters differ by at most 4.

    Every neighbor is dyadically aligned with side at least diam K / 4, so it
    covers a distinct cell of the ring of such cells around K: 6^n - 4^n of them.
    """
    return 1 + 6 ** dim - 4 ** dim


def cover_statistics(cover: WhitneyCover) -> Dict[str, Any]:
    """Measured packing constants: |T(K)| and neighbor diameter ratios"""
    sizes = np.asarray([len(t) for t in cover.neighbors]) if len(cover) else np.zeros(0)
    ratios = [
        cover.half_sides[k] / cover.half_sides[j]
        for k in range(len(cover))
        for j in cover.neighbors[k]
    ]
    return {
        "cubes": len(cover),
        "max_touching": int(sizes.max()) if len(sizes) else 0,
        "min_neighbor_ratio": float(min(ratios)) if ratios else 1.0,
        "max_neighbor_ratio": float(max(ratios)) if ratios else 1.0,
        "collar_cubes": int(len(cover.collar_centers)),
        "collar_measure": cover.collar_measure,
    }


def cover_violations(cover: WhitneyCover) -> List[str]:
    """Exact checks of diam <= dist <= 4 diam, 9Q meets E, touching symmetry and the packing bound"""
    violations: List[str] = []
    bound = packing_bound(cover.dim)
    crowded = [k for k, nbrs in enumerate(cover.neighbors) if len(nbrs) > bound]
    violations.extend(f"cube {k}: |T(K)| = {len(cover.neighbors[k])} > packing bound {bound}" for k in crowded)
    diam = cover.diams
    bad = np.flatnonzero((diam > cover.dists) | (cover.dists > 4.0 * diam))
    violations.extend(f"cube {i}: dist {cover.dists[i]} outside [{diam[i]}, {4 * diam[i]}]" for i in bad)
    gaps, _ = cKDTree(cover.points).query(cover.centers, k=1, p=np.inf)
    far = np.flatnonzero(gaps > 9.0 * cover.half_sides)
    violations.extend(f"cube {i}: 9Q misses E" for i in far)
    for k, nbrs in enumerate(cover.neighbors):
        for j in nbrs:
            if k not in cover.neighbors[j]:
                violations.append(f"touching not symmetric for cubes {k}, {j}")
    return violations


def star_equivalence_violations(cover: WhitneyCover, limit: int = 2000) -> List[str]:
    """Q* meets K* exactly when Q meets K, checked on the first cubes of the cover"""
    violations: List[str] = []
    count = min(limit, len(cover))
    for k in range(count):
        gaps = np.max(np.abs(cover.centers - cover.centers[k]), axis=1)
        star_meet = gaps <= STAR * (cover.half_sides + cover.half_sides[k]) * (1.0 + ADJ_TOL)
        meet = np.zeros(len(cover), dtype=bool)
        meet[cover.neighbors[k]] = True
        if np.any(star_meet != meet):
            violations.append(f"cube {k}: star intersection differs from touching")
    return violations


def partition_check(cover: WhitneyCover, samples: np.ndarray, max_order: int) -> Dict[str, Any]:
    """Sum of phi and of its derivatives at covered sample points"""
    alphas = multi_indices(cover.dim, max_order)
    worst_sum = 0.0
    worst_derivative = 0.0
    worst_support = 0
    for x in samples:
        owner = cover.owner(x)
        if owner is None:
            continue
        candidates = cover.locate(x)
        phi = partition_derivatives(cover, candidates, x[None, :], alphas)
        h = cover.half_sides[owner]
        for alpha in alphas:
            total = float(phi[alpha][:, 0].sum())
            if sum(alpha) == 0:
                worst_sum = max(worst_sum, abs(total - 1.0))
            else:
                worst_derivative = max(worst_derivative, abs(total) * (2.0 * h) ** sum(alpha))
        outside = np.max(np.abs(cover.centers[candidates] - x), axis=1) > STAR * cover.half_sides[candidates]
        worst_support += int(np.count_nonzero(np.abs(phi[(0,) * cover.dim][outside, 0]) > 0))
    return {"max_sum_error": worst_sum, "max_scaled_derivative_sum": worst_derivative, "support_violations": worst_support}
