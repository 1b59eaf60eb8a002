"""
Lacunary Whitney Extension
F = sum_Q phi_Q P_{Pr(L(Q))} with exact derivatives, and the truncated variant F_eps
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field as dataclass_field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from ..errors import CollarError, InvariantViolation
from .geometry import Cube
from .jets import JetField, MultiIndex, Poly, below, binom_mi, format_multi_index, multi_indices
from .lacunae import Lacuna, cube_lacuna_map
from .quadrature import cube_nodes
from .whitney import WhitneyCover, derivative_closure, local_partition_derivatives, padded_neighbors, partition_derivatives

logger = logging.getLogger(__name__)

ZERO_KEY = -1
SUPPORT_FACTOR = 20.0


@dataclass(frozen=True, eq=False)
class ExtensionPlan:
    """
    Everything needed to evaluate the extension.

    a_index[i] is the point of E whose jet serves cube i; far_index is the
    center of the unbounded lacuna, whose jet is used outside the window.
    """

    field: JetField
    cover: WhitneyCover
    lacunae: List[Lacuna]
    a_index: np.ndarray
    far_index: int
    polys: List[Poly] = dataclass_field(repr=False)
    tree: cKDTree = dataclass_field(repr=False)

    @property
    def far_poly(self) -> Poly:
        return self.polys[self.far_index]

    def cube_poly(self, i: int) -> Poly:
        return self.polys[int(self.a_index[i])]


def plan_extension(field: JetField, cover: WhitneyCover, lacunae: Sequence[Lacuna], gamma_tilde: float = 180.0) -> ExtensionPlan:
    """
    Assign every Whitney cube the jet of its lacuna's center.

    Raises:
        InvariantViolation: a lacuna has no center, or a center lies outside gamma_tilde*Q
    """
    owner = cube_lacuna_map(lacunae, len(cover))
    if np.any(owner < 0):
        raise InvariantViolation("some cubes belong to no lacuna")
    centers = np.asarray([-1 if L.center is None else L.center for L in lacunae], dtype=int)
    if np.any(centers < 0):
        raise InvariantViolation("projector center missing for some lacuna")
    a_index = centers[owner]

    gaps = np.max(np.abs(cover.centers - field.points[a_index]), axis=1)
    bad = np.flatnonzero(gaps > gamma_tilde * cover.half_sides * (1.0 + 1e-12))
    if len(bad):
        raise InvariantViolation(f"{len(bad)} cubes have a_Q outside {gamma_tilde}Q (first: {int(bad[0])})")

    unbounded = [L for L in lacunae if L.unbounded]
    if unbounded:
        far_index = int(unbounded[0].center)
    else:
        biggest = int(np.argmax(cover.half_sides)) if len(cover) else 0
        far_index = int(a_index[biggest]) if len(cover) else 0
        logger.warning("no unbounded lacuna; far polynomial taken from the largest cube")

    return ExtensionPlan(
        field=field,
        cover=cover,
        lacunae=list(lacunae),
        a_index=a_index,
        far_index=far_index,
        polys=field.polys,
        tree=cKDTree(field.points),
    )


# ============================================================================
# Blending kernel
# ============================================================================

def _poly_table(plan: ExtensionPlan, keys: np.ndarray, X: np.ndarray, gammas: Iterable[MultiIndex]) -> Dict[MultiIndex, np.ndarray]:
    """D^gamma P_key at X for each distinct key; ZERO_KEY is the zero polynomial"""
    table = {}
    for gamma in gammas:
        rows = np.zeros((len(keys), len(X)))
        for r, key in enumerate(keys):
            if key != ZERO_KEY:
                rows[r] = plan.polys[int(key)].derivative_many(gamma, X)
        table[gamma] = rows
    return table


def blend(
    plan: ExtensionPlan,
    X: np.ndarray,
    ids: np.ndarray,
    ref_keys: np.ndarray,
    alphas: Sequence[MultiIndex],
    delta: Optional[float] = None,
) -> Dict[MultiIndex, np.ndarray]:
    """
    D^alpha F at covered points X using candidate cubes ids.

    Written around a reference jet P_ref per point (the jet of a cube containing
    it): D^a F = D^a P_ref + sum_K sum_{b<=a} C(a,b) D^b phi_K D^{a-b}(P_K - P_ref).
    With delta set, cubes with diam >= delta carry the zero polynomial.
    """
    ids = np.asarray(ids, dtype=int)
    keys = plan.a_index[ids].astype(int)
    if delta is not None:
        keys = np.where(plan.cover.diams[ids] < delta, keys, ZERO_KEY)
    distinct = np.unique(np.concatenate([keys, ref_keys]))
    key_row = np.searchsorted(distinct, keys)
    ref_row = np.searchsorted(distinct, ref_keys)
    cols = np.arange(len(X))

    gammas = derivative_closure(alphas)
    values = _poly_table(plan, distinct, X, gammas)
    phi = partition_derivatives(plan.cover, ids, X, alphas)

    out = {}
    for alpha in alphas:
        alpha = tuple(alpha)
        total = values[alpha][ref_row, cols].copy()
        for beta in below(alpha):
            rest = tuple(a - b for a, b in zip(alpha, beta))
            diff = values[rest][key_row] - values[rest][ref_row, cols][None, :]
            total += binom_mi(alpha, beta) * np.sum(phi[beta] * diff, axis=0)
        out[alpha] = total
    return out


def cube_derivatives(
    plan: ExtensionPlan,
    cube_ids: np.ndarray,
    order: int,
    alphas: Sequence[MultiIndex],
    delta: Optional[float] = None,
) -> Tuple[np.ndarray, Dict[MultiIndex, np.ndarray]]:
    """Quadrature weights (C, G) and D^alpha F at the nodes (C, G) of each cube"""
    cover = plan.cover
    cube_ids = np.asarray(cube_ids, dtype=int)
    X, W = cube_nodes(cover.centers[cube_ids], cover.half_sides[cube_ids], order)
    C, G, n = X.shape
    rows = np.arange(C)

    def served(ids: np.ndarray) -> np.ndarray:
        keys = plan.a_index[ids].astype(int)
        if delta is None:
            return keys
        return np.where(cover.diams[ids] < delta, keys, ZERO_KEY)

    ref_keys = served(cube_ids)
    nbr = padded_neighbors(cover, cube_ids)
    nbr_keys = np.where(nbr >= 0, served(np.where(nbr >= 0, nbr, 0)), ref_keys[:, None])
    distinct = np.unique(np.concatenate([nbr_keys.reshape(-1), ref_keys]))
    key_row = np.searchsorted(distinct, nbr_keys)
    ref_row = np.searchsorted(distinct, ref_keys)

    alphas = [tuple(a) for a in alphas]
    table = {
        gamma: v.reshape(len(distinct), C, G)
        for gamma, v in _poly_table(plan, distinct, X.reshape(-1, n), derivative_closure(alphas)).items()
    }
    phi = local_partition_derivatives(cover, nbr, X, alphas)

    out = {}
    for alpha in alphas:
        total = table[alpha][ref_row, rows, :].copy()
        for beta in below(alpha):
            rest = tuple(a - b for a, b in zip(alpha, beta))
            ref = table[rest][ref_row, rows, :]
            diff = table[rest][key_row, rows[:, None], :] - ref[:, None, :]
            total += binom_mi(alpha, beta) * np.sum(phi[beta] * diff, axis=1)
        out[alpha] = total
    return W, out


# ============================================================================
# Point evaluation
# ============================================================================

def _check_alpha(plan: ExtensionPlan, alpha: MultiIndex, on_E: bool) -> None:
    if len(alpha) != plan.field.dim:
        raise ValueError(f"multi-index {alpha} does not fit dimension {plan.field.dim}")
    limit = plan.field.m - 1 if on_E else plan.field.m + 1
    if sum(alpha) > limit:
        raise ValueError(f"|alpha| = {sum(alpha)} exceeds {limit} {'on E' if on_E else 'off E'}")


def evaluate(
    plan: ExtensionPlan, X, alphas: Sequence[MultiIndex], delta: Optional[float] = None
) -> Dict[MultiIndex, np.ndarray]:
    """
    D^alpha F (or D^alpha F_eps when delta is set) at every row of X.

    Raises:
        CollarError: some point lies in the unresolved collar
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    alphas = [tuple(a) for a in alphas]
    out = {alpha: np.zeros(len(X)) for alpha in alphas}
    cover = plan.cover
    dist_E, nearest = plan.tree.query(X, k=1, p=np.inf)

    groups: Dict[int, List[int]] = defaultdict(list)
    for i, x in enumerate(X):
        if dist_E[i] == 0.0:
            for alpha in alphas:
                _check_alpha(plan, alpha, on_E=True)
                out[alpha][i] = plan.field.jet_value(int(nearest[i]), alpha)
            continue
        for alpha in alphas:
            _check_alpha(plan, alpha, on_E=False)
        if not cover.in_window(x):
            use_far = delta is None or dist_E[i] < SUPPORT_FACTOR * delta
            for alpha in alphas:
                out[alpha][i] = plan.far_poly.derivative(alpha, x) if use_far else 0.0
            continue
        owner = cover.owner(x)
        if owner is None:
            raise CollarError(
                f"point {x.tolist()} lies in the collar (distance {dist_E[i]:.3g} to E)", float(dist_E[i])
            )
        groups[owner].append(i)

    for owner, rows in groups.items():
        key = int(plan.a_index[owner])
        if delta is not None and cover.diams[owner] >= delta:
            key = ZERO_KEY
        values = blend(plan, X[rows], cover.neighbors[owner], np.full(len(rows), key), alphas, delta)
        for alpha in alphas:
            out[alpha][rows] = values[alpha]
    return out


def extend_eval(plan: ExtensionPlan, x, alpha: MultiIndex) -> float:
    """D^alpha F(x); on E this is the jet value D^alpha P_x(x)"""
    return float(evaluate(plan, np.asarray(x, dtype=float).reshape(1, -1), [tuple(alpha)])[tuple(alpha)][0])


def truncation_delta(epsilon: float, delta_factor: float = 1e-5) -> float:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return delta_factor * epsilon


def extend_eval_wmp(plan: ExtensionPlan, x, alpha: MultiIndex, epsilon: float, delta_factor: float = 1e-5) -> float:
    """D^alpha F_eps(x): cubes with diam >= delta = delta_factor*eps carry the zero jet"""
    delta = truncation_delta(epsilon, delta_factor)
    return float(
        evaluate(plan, np.asarray(x, dtype=float).reshape(1, -1), [tuple(alpha)], delta)[tuple(alpha)][0]
    )


def truncation_depth(window: Cube, delta: float, resolution_factor: float = 64.0) -> int:
    """Refinement depth at which the finest cubes are resolution_factor times below delta"""
    return max(1, math.ceil(math.log2(2.0 * window.half_side * resolution_factor / delta)))


def _shell_points(rng: np.random.Generator, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """centers + r u with ||u|| = 1 in the uniform norm"""
    u = rng.uniform(-1.0, 1.0, size=centers.shape)
    axis = rng.integers(centers.shape[1], size=len(centers))
    u[np.arange(len(centers)), axis] = rng.choice([-1.0, 1.0], size=len(centers))
    return centers + radii[:, None] * u


def truncation_check(
    plan: ExtensionPlan, epsilon: float, delta_factor: float = 1e-5, samples: int = 64, seed: int = 0
) -> Dict[str, Any]:
    """
    Compare F_eps with F near E and with 0 far from E on sampled points.

    Near points lie at distance below delta/4 from E, where every cube meeting
    them is smaller than delta, so F_eps = F exactly. Far points lie at
    distance 20 delta or more, where F_eps vanishes. Collar points are skipped.
    """
    delta = truncation_delta(epsilon, delta_factor)
    points = plan.field.points
    n = plan.field.dim
    alphas = multi_indices(n, plan.field.m - 1)
    rng = np.random.default_rng(seed)

    picks = rng.integers(len(points), size=samples)
    near = _shell_points(rng, points[picks], rng.uniform(delta / 8.0, delta / 4.0, size=samples))
    picks = rng.integers(len(points), size=samples)
    far = _shell_points(rng, points[picks], SUPPORT_FACTOR * delta * rng.uniform(1.0, 8.0, size=samples))
    window = plan.cover.window
    far = np.vstack([far, rng.uniform(window.lower, window.upper, size=(samples, n))])

    near_dist, _ = plan.tree.query(near, k=1, p=np.inf)
    far_dist, _ = plan.tree.query(far, k=1, p=np.inf)
    near = near[(near_dist > 0) & (near_dist < delta / 4.0)]
    far = far[far_dist >= SUPPORT_FACTOR * delta]

    report: Dict[str, Any] = {
        "delta": delta,
        "near_checked": 0,
        "far_checked": 0,
        "skipped": 0,
        "near_max_difference": 0.0,
        "near_scale": 0.0,
        "far_max_value": 0.0,
    }
    for kind, X in (("near", near), ("far", far)):
        for x in X:
            try:
                truncated = evaluate(plan, x[None, :], alphas, delta)
                full = evaluate(plan, x[None, :], alphas) if kind == "near" else None
            except CollarError:
                report["skipped"] += 1
                continue
            report[f"{kind}_checked"] += 1
            for alpha in alphas:
                value = float(truncated[alpha][0])
                if full is None:
                    report["far_max_value"] = max(report["far_max_value"], abs(value))
                else:
                    exact = float(full[alpha][0])
                    report["near_max_difference"] = max(report["near_max_difference"], abs(value - exact))
                    report["near_scale"] = max(report["near_scale"], abs(exact))
    return report


def window_grid(plan: ExtensionPlan, resolution: int) -> np.ndarray:
    """Uniform grid over the window, resolution points per axis"""
    window = plan.cover.window
    axes = [
        np.linspace(c - window.half_side, c + window.half_side, resolution) for c in window.center
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def grid_evaluation(
    plan: ExtensionPlan,
    resolution: int,
    alphas: Optional[Sequence[MultiIndex]] = None,
    epsilon: Optional[float] = None,
    delta_factor: float = 1e-5,
) -> pd.DataFrame:
    """
    Rows (x coords, alpha, value) on a window grid; collar points are skipped.

    Args:
        plan: extension plan
        resolution: grid points per axis
        alphas: derivatives to dump (default: all orders <= m-1)
        epsilon: when set, dump F_eps instead of F
    """
    n, m = plan.field.dim, plan.field.m
    alphas = list(alphas) if alphas is not None else list(multi_indices(n, m - 1))
    delta = truncation_delta(epsilon, delta_factor) if epsilon is not None else None
    grid = window_grid(plan, resolution)
    rows = []
    skipped = 0
    for x in grid:
        try:
            values = evaluate(plan, x[None, :], alphas, delta)
        except CollarError:
            skipped += 1
            continue
        for alpha in alphas:
            rows.append([*x.tolist(), format_multi_index(alpha), float(values[alpha][0])])
    if skipped:
        logger.warning("skipped %d grid points inside the collar", skipped)
    columns = [f"x{i}" for i in range(n)] + ["alpha", "value"]
    return pd.DataFrame(rows, columns=columns)


def reproduction_error(plan: ExtensionPlan, generator: Poly, X: np.ndarray) -> Tuple[float, float]:
    """Max |D^a F - D^a G| over X and |a| <= m-1, with the scale max |D^a G|"""
    alphas = multi_indices(plan.field.dim, plan.field.m - 1)
    worst, scale = 0.0, 0.0
    for x in X:
        try:
            values = evaluate(plan, x[None, :], alphas)
        except CollarError:
            continue
        for alpha in alphas:
            exact = generator.derivative(alpha, x)
            worst = max(worst, abs(values[alpha][0] - exact))
            scale = max(scale, abs(exact))
    return worst, scale
