"""
Trace Functionals
Brute-force sparse-family seminorm, sharp maximal function, m=1 functionals, quadrature of L^m_p seminorms and the W^m_p parts
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from ..errors import CapacityError, ExponentError, GeometryError, QuadratureError
from .extension import ExtensionPlan, cube_derivatives, truncation_delta
from .geometry import REL_TOL, Cube
from .jets import JetField, check_exponent, exact_order, factorial_mi
from .lacunae import Lacuna
from .quadrature import QuadratureSpec, chunks, cube_nodes
from .sparse_graph import SparseGraph, pair_term
from .whitney import WhitneyCover, whitney_decompose

logger = logging.getLogger(__name__)

BRUTEFORCE_MAX_POINTS = 8


@dataclass(frozen=True)
class Estimate:
    """A numerical functional with a one-sided error bar and whatever else was measured"""

    value: float
    error_bar: float = 0.0
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "error_bar": self.error_bar, **self.details}


def _finish(total: float, p: float) -> float:
    return total if math.isinf(p) else total ** (1.0 / p)


# ============================================================================
# Brute-force sparse families
# ============================================================================

def pair_value(field: JetField, x: int, y: int, p: float) -> float:
    """Larger orientation of the two-point term"""
    return max(pair_term(field, x, y, p), pair_term(field, y, x, p))


def certificate_cube(points: np.ndarray, x: int, y: int, gamma: float) -> Cube:
    """
    Smallest midpoint cube Q with x, y in gamma*Q.

    Concentric candidates nest, so the smallest one is the hardest to collide
    with; its diameter ||x - y|| / gamma stays below gamma ||x - y|| for gamma >= 1.
    """
    mid = (points[x] + points[y]) / 2.0
    length = float(np.max(np.abs(points[x] - points[y])))
    return Cube(tuple(mid), length / (2.0 * gamma))


def best_family(
    field: JetField,
    p: float,
    gamma: float,
    max_length: Optional[float] = None,
    max_points: int = BRUTEFORCE_MAX_POINTS,
) -> Tuple[float, List[Tuple[int, int]]]:
    """
    Largest family sum over certified families of distinct pairs.

    Branch and bound over pairs sorted by their term; a pair joins the family
    when its certificate cube has interior disjoint from all cubes already taken.

    Returns:
        (sum of terms, or max for p = inf; the chosen pairs)
    """
    if field.size > max_points:
        raise CapacityError(f"brute force enumerates at most {max_points} points, got {field.size}")
    if gamma < 1:
        raise GeometryError(f"gamma must be >= 1, got {gamma}")
    points = field.points
    pairs = [
        (x, y)
        for x, y in itertools.combinations(range(field.size), 2)
        if max_length is None or np.max(np.abs(points[x] - points[y])) <= max_length * (1.0 + REL_TOL)
    ]
    if not pairs:
        return 0.0, []
    terms = np.asarray([pair_value(field, x, y, p) for x, y in pairs])
    if math.isinf(p):
        k = int(np.argmax(terms))
        return float(terms[k]), [pairs[k]]

    order = np.argsort(-terms, kind="stable")
    pairs = [pairs[i] for i in order]
    terms = terms[order]
    cubes = [certificate_cube(points, x, y, gamma) for x, y in pairs]
    remaining = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]])

    best = {"value": -1.0, "family": []}

    def search(pos: int, chosen: List[int], value: float) -> None:
        if value + remaining[pos] <= best["value"]:
            return
        if pos == len(pairs):
            best["value"], best["family"] = value, list(chosen)
            return
        if all(not cubes[pos].interiors_overlap(cubes[j]) for j in chosen):
            chosen.append(pos)
            search(pos + 1, chosen, value + float(terms[pos]))
            chosen.pop()
        search(pos + 1, chosen, value)

    search(0, [], 0.0)
    return float(best["value"]), [pairs[i] for i in best["family"]]


def trace_norm_bruteforce(field: JetField, p: Optional[float] = None, gamma: float = 3.0, max_points: int = BRUTEFORCE_MAX_POINTS) -> float:
    """
    Supremum over certified gamma-sparse families of the two-point sum, ^{1/p}.

    Raises:
        CapacityError: more than max_points points
        ExponentError: p <= n
    """
    p = check_exponent(field.p if p is None else p, field.dim)
    total, _ = best_family(field, p, gamma, max_points=max_points)
    return _finish(total, p)


# ============================================================================
# Sharp maximal function
# ============================================================================

def _pair_indices(size: int) -> Tuple[np.ndarray, np.ndarray]:
    pairs = np.asarray(list(itertools.combinations(range(size), 2)), dtype=int).reshape(-1, 2)
    return pairs[:, 0], pairs[:, 1]


def sharp_max_many(field: JetField, X: np.ndarray) -> np.ndarray:
    """P#(x) = sup_{y != z} |P_y(x) - P_z(x)| / (||x-y||^m + ||x-z||^m) at every row of X"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if field.size < 2:
        return np.zeros(len(X))
    zero = (0,) * field.dim
    values = np.vstack([P.derivative_many(zero, X) for P in field.polys])
    dist = np.max(np.abs(X[None, :, :] - field.points[:, None, :]), axis=2) ** field.m
    a, b = _pair_indices(field.size)
    ratio = np.abs(values[a] - values[b]) / (dist[a] + dist[b])
    return ratio.max(axis=0)


def sharp_max_eval(field: JetField, x) -> float:
    return float(sharp_max_many(field, np.asarray(x, dtype=float).reshape(1, -1))[0])


def _window_cubes(cover: WhitneyCover) -> Tuple[np.ndarray, np.ndarray]:
    """Cover cubes together with collar cubes; they tile the window"""
    centers = np.vstack([cover.centers, cover.collar_centers]) if len(cover.collar_centers) else cover.centers
    halves = np.concatenate([cover.half_sides, np.full(len(cover.collar_centers), cover.collar_half_side)])
    return centers, halves


def _window_integral(cover: WhitneyCover, integrand: Callable[[np.ndarray], np.ndarray], quad: QuadratureSpec, p: float) -> float:
    """Integral of integrand^p over the window (max for p = inf)"""
    centers, halves = _window_cubes(cover)
    dim = centers.shape[1]
    total = 0.0
    for ids in chunks(len(centers), quad.chunk_cubes):
        X, W = cube_nodes(centers[ids], halves[ids], quad.order)
        values = integrand(X.reshape(-1, dim)).reshape(W.shape)
        if math.isinf(p):
            total = max(total, float(values.max(initial=0.0)))
        else:
            total += float(np.sum(values ** p * W))
    return total


def _shell_tail(profile: Callable[[float], float], R: float, dim: int, p: float) -> float:
    """Integral of profile(r)^p over ||x - c|| > R in uniform-norm shells"""
    value, _ = integrate.quad(lambda r: profile(r) ** p * dim * 2.0 ** dim * r ** (dim - 1), R, np.inf, limit=200)
    return float(value)


def polynomial_growth(field: JetField, center: np.ndarray) -> np.ndarray:
    """B_k = max over pairs of sum_{|a|=k} |D^a(P_y - P_z)(c)| / a!, so |P_y - P_z| <= sum_k B_k r^k"""
    B = np.zeros(field.m)
    if field.size < 2:
        return B
    c = center.reshape(1, -1)
    a, b = _pair_indices(field.size)
    polys = field.polys
    for k in range(field.m):
        per_pair = np.zeros(len(a))
        for alpha in exact_order(field.dim, k):
            at_c = np.asarray([P.derivative_many(alpha, c)[0] for P in polys])
            per_pair += np.abs(at_c[a] - at_c[b]) / factorial_mi(alpha)
        B[k] = float(per_pair.max(initial=0.0))
    return B


def sharp_tail_bound(field: JetField, window: Cube, p: float) -> float:
    """
    Upper bound for the integral of (P#)^p outside the window.

    With r = ||x - c|| and rho_E = max ||y - c||, |P_y(x) - P_z(x)| <= sum_k B_k r^k
    and ||x-y||^m + ||x-z||^m >= 2 (r - rho_E)^m.
    """
    if field.size < 2:
        return 0.0
    c = np.asarray(window.center)
    rho = float(np.max(np.abs(field.points - c)))
    B = polynomial_growth(field, c)

    def profile(r: float) -> float:
        return float(np.polyval(B[::-1], r)) / (2.0 * (r - rho) ** field.m)

    if math.isinf(p):
        radii = window.half_side * 2.0 ** np.arange(0, 40)
        return float(max(profile(r) for r in radii))
    return _shell_tail(profile, window.half_side, field.dim, p)


def sharp_max_lp(field: JetField, quad: QuadratureSpec, cover: Optional[WhitneyCover] = None, p: Optional[float] = None) -> Estimate:
    """
    ||P#||_{L_p}: quadrature over the window plus a separately reported tail bound.

    value covers the window only; error_bar is the tail bound ^{1/p}.
    """
    p = check_exponent(field.p if p is None else p, field.dim)
    if field.size < 2:
        return Estimate(0.0, 0.0, {"window": 0.0, "tail": 0.0})
    cover = cover if cover is not None else whitney_decompose(field.points, window=quad.window)
    spec = quad.for_jet_order(field.m)
    inside = _window_integral(cover, lambda X: sharp_max_many(field, X), spec, p)
    tail = sharp_tail_bound(field, cover.window, p)
    if math.isinf(p):
        return Estimate(inside, tail, {"window": inside, "tail": tail, "upper": max(inside, tail)})
    return Estimate(
        _finish(inside, p),
        _finish(tail, p),
        {"window": inside, "tail": tail, "upper": _finish(inside + tail, p)},
    )


# ============================================================================
# m = 1 functionals
# ============================================================================

def constant_field(E, f, p: float) -> JetField:
    points = np.atleast_2d(np.asarray(E, dtype=float))
    values = np.asarray(f, dtype=float).reshape(-1, 1)
    return JetField(points, values, 1, p)


def psi_integrand(field: JetField, X: np.ndarray, p: float) -> np.ndarray:
    """(sup_{y != z} |f(y) - f(z)|^p / (||x-y||^p + ||x-z||^p))^{1/p}"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if field.size < 2:
        return np.zeros(len(X))
    f = field.coeffs[:, 0]
    dist = np.max(np.abs(X[None, :, :] - field.points[:, None, :]), axis=2)
    a, b = _pair_indices(field.size)
    jumps = np.abs(f[a] - f[b])[:, None]
    if math.isinf(p):
        return (jumps / np.maximum(dist[a], dist[b])).max(axis=0)
    ratio = jumps ** p / (dist[a] ** p + dist[b] ** p)
    return ratio.max(axis=0) ** (1.0 / p)


def psi_tail_bound(field: JetField, window: Cube, p: float) -> float:
    """Integral of the Psi integrand^p outside the window"""
    if field.size < 2:
        return 0.0
    c = np.asarray(window.center)
    rho = float(np.max(np.abs(field.points - c)))
    jump = float(np.ptp(field.coeffs[:, 0]))
    return _shell_tail(lambda r: jump / (2.0 * (r - rho) ** p) ** (1.0 / p), window.half_side, field.dim, p)


def phi_m1(
    f, E, p: float, gamma: float = 3.0, graph: Optional[SparseGraph] = None, max_points: int = BRUTEFORCE_MAX_POINTS
) -> Estimate:
    """
    Phi_{p,E}(f): the brute-force sparse-family value up to max_points points,
    the sum over graph edges (a lower bound) beyond.

    Raises:
        CapacityError: too many points and no graph
    """
    jf = constant_field(E, f, p)
    p = check_exponent(p, jf.dim)
    if jf.size <= max_points:
        return Estimate(trace_norm_bruteforce(jf, p, gamma, max_points), 0.0, {"method": "bruteforce"})
    if graph is None:
        raise CapacityError(f"Phi needs a graph for {jf.size} > {max_points} points")
    terms = [pair_term(jf, min(e.u, e.v), max(e.u, e.v), p) for e in graph.edges]
    total = max(terms, default=0.0) if math.isinf(p) else sum(terms)
    return Estimate(_finish(total, p), 0.0, {"method": "graph_lower_bound"})


def phi_psi_m1(
    f,
    E,
    p: float,
    quad: QuadratureSpec,
    gamma: float = 3.0,
    graph: Optional[SparseGraph] = None,
    cover: Optional[WhitneyCover] = None,
) -> Tuple[Estimate, Estimate]:
    """
    Phi_{p,E}(f) and Psi_{p,E}(f).

    Phi is the brute-force sparse-family value when E is small enough and the
    graph-edge lower bound otherwise (flagged in details). Psi is integrated
    over the window, its tail bound reported as error_bar.

    Raises:
        ExponentError: p <= n or p = inf (Psi needs finite p)
    """
    jf = constant_field(E, f, p)
    p = check_exponent(p, jf.dim)
    if math.isinf(p):
        raise ExponentError(f"Psi is defined for finite p > {jf.dim}")
    phi = phi_m1(f, E, p, gamma, graph)

    cover = cover if cover is not None else whitney_decompose(jf.points, window=quad.window)
    inside = _window_integral(cover, lambda X: psi_integrand(jf, X, p), quad, p)
    tail = psi_tail_bound(jf, cover.window, p)
    psi = Estimate(_finish(inside, p), _finish(tail, p), {"window": inside, "tail": tail, "upper": _finish(inside + tail, p)})
    return phi, psi


# ============================================================================
# Sobolev seminorm of the extension
# ============================================================================

def _order_m_integral(
    plan: ExtensionPlan, cube_ids: np.ndarray, quad: QuadratureSpec, p: float, delta: Optional[float]
) -> Tuple[float, float]:
    """(integral of sum_{|a|=m} |D^a F|^p over the cubes, largest node integrand)"""
    alphas = exact_order(plan.field.dim, plan.field.m)
    total, peak = 0.0, 0.0
    for part in chunks(len(cube_ids), quad.chunk_cubes):
        ids = cube_ids[part]
        W, values = cube_derivatives(plan, ids, quad.order, alphas, delta)
        if math.isinf(p):
            local = np.max(np.stack([np.abs(v) for v in values.values()]), axis=0)
            total = max(total, float(local.max(initial=0.0)))
        else:
            local = sum(np.abs(v) ** p for v in values.values())
            total += float(np.sum(local * W))
        peak = max(peak, float(local.max(initial=0.0)))
    return total, peak


def sobolev_seminorm(plan: ExtensionPlan, p: Optional[float] = None, quad: Optional[QuadratureSpec] = None, delta: Optional[float] = None) -> Estimate:
    """
    (sum_{|a|=m} int_window |D^a F|^p)^{1/p} by tensor quadrature on every Whitney cube.

    Outside the window F is a polynomial of degree <= m-1 and contributes 0.
    error_bar bounds the collar: largest integrand on the two finest levels
    times the collar measure.

    Raises:
        QuadratureError: refinement check disagrees by more than the tolerance
    """
    p = check_exponent(plan.field.p if p is None else p, plan.field.dim)
    quad = (quad or QuadratureSpec()).for_jet_order(plan.field.m)
    cover = plan.cover
    all_ids = np.arange(len(cover))
    total, _ = _order_m_integral(plan, all_ids, quad, p, delta)

    fine = all_ids[cover.levels >= cover.depth_cap - 1] if len(cover) else all_ids
    _, peak = _order_m_integral(plan, fine, quad, p, delta) if len(fine) else (0.0, 0.0)
    collar = peak if math.isinf(p) else (peak * cover.collar_measure) ** (1.0 / p)
    value = _finish(total, p)
    details: Dict[str, Any] = {"order": quad.order, "cubes": len(cover), "collar_measure": cover.collar_measure}

    if quad.refinement_check:
        refined_total, _ = _order_m_integral(plan, all_ids, quad.refined(), p, delta)
        refined = _finish(refined_total, p)
        drift = abs(refined - value) / max(abs(refined), 1e-300)
        details["refined_value"] = refined
        if refined > 1e-8 and drift > quad.refinement_tolerance:
            raise QuadratureError(f"quadrature order {quad.order} too low: refinement changes the seminorm by {drift:.1%}")
        if drift > quad.refinement_tolerance / 2:
            logger.warning("quadrature refinement drift %.2f%%", 100 * drift)
    return Estimate(value, collar, details)


def lp_norm(plan: ExtensionPlan, p: float, quad: QuadratureSpec, delta: Optional[float] = None) -> float:
    """||F||_{L_p(window)} over the Whitney cubes (collar excluded)"""
    zero = (0,) * plan.field.dim
    total = 0.0
    for part in chunks(len(plan.cover), quad.chunk_cubes):
        W, values = cube_derivatives(plan, part, quad.order, [zero], delta)
        if math.isinf(p):
            total = max(total, float(np.abs(values[zero]).max(initial=0.0)))
        else:
            total += float(np.sum(np.abs(values[zero]) ** p * W))
    return _finish(total, p)


# ============================================================================
# Oscillation sums
# ============================================================================

def oscillation_sum(G: Callable[[np.ndarray], np.ndarray], cubes: Sequence[Cube], points, p: float) -> float:
    """
    sum_i |G(x_i) - G(c_i)|^p / (diam Q_i)^{p - n} over disjoint equal cubes.

    Raises:
        GeometryError: cubes differ in size, overlap, or miss their points
    """
    if not cubes:
        return 0.0
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) != len(cubes):
        raise GeometryError("need one point per cube")
    side = cubes[0].half_side
    if any(abs(Q.half_side - side) > REL_TOL * side for Q in cubes):
        raise GeometryError("oscillation sums need equal cubes")
    for (i, Q), (j, K) in itertools.combinations(enumerate(cubes), 2):
        if Q.interiors_overlap(K):
            raise GeometryError(f"cubes {i} and {j} overlap")
    for i, (Q, x) in enumerate(zip(cubes, points)):
        if not Q.contains(x):
            raise GeometryError(f"point {i} lies outside its cube")
    centers = np.asarray([Q.center for Q in cubes])
    jumps = np.abs(np.asarray(G(points), dtype=float) - np.asarray(G(centers), dtype=float))
    n = cubes[0].dim
    diam = cubes[0].diam
    if math.isinf(p):
        return float(np.max(jumps / diam))
    return float(np.sum(jumps ** p) / diam ** (p - n))


def random_cube_family(rng: np.random.Generator, window: Cube, count: int, half_side: float) -> Tuple[List[Cube], np.ndarray]:
    """Disjoint equal cubes on a random subset of grid slots inside window, with random points in them"""
    n = window.dim
    slots = max(1, int(window.half_side // half_side))
    grid = np.asarray(list(itertools.product(range(slots), repeat=n)))
    picked = grid[rng.choice(len(grid), size=min(count, len(grid)), replace=False)]
    lower = np.asarray(window.center) - window.half_side
    centers = lower + (2 * picked + 1) * half_side
    cubes = [Cube(tuple(c), half_side) for c in centers]
    points = centers + rng.uniform(-half_side, half_side, size=centers.shape)
    return cubes, points


# ============================================================================
# W^m_p quantities
# ============================================================================

@dataclass(frozen=True)
class WmpParts:
    n_flat: float
    lacuna_sum: float
    point_sum: float
    method: str

    @property
    def total(self) -> float:
        return self.point_sum + self.n_flat + self.lacuna_sum

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_flat": self.n_flat,
            "lacuna_sum": self.lacuna_sum,
            "point_sum": self.point_sum,
            "total": self.total,
            "method": self.method,
        }


def wmp_norm_parts(
    field: JetField,
    epsilon: float,
    p: Optional[float],
    lacunae: Sequence[Lacuna],
    cover: WhitneyCover,
    graph: Optional[SparseGraph] = None,
    gamma: float = 3.0,
    max_points: int = BRUTEFORCE_MAX_POINTS,
) -> WmpParts:
    """
    Discrete W^m_p trace quantities at scale epsilon.

    n_flat restricts the sparse-family sum to pairs within epsilon (graph edges
    when E is too large to enumerate); lacuna_sum weights the jet of each
    lacuna center by min(eps, diam L)^{|a|p + n}; point_sum weights |P_x(x)|^p
    by min(eps, sep(x)/2)^n.
    """
    p = check_exponent(field.p if p is None else p, field.dim)
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n = field.dim

    if field.size <= max_points:
        total, _ = best_family(field, p, gamma, max_length=epsilon, max_points=max_points)
        method = "bruteforce"
    else:
        if graph is None:
            raise CapacityError(f"n_flat needs a graph for {field.size} > {max_points} points")
        terms = [
            pair_term(field, min(e.u, e.v), max(e.u, e.v), p)
            for e in graph.edges
            if np.max(np.abs(field.points[e.u] - field.points[e.v])) <= epsilon * (1.0 + REL_TOL)
        ]
        total = (max(terms) if math.isinf(p) else sum(terms)) if terms else 0.0
        method = "graph"
    n_flat = _finish(total, p)

    lac_total = 0.0
    for L in lacunae:
        if L.center is None:
            continue
        size = epsilon if L.unbounded else min(epsilon, float(cover.diams[L.q_max]))
        for alpha in field.alphas:
            value = abs(field.jet_value(L.center, alpha))
            if math.isinf(p):
                lac_total = max(lac_total, size ** sum(alpha) * value)
            else:
                lac_total += size ** (sum(alpha) * p + n) * value ** p
    lacuna_sum = _finish(lac_total, p)

    zero = (0,) * n
    values = np.abs(field.coeffs[:, field.alphas.index(zero)])
    if field.size > 1:
        gaps, _ = cKDTree(field.points).query(field.points, k=2, p=np.inf)
        weights = np.minimum(epsilon, gaps[:, 1] / 2.0) ** n
    else:
        weights = np.full(1, epsilon ** n)
    point_sum = float(values.max()) if math.isinf(p) else float(np.sum(weights * values ** p)) ** (1.0 / p)
    return WmpParts(n_flat, lacuna_sum, point_sum, method)


def wmp_numerical_norm(
    plan: ExtensionPlan, epsilon: float, p: Optional[float] = None, quad: Optional[QuadratureSpec] = None, delta_factor: float = 1e-5
) -> Estimate:
    """||F_eps||_{W^m_p}: order-m seminorm plus L_p norm of F_eps over the window"""
    p = check_exponent(plan.field.p if p is None else p, plan.field.dim)
    quad = (quad or QuadratureSpec()).for_jet_order(plan.field.m)
    delta = truncation_delta(epsilon, delta_factor)
    seminorm = sobolev_seminorm(plan, p, quad, delta)
    lp = lp_norm(plan, p, quad, delta)
    return Estimate(
        seminorm.value + lp,
        seminorm.error_bar,
        {"seminorm": seminorm.value, "lp_norm": lp, "delta": delta},
    )
