"""
Lacunae and the Lacunary Projector
Classifies Whitney cubes into lacunae and assigns each lacuna a center point of E
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import NetLookupError
from .geometry import DyadicNets, diameter, lex_order
from .whitney import WhitneyCover

logger = logging.getLogger(__name__)

BALL_TOL = 1e-12


@dataclass(frozen=True)
class LacunaConstants:
    """Projector constants, all derived from tau"""

    tau: float = 4.0
    gamma_tilde: float = 180.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def sigma(self) -> float:
        return 33.0 * self.tau

    @property
    def k(self) -> int:
        return math.floor(math.log2(360.0 * self.sigma)) + 2

    @property
    def gamma(self) -> float:
        return 1.0e4 * self.gamma_tilde

    def to_dict(self) -> Dict[str, float]:
        return {"tau": self.tau, "sigma": self.sigma, "k": self.k, "gamma_tilde": self.gamma_tilde, "gamma": self.gamma}


@dataclass(frozen=True)
class Lacuna:
    """
    Equivalence class of Whitney cubes.

    A true lacuna collects all cubes with (10Q)∩E = (90Q)∩E = V; an elementary
    lacuna is a single cube where the two sets differ, with V = (90Q)∩E.
    """

    index: int
    cube_ids: Tuple[int, ...]
    kind: str
    V: Tuple[int, ...]
    q_min: int
    q_max: int
    unbounded: bool = False
    center: Optional[int] = None
    rule: Optional[str] = None

    @property
    def is_true(self) -> bool:
        return self.kind == "true"

    def with_center(self, center: int, rule: str) -> "Lacuna":
        return replace(self, center=int(center), rule=rule)


@dataclass(frozen=True)
class Contact:
    """Two distinct lacunae with touching witness cubes Q in L and Q' in L'"""

    L: int
    L_prime: int
    Q: int
    Q_prime: int


def _balls(tree: cKDTree, centers: np.ndarray, radii: np.ndarray) -> List[Tuple[int, ...]]:
    hits = tree.query_ball_point(centers, r=radii * (1.0 + BALL_TOL), p=np.inf)
    return [tuple(sorted(h)) for h in hits]


def classify_lacunae(cover: WhitneyCover, E=None) -> List[Lacuna]:
    """
    Split the cover into true and elementary lacunae.

    Args:
        cover: Whitney cover built over E
        E: point set (defaults to cover.points)

    Returns:
        Lacunae ordered by their smallest cube index; the true lacuna with
        V = E that reaches the window boundary is flagged unbounded.
    """
    points = cover.points if E is None else np.asarray(E, dtype=float)
    if len(cover) == 0:
        return []
    tree = cKDTree(points)
    near = _balls(tree, cover.centers, 10.0 * cover.half_sides)
    far = _balls(tree, cover.centers, 90.0 * cover.half_sides)

    groups: Dict[Tuple[int, ...], List[int]] = {}
    raw: List[Tuple[int, Tuple[int, ...], str, Tuple[int, ...]]] = []
    for i in range(len(cover)):
        if near[i] == far[i]:
            if near[i] not in groups:
                groups[near[i]] = []
                raw.append((i, (), "true", near[i]))
            groups[near[i]].append(i)
        else:
            raw.append((i, (i,), "elementary", far[i]))

    boundary = cover.boundary_mask()
    everything = tuple(range(len(points)))
    diams = cover.diams
    lacunae: List[Lacuna] = []
    for first, ids, kind, V in sorted(raw):
        members = tuple(groups[V]) if kind == "true" else ids
        sizes = diams[list(members)]
        lacunae.append(
            Lacuna(
                index=len(lacunae),
                cube_ids=members,
                kind=kind,
                V=V,
                q_min=int(members[int(np.argmin(sizes))]),
                q_max=int(members[int(np.argmax(sizes))]),
            )
        )

    touching_boundary = [L for L in lacunae if np.any(boundary[list(L.cube_ids)])]
    unbounded = [L for L in touching_boundary if L.is_true and L.V == everything]
    if unbounded:
        lacunae[unbounded[0].index] = replace(unbounded[0], unbounded=True)
    else:
        logger.warning("no true lacuna with V = E reaches the window boundary; inflate the window")
    if any(L.V != everything for L in touching_boundary):
        logger.warning("window boundary meets lacunae with V != E; treated as bounded")

    logger.info(
        "classified %d lacunae (%d true, %d elementary)",
        len(lacunae),
        sum(L.is_true for L in lacunae),
        sum(not L.is_true for L in lacunae),
    )
    return lacunae


def diameter_pair(points: np.ndarray, V: Sequence[int]) -> Tuple[int, int]:
    """First lexicographic pair of V realizing its uniform diameter"""
    V = np.asarray(V, dtype=int)
    ordered = V[lex_order(points[V])]
    best, pair = -1.0, (int(ordered[0]), int(ordered[0]))
    for a_pos, a in enumerate(ordered):
        gaps = np.max(np.abs(points[ordered[a_pos + 1:]] - points[a]), axis=1) if a_pos + 1 < len(ordered) else []
        for b_pos, gap in enumerate(gaps):
            if gap > best:
                best, pair = float(gap), (int(a), int(ordered[a_pos + 1 + b_pos]))
    return pair


def _scale_below(value: float) -> int:
    """i with 2^i < value <= 2^{i+1}"""
    i = math.ceil(math.log2(value)) - 1
    while 2.0 ** i >= value:
        i -= 1
    while 2.0 ** (i + 1) < value:
        i += 1
    return i


def lacuna_projector(
    L: Lacuna, nets: DyadicNets, consts: LacunaConstants, cover: Optional[WhitneyCover] = None
) -> Tuple[int, str]:
    """
    Center Pr(L) of a lacuna as an index into E, and the rule that picked it.

    Raises:
        NetLookupError: no admissible net point exists (broken nets)
    """
    points = nets.points
    if len(L.V) == 1:
        return L.V[0], "singleton"

    a, b = diameter_pair(points, L.V)
    diam_v = float(np.max(np.abs(points[a] - points[b])))
    i_L = _scale_below(diam_v)

    a_net = nets.nearest(i_L - 2, points[a])
    b_net = nets.nearest(i_L - 2, points[b])
    reach = 2.0 ** (i_L - 1)
    for origin, net_point in ((a, a_net), (b, b_net)):
        if np.max(np.abs(points[origin] - points[net_point])) > reach:
            raise NetLookupError(f"lacuna {L.index}: no net point of level {i_L - 2} within {reach}")

    candidates = [c for c in (a_net, b_net) if not nets.contains(i_L + 2, c)]
    if not candidates:
        raise NetLookupError(f"lacuna {L.index}: both candidates survive to level {i_L + 2}")
    c_L = candidates[0]

    if L.is_true and not L.unbounded and cover is not None:
        diam_q = float(cover.diams[L.q_max])
        if diam_q > consts.sigma * diam_v:
            j_L = math.ceil(math.log2(diam_q / consts.sigma))
            hits = [int(v) for v in L.V if nets.contains(j_L, int(v))]
            if len(hits) != 1:
                logger.warning("lacuna %d: V meets E_%d in %d points; using C_L", L.index, j_L, len(hits))
                return c_L, "C_L"
            d_L = hits[0]
            if not nets.contains(j_L + consts.k, d_L):
                return d_L, "D_L"
    return c_L, "C_L"


def project_lacunae(
    lacunae: Sequence[Lacuna], nets: DyadicNets, consts: LacunaConstants, cover: WhitneyCover
) -> List[Lacuna]:
    """Fill the center of every lacuna"""
    projected = []
    for L in lacunae:
        center, rule = lacuna_projector(L, nets, consts, cover)
        projected.append(L.with_center(center, rule))
    rules = Counter(L.rule for L in projected)
    logger.info("projected %d lacunae: %s", len(projected), dict(sorted(rules.items())))
    return projected


def cube_lacuna_map(lacunae: Sequence[Lacuna], size: int) -> np.ndarray:
    owner = np.full(size, -1, dtype=int)
    for L in lacunae:
        owner[list(L.cube_ids)] = L.index
    return owner


def contacting_pairs(lacunae: Sequence[Lacuna], cover: WhitneyCover) -> List[Contact]:
    """All pairs of distinct lacunae with touching members, first witness pair each"""
    owner = cube_lacuna_map(lacunae, len(cover))
    seen: Dict[Tuple[int, int], Contact] = {}
    for K in range(len(cover)):
        for Q in cover.neighbors[K]:
            a, b = int(owner[K]), int(owner[Q])
            if a == b:
                continue
            key = (min(a, b), max(a, b))
            if key in seen:
                continue
            seen[key] = Contact(a, b, K, int(Q)) if a < b else Contact(b, a, int(Q), K)
    return [seen[key] for key in sorted(seen)]


# ============================================================================
# Invariant checks and measured constants
# ============================================================================

def lacuna_violations(
    lacunae: Sequence[Lacuna], contacts: Sequence[Contact], cover: WhitneyCover, consts: LacunaConstants
) -> Dict[str, List[str]]:
    """Exact predicates that every classified and projected family satisfies"""
    points = cover.points
    found: Dict[str, List[str]] = {
        "partition": [],
        "true_separation": [],
        "elementary_diameter": [],
        "true_contacts_elementary": [],
        "center_in_dilate": [],
        "singleton_center": [],
        "center_separation": [],
    }

    owner = cube_lacuna_map(lacunae, len(cover))
    if np.any(owner < 0) or sum(len(L.cube_ids) for L in lacunae) != len(cover):
        found["partition"].append("cubes are not partitioned by lacunae")

    for L in lacunae:
        V = list(L.V)
        rest = np.setdiff1d(np.arange(len(points)), V)
        diam_v = diameter(points[V])
        if L.is_true and not L.unbounded and len(rest):
            gap = float(np.min(np.max(np.abs(points[V][:, None, :] - points[rest][None, :, :]), axis=2)))
            if 40.0 * cover.diams[L.q_max] > gap * (1.0 + BALL_TOL):
                found["true_separation"].append(f"lacuna {L.index}: 40 diam Q_max > dist(V, E minus V)")
        if not L.is_true and cover.diams[L.cube_ids[0]] > 2.0 * diam_v * (1.0 + BALL_TOL):
            found["elementary_diameter"].append(f"lacuna {L.index}: diam Q > 2 diam V")
        if L.center is None:
            found["center_in_dilate"].append(f"lacuna {L.index}: no center")
            continue
        ids = list(L.cube_ids)
        gaps = np.max(np.abs(cover.centers[ids] - points[L.center]), axis=1)
        bad = np.flatnonzero(gaps > consts.gamma_tilde * cover.half_sides[ids] * (1.0 + BALL_TOL))
        found["center_in_dilate"].extend(f"lacuna {L.index}: center outside {consts.gamma_tilde}Q for cube {ids[j]}" for j in bad)
        if len(V) == 1 and L.center != V[0]:
            found["singleton_center"].append(f"lacuna {L.index}: center {L.center} != {V[0]}")

    for c in contacts:
        if lacunae[c.L].is_true and lacunae[c.L_prime].is_true:
            found["true_contacts_elementary"].append(f"true lacunae {c.L} and {c.L_prime} touch")

    centers = np.asarray([-1 if L.center is None else L.center for L in lacunae])
    for K in range(len(cover)):
        for Q in cover.neighbors[K]:
            a, b = centers[owner[K]], centers[owner[Q]]
            if Q <= K or a < 0 or b < 0 or a == b:
                continue
            sep = float(np.max(np.abs(points[a] - points[b])))
            size = cover.diams[K] + cover.diams[Q]
            if size > consts.gamma_tilde * sep * (1.0 + BALL_TOL):
                found["center_separation"].append(
                    f"cubes {K}, {Q}: diam Q + diam Q' > {consts.gamma_tilde} |Pr(L) - Pr(L')|"
                )

    singleton_owners = Counter(L.V[0] for L in lacunae if len(L.V) == 1)
    for x in range(len(points)):
        if singleton_owners.get(x, 0) != 1:
            found["singleton_center"].append(f"point {x}: {singleton_owners.get(x, 0)} lacunae with V = {{x}}")
    return found


def lacuna_statistics(lacunae: Sequence[Lacuna], contacts: Sequence[Contact], cover: WhitneyCover) -> Dict[str, Any]:
    """Measured constants: fibers, contacts per lacuna, count ratio and gamma_1"""
    points = cover.points
    fibers = Counter(L.center for L in lacunae if L.center is not None)
    contact_count: Counter = Counter()
    for c in contacts:
        contact_count[c.L] += 1
        contact_count[c.L_prime] += 1
    gamma_1 = 0.0
    for L in lacunae:
        diam_v = diameter(points[list(L.V)])
        if diam_v > 0:
            gamma_1 = max(gamma_1, float(cover.diams[L.q_min]) / diam_v)
    return {
        "lacunae": len(lacunae),
        "true": sum(L.is_true for L in lacunae),
        "elementary": sum(not L.is_true for L in lacunae),
        "count_ratio": len(lacunae) / len(points),
        "max_fiber": max(fibers.values(), default=0),
        "max_contacts": max(contact_count.values(), default=0),
        "gamma_1": gamma_1,
        "rules": dict(sorted(Counter(L.rule for L in lacunae if L.rule).items())),
    }


def lacuna_to_dict(L: Lacuna, cover: WhitneyCover) -> Dict[str, Any]:
    return {
        "index": L.index,
        "kind": L.kind,
        "unbounded": L.unbounded,
        "cubes": len(L.cube_ids),
        "V": list(L.V),
        "diam_q_min": float(cover.diams[L.q_min]),
        "diam_q_max": float(cover.diams[L.q_max]),
        "center": L.center,
        "rule": L.rule,
    }
