"""
Sparse Graph on E
Edges between centers of contacting lacunae, certified by disjoint subcubes, and the graph trace seminorms
"""

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.utils import UnionFind

from ..errors import CertificateError, DisconnectedGraphError
from .geometry import Cube
from .jets import JetField, check_exponent
from .lacunae import Contact, Lacuna
from .whitney import WhitneyCover

logger = logging.getLogger(__name__)

CERT_TOL = 1e-12


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    certificate: Cube
    witness: Optional[int] = None


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Graph on the points of E with one certificate cube per edge"""

    points: np.ndarray
    edges: List[Edge] = field(default_factory=list)
    gamma: float = 1.0
    multiplicity: int = 1

    @property
    def vertices(self) -> range:
        return range(len(self.points))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.points), dtype=int)
        for e in self.edges:
            deg[e.u] += 1
            deg[e.v] += 1
        return deg

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(self.vertices)
        for e in self.edges:
            G.add_edge(e.u, e.v, weight=float(np.max(np.abs(self.points[e.u] - self.points[e.v]))))
        return G

    def is_connected(self) -> bool:
        uf = UnionFind(self.vertices)
        for e in self.edges:
            uf.union(e.u, e.v)
        return len({uf[v] for v in self.vertices}) == 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertices": self.points.tolist(),
            "gamma": self.gamma,
            "multiplicity": self.multiplicity,
            "edges": [
                {"u": e.u, "v": e.v, "certificate": e.certificate.to_dict(), "witness": e.witness}
                for e in self.edges
            ],
        }


def _subcell_certificate(cover: WhitneyCover, Q: int, slot: int, M: int) -> Cube:
    """Half of the slot-th subcell when Q is cut into M^n equal subcells"""
    n = cover.dim
    h = float(cover.half_sides[Q])
    cell = np.asarray(np.unravel_index(slot, (M,) * n))
    lower = cover.centers[Q] - h
    center = lower + (2 * cell + 1) * (h / M)
    return Cube(tuple(center), h / (2.0 * M))


def build_graph(
    E, lacunae: Sequence[Lacuna], cover: WhitneyCover, contacts: Sequence[Contact], gamma: float
) -> SparseGraph:
    """
    Graph with an edge between the centers of every pair of contacting lacunae.

    The edge (A, A') is witnessed by the contacting cube Q of the lacuna whose
    center is A. Q is cut into M^n subcells, M the largest number of edges on
    one witness, and the i-th edge of Q is certified by half of subcell i.

    Raises:
        CertificateError: the certificates fail the gamma-sparsity checks
    """
    points = np.asarray(E, dtype=float)
    chosen: Dict[Tuple[int, int], Tuple[int, int, int]] = {}
    for c in contacts:
        a, b = lacunae[c.L].center, lacunae[c.L_prime].center
        if a is None or b is None:
            raise CertificateError("lacunae must be projected before building the graph")
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key not in chosen:
            chosen[key] = (a, b, c.Q)

    per_witness: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for key, (_, _, Q) in chosen.items():
        per_witness[Q].append(key)
    M = max((len(v) for v in per_witness.values()), default=1)

    edges: List[Edge] = []
    for Q in sorted(per_witness):
        for slot, (u, v) in enumerate(per_witness[Q]):
            edges.append(Edge(u, v, _subcell_certificate(cover, Q, slot, M), Q))
    edges.sort(key=lambda e: (e.u, e.v))

    graph = SparseGraph(points, edges, gamma, M)
    report = verify_sparse(graph)
    if report["violations"]:
        raise CertificateError(f"certificate construction failed: {report['violations'][:3]}")
    logger.info("graph on %d points: %d edges, subcell multiplicity %d", len(points), len(edges), M)
    return graph


def verify_sparse(g: SparseGraph) -> Dict[str, Any]:
    """
    Check the three certificate conditions of every edge.

    Returns:
        Report dict with the list of violations (empty for a gamma-sparse graph)
    """
    violations: List[str] = []
    seen = set()
    for idx, e in enumerate(g.edges):
        key = (min(e.u, e.v), max(e.u, e.v))
        if e.u == e.v:
            violations.append(f"edge {idx}: loop at {e.u}")
        if key in seen:
            violations.append(f"edge {idx}: duplicate of {key}")
        seen.add(key)
        K = e.certificate
        c = np.asarray(K.center)
        reach = g.gamma * K.half_side * (1.0 + CERT_TOL)
        for end in (e.u, e.v):
            if np.max(np.abs(g.points[end] - c)) > reach:
                violations.append(f"edge {idx}: vertex {end} outside gamma*K")
        length = float(np.max(np.abs(g.points[e.u] - g.points[e.v])))
        if K.diam > g.gamma * length * (1.0 + CERT_TOL):
            violations.append(f"edge {idx}: diam K > gamma |u - v|")

    if len(g.edges) > 1:
        centers = np.asarray([e.certificate.center for e in g.edges])
        halves = np.asarray([e.certificate.half_side for e in g.edges])
        gaps = np.max(np.abs(centers[:, None, :] - centers[None, :, :]), axis=2)
        overlap = gaps < (halves[:, None] + halves[None, :]) * (1.0 - CERT_TOL)
        np.fill_diagonal(overlap, False)
        for i, j in zip(*np.nonzero(np.triu(overlap))):
            violations.append(f"edges {i}, {j}: certificate interiors overlap")

    return {"edges": len(g.edges), "gamma": g.gamma, "violations": violations}


# ============================================================================
# Seminorms on pairs and graphs
# ============================================================================

def pair_term(field: JetField, x: int, y: int, p: float) -> float:
    """
    Contribution of the ordered pair (x, y), differences evaluated at x.

    Finite p: sum_alpha |D^a(P_x - P_y)(x)|^p / |x-y|^{(m-|a|)p - n};
    p = inf: sum_alpha |D^a(P_x - P_y)(x)| / |x-y|^{m-|a|}.
    """
    n, m = field.dim, field.m
    at = field.points[x]
    dist = float(np.max(np.abs(at - field.points[y])))
    other = field.poly(y)
    total = 0.0
    for pos, alpha in enumerate(field.alphas):
        diff = abs(field.coeffs[x, pos] - other.derivative(alpha, at))
        order = sum(alpha)
        if math.isinf(p):
            total += diff / dist ** (m - order)
        else:
            total += diff ** p / dist ** ((m - order) * p - n)
    return total


def graph_seminorm(field: JetField, g: SparseGraph, p: Optional[float] = None) -> float:
    """
    Graph trace seminorm over the edges of g.

    Each edge counts once, evaluated at its lower-index endpoint.

    Raises:
        ExponentError: p <= n
    """
    p = check_exponent(field.p if p is None else p, field.dim)
    terms = [pair_term(field, min(e.u, e.v), max(e.u, e.v), p) for e in g.edges]
    if not terms:
        return 0.0
    if math.isinf(p):
        return float(max(terms))
    return float(sum(terms) ** (1.0 / p))


def graph_geodesic(g: SparseGraph, x: int, y: int) -> Tuple[List[int], float]:
    """
    Shortest path from x to y with edge lengths |u - v|.

    Raises:
        DisconnectedGraphError: no path joins x and y
    """
    if x == y:
        return [x], 0.0
    G = g.to_networkx()
    try:
        length, path = nx.single_source_dijkstra(G, x, target=y, weight="weight")
    except nx.NetworkXNoPath as e:
        raise DisconnectedGraphError(f"no path between {x} and {y}") from e
    return [int(v) for v in path], float(length)


def geodesic_stretch(g: SparseGraph, pairs: Optional[Sequence[Tuple[int, int]]] = None) -> float:
    """Largest ratio of geodesic length to uniform distance over the pairs"""
    G = g.to_networkx()
    pairs = list(itertools.combinations(g.vertices, 2)) if pairs is None else pairs
    worst = 1.0
    lengths: Dict[int, Dict[int, float]] = {}
    for x, y in pairs:
        if x not in lengths:
            lengths[x] = nx.single_source_dijkstra_path_length(G, x, weight="weight")
        if y not in lengths[x]:
            raise DisconnectedGraphError(f"no path between {x} and {y}")
        worst = max(worst, lengths[x][y] / float(np.max(np.abs(g.points[x] - g.points[y]))))
    return worst


def to_dot(g: SparseGraph) -> str:
    """Graphviz DOT text with vertex positions"""
    lines = ["graph Gamma_E {"]
    for v in g.vertices:
        coords = g.points[v].tolist()
        pos = ",".join(f"{c:.6g}" for c in (coords + [0.0])[:2])
        lines.append(f'  {v} [label="{v}", pos="{pos}!"];')
    for e in g.edges:
        lines.append(f"  {e.u} -- {e.v} [witness={e.witness}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_statistics(g: SparseGraph) -> Dict[str, Any]:
    deg = g.degrees()
    connected = g.is_connected()
    return {
        "vertices": len(g.points),
        "edges": len(g.edges),
        "connected": connected,
        "max_degree": int(deg.max()) if len(deg) else 0,
        "geodesic_stretch": geodesic_stretch(g) if connected and len(g.points) > 1 else 1.0,
        "multiplicity": g.multiplicity,
    }

