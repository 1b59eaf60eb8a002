"""
Metric Transforms
Cube-average pre-metric rho_q(h), profiles v_x and omega_x, sampled geodesics d_q(h) and McShane-type extensions
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from ..errors import ConfigError, DisconnectedGraphError, EmptySetError, ExponentError, FieldSchemaError, GeometryError
from .geometry import REL_TOL, Cube, as_points
from .whitney import root_window

logger = logging.getLogger(__name__)

MCSHANE_FACTOR = 48.0
METRIC_FACTOR = 16.0
PAIR_CHUNK = 2048


# ============================================================================
# Piecewise-constant densities
# ============================================================================

@dataclass(frozen=True, eq=False)
class DensityField:
    """
    Nonnegative h, constant on the cells of a uniform grid over a box, zero outside.

    Integrals of h^q over boxes are read off a cumulative corner table, which
    is multilinear inside every cell and therefore exact under linear interpolation.
    """

    box: Cube
    values: np.ndarray
    q: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != self.box.dim or len(set(values.shape)) != 1:
            raise GeometryError(f"density values must form a cubic grid of dimension {self.box.dim}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise GeometryError("density values must be finite and nonnegative")
        if self.q < self.box.dim:
            raise ExponentError(f"averaging exponent q must be >= n = {self.box.dim}, got {self.q}")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, box: Cube, resolution: int, value: float, q: float) -> "DensityField":
        return cls(box, np.full((resolution,) * box.dim, float(value)), q)

    @classmethod
    def from_function(cls, box: Cube, resolution: int, fn: Callable[[np.ndarray], np.ndarray], q: float) -> "DensityField":
        """Sample fn at cell centers"""
        probe = cls.constant(box, resolution, 0.0, q)
        values = np.asarray(fn(probe.cell_centers()), dtype=float).reshape((resolution,) * box.dim)
        return cls(box, values, q)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def cell(self) -> float:
        return self.box.diam / self.resolution

    def cell_centers(self) -> np.ndarray:
        axes = [lo + self.cell * (np.arange(self.resolution) + 0.5) for lo in self.box.lower]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def corners(self) -> np.ndarray:
        """Grid nodes, (N+1)^n of them"""
        axes = [lo + self.cell * np.arange(self.resolution + 1) for lo in self.box.lower]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    @cached_property
    def _cumulative(self) -> RegularGridInterpolator:
        table = self.values ** self.q * self.cell ** self.dim
        for axis in range(self.dim):
            table = np.cumsum(table, axis=axis)
        table = np.pad(table, [(1, 0)] * self.dim)
        axes = tuple(lo + self.cell * np.arange(self.resolution + 1) for lo in self.box.lower)
        return RegularGridInterpolator(axes, table, method="linear", bounds_error=False, fill_value=None)

    def integral(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """Integral of h^q over boxes [lower, upper]; arrays of shape (..., n)"""
        lo, hi = self.box.lower, self.box.upper
        a = np.clip(lower, lo, hi)
        b = np.clip(upper, lo, hi)
        total = np.zeros(a.shape[:-1])
        for signs in itertools.product((0, 1), repeat=self.dim):
            pick = np.asarray(signs, dtype=bool)
            corner = np.where(pick, b, a)
            weight = (-1.0) ** (self.dim - int(pick.sum()))
            total += weight * self._cumulative(corner.reshape(-1, self.dim)).reshape(total.shape)
        return np.maximum(total, 0.0)

    def mean_power(self, lower: np.ndarray, side: np.ndarray) -> np.ndarray:
        """(avg_Q h^q)^{1/q} for the cubes [lower, lower + side]"""
        side = np.asarray(side, dtype=float)
        upper = lower + side[..., None]
        avg = self.integral(lower, upper) / side ** self.dim
        return avg ** (1.0 / self.q)

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        gaps = np.max(np.abs(X - np.asarray(self.box.center)), axis=1)
        return gaps <= self.box.half_side * (1.0 + REL_TOL)

    def require_inside(self, X) -> None:
        if not np.all(self.contains(X)):
            raise GeometryError("point outside the density box")

    def refined(self) -> "DensityField":
        """Same function on a grid with twice the resolution"""
        values = self.values
        for axis in range(self.dim):
            values = np.repeat(values, 2, axis=axis)
        return DensityField(self.box, values, self.q)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "box": self.box.to_dict(),
            "resolution": self.resolution,
            "q": self.q,
            "values": self.values.reshape(-1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DensityField":
        try:
            box = Cube(tuple(data["box"]["center"]), float(data["box"]["half_side"]))
            resolution = int(data["resolution"])
            values = np.asarray(data["values"], dtype=float).reshape((resolution,) * box.dim)
            return cls(box, values, float(data["q"]))
        except (KeyError, TypeError, ValueError) as e:
            raise FieldSchemaError(f"bad density JSON: {e}") from e


def load_density(path: Union[str, Path]) -> DensityField:
    try:
        return DensityField.from_dict(orjson.loads(Path(path).read_bytes()))
    except (OSError, orjson.JSONDecodeError) as e:
        raise FieldSchemaError(f"cannot read density file {path}: {e}") from e


def dump_density(h: DensityField, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(h.to_dict(), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
    return path


# ============================================================================
# Pre-metric rho_q
# ============================================================================

def _reach(h: DensityField, X: np.ndarray) -> np.ndarray:
    """Smallest s with Q(x, s) containing the whole box"""
    return np.max(np.maximum(np.abs(X - h.box.lower), np.abs(X - h.box.upper)), axis=1)


def _ladder_length(t: np.ndarray, reach: np.ndarray, substeps: int) -> np.ndarray:
    ratio = np.where(t > 0, reach / np.where(t > 0, t, 1.0), 1.0)
    return np.ceil(substeps * np.log2(np.maximum(ratio, 1.0)) - 1e-9).astype(int)


def _pair_sup(h: DensityField, X: np.ndarray, Y: np.ndarray, t: np.ndarray, substeps: int) -> np.ndarray:
    """sup of (avg h^q)^{1/q} over the enumerated cube family of each pair"""
    P, n = X.shape
    reach = np.maximum(_reach(h, X), _reach(h, Y))
    J = int(np.max(_ladder_length(t, reach, substeps), initial=0))
    s = t[:, None] * 2.0 ** (np.arange(J + 1) / substeps)[None, :]
    best = np.zeros(P)

    # Q(x, s) and Q(y, s)
    for Z in (X, Y):
        lower = Z[:, None, :] - s[:, :, None]
        best = np.maximum(best, h.mean_power(lower, 2.0 * s).max(axis=1))

    # corner-anchored cubes of side s spanning {x, y}
    lo, hi = np.minimum(X, Y), np.maximum(X, Y)
    for signs in itertools.product((0, 1), repeat=n):
        pick = np.asarray(signs, dtype=bool)
        lower = np.where(pick[None, None, :], hi[:, None, :] - s[:, :, None], lo[:, None, :])
        best = np.maximum(best, h.mean_power(lower, s).max(axis=1))

    # dyadic cubes of the box containing both points
    levels = int(math.log2(h.resolution)) + 1 if h.resolution > 1 else 1
    origin = h.box.lower
    for level in range(levels + 1):
        side = h.box.diam / 2.0 ** level
        ix = np.floor((X - origin) / side)
        iy = np.floor((Y - origin) / side)
        count = 2 ** level
        ix, iy = np.clip(ix, 0, count - 1), np.clip(iy, 0, count - 1)
        same = np.all(ix == iy, axis=1)
        if np.any(same):
            lower = origin + ix[same] * side
            best[same] = np.maximum(best[same], h.mean_power(lower, np.full(int(same.sum()), side)))
    return best


def rho_many(h: DensityField, X, Y, substeps: int = 4) -> np.ndarray:
    """
    rho_q(x_i, y_i : h) for paired rows of X and Y.

    A certified lower bound of the supremum over all cubes: the family holds
    Q(x, s), Q(y, s), the corner-anchored cubes of side s spanning both
    points (s on the ladder ||x - y|| 2^{j/K}) and the dyadic cubes of the box.

    Raises:
        GeometryError: a point lies outside the box of h
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    h.require_inside(X)
    h.require_inside(Y)
    t = np.max(np.abs(X - Y), axis=1)
    out = np.zeros(len(X))
    order = np.argsort(t)
    for start in range(0, len(order), PAIR_CHUNK):
        idx = order[start:start + PAIR_CHUNK]
        moving = idx[t[idx] > 0]
        if len(moving):
            out[moving] = t[moving] * _pair_sup(h, X[moving], Y[moving], t[moving], substeps)
    return out


def rho_q(x, y, h: DensityField, substeps: int = 4) -> float:
    return float(rho_many(h, np.asarray(x, dtype=float)[None, :], np.asarray(y, dtype=float)[None, :], substeps)[0])


def v_at(x, t: float, h: DensityField, substeps: int = 4) -> float:
    """v_x(t) = t sup_{s >= t} (avg_{Q(x,s)} h^q)^{1/q} on the ladder s = t 2^{j/K}"""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    h.require_inside(x)
    if t <= 0:
        return 0.0
    reach = _reach(h, x)
    J = int(_ladder_length(np.asarray([t]), reach, substeps)[0])
    s = t * 2.0 ** (np.arange(J + 1) / substeps)
    lower = x - s[:, None]
    return float(t * np.max(h.mean_power(lower, 2.0 * s)))


@dataclass(frozen=True)
class Profile:
    """Sampled v_x and its least concave majorant omega_x"""

    t: np.ndarray
    v: np.ndarray
    omega: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.t.tolist(), "v": self.v.tolist(), "omega": self.omega.tolist()}


def concave_majorant(t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Least concave majorant through the origin, evaluated at t (t ascending, positive)"""
    xs = np.concatenate([[0.0], t])
    ys = np.concatenate([[0.0], v])
    hull: List[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(t, xs[hull], ys[hull])


def v_and_omega(x, h: DensityField, substeps: int = 4, t_min: Optional[float] = None) -> Profile:
    """
    v_x and omega_x on the ladder t_j = t_min 2^{j/K} up to the box reach.

    Args:
        x: point inside the box of h
        h: density
        substeps: ladder points per doubling
        t_min: smallest sampled t (default: a quarter cell)
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    h.require_inside(x)
    reach = float(_reach(h, x)[0])
    t_min = h.cell / 4.0 if t_min is None else t_min
    J = int(_ladder_length(np.asarray([t_min]), np.asarray([reach]), substeps)[0])
    t = t_min * 2.0 ** (np.arange(J + 1) / substeps)
    means = h.mean_power(x - t[:, None], 2.0 * t)
    tail = np.maximum.accumulate(means[::-1])[::-1]
    v = t * tail
    return Profile(t=t, v=v, omega=concave_majorant(t, v))


def profile_violations(profile: Profile, tol: float = 1e-9) -> List[str]:
    """Monotonicity of v and v/t, and v <= omega <= 2 v"""
    violations = []
    scale = tol * max(1.0, float(np.max(profile.omega, initial=0.0)))
    if np.any(np.diff(profile.v) < -scale):
        violations.append("v_x decreases")
    slope = profile.v / profile.t
    if np.any(np.diff(slope) > tol * max(1.0, float(np.max(slope, initial=0.0)))):
        violations.append("v_x(t)/t increases")
    if np.any(profile.omega < profile.v - scale):
        violations.append("omega_x below v_x")
    if np.any(profile.omega > 2.0 * profile.v + scale):
        violations.append("omega_x above 2 v_x")
    return violations


# ============================================================================
# Sampled geodesic metric
# ============================================================================

@dataclass(frozen=True, eq=False)
class MetricSample:
    """
    Grid nodes plus extra sites, joined when within radius, weighted by rho_q.

    d_hat is the shortest-path distance of this graph; every query also keeps
    the direct hop, so d_hat <= rho_hat holds pair by pair.
    """

    density: DensityField
    sites: np.ndarray
    radius: float
    substeps: int
    graph: csr_matrix = field(repr=False)
    tree: cKDTree = field(repr=False)
    _rows: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls, h: DensityField, extra=None, radius_cells: float = 4.0, substeps: int = 4
    ) -> "MetricSample":
        sites = h.corners()
        if extra is not None and len(extra):
            extra = np.atleast_2d(np.asarray(extra, dtype=float))
            h.require_inside(extra)
            sites = np.unique(np.vstack([sites, extra]), axis=0)
        radius = radius_cells * h.cell
        tree = cKDTree(sites)
        pairs = tree.query_pairs(r=radius * (1.0 + REL_TOL), p=np.inf, output_type="ndarray")
        weights = rho_many(h, sites[pairs[:, 0]], sites[pairs[:, 1]], substeps)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        # explicit zeros stay edges for csgraph on sparse input
        graph = csr_matrix((np.concatenate([weights, weights]), (rows, cols)), shape=(len(sites), len(sites)))
        logger.info("metric sample: %d sites, %d edges", len(sites), len(pairs))
        return cls(h, sites, radius, substeps, graph, tree)

    def site_index(self, points) -> np.ndarray:
        """Indices of points that are sites"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        gaps, idx = self.tree.query(points, k=1, p=np.inf)
        if np.any(gaps > 0):
            raise GeometryError("query point is not a site of the metric sample")
        return idx.astype(int)

    def from_sites(self, idx: Sequence[int]) -> np.ndarray:
        """Graph distances from each listed site to every site, shape (len(idx), S)"""
        missing = [int(i) for i in idx if int(i) not in self._rows]
        if missing:
            dist = dijkstra(self.graph, directed=False, indices=missing)
            for i, row in zip(missing, np.atleast_2d(dist)):
                self._rows[i] = row
        return np.vstack([self._rows[int(i)] for i in idx])

    def distances_from(self, x, targets: Sequence[int]) -> np.ndarray:
        """
        d_hat(x, site) for every target site index.

        x need not be a site: it is linked to the sites within radius and to
        each target directly.

        Raises:
            DisconnectedGraphError: some target is unreachable
        """
        x = np.asarray(x, dtype=float).reshape(1, -1)
        self.density.require_inside(x)
        targets = np.asarray(targets, dtype=int)
        near = np.asarray(self.tree.query_ball_point(x[0], r=self.radius * (1.0 + REL_TOL), p=np.inf), dtype=int)
        direct = rho_many(self.density, np.repeat(x, len(targets), axis=0), self.sites[targets], self.substeps)
        if len(near) == 0:
            best = direct
        else:
            hop = rho_many(self.density, np.repeat(x, len(near), axis=0), self.sites[near], self.substeps)
            rows = self.from_sites(targets)
            best = np.minimum(direct, np.min(hop[None, :] + rows[:, near], axis=1))
        if not np.all(np.isfinite(best)):
            raise DisconnectedGraphError("metric sample graph is disconnected; raise the sample radius")
        return best

    def pair_distance(self, i: int, j: int) -> float:
        d = float(self.from_sites([i])[0, j])
        if not math.isfinite(d):
            raise DisconnectedGraphError(f"sites {i} and {j} are not connected")
        return d


def geodesic_dq(x, y, h: DensityField, sample_radius: float = 4.0, substeps: int = 4) -> float:
    """
    d_hat_q(x, y : h) on a sample graph holding both points.

    Args:
        sample_radius: edge radius in grid cells
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        return 0.0
    sample = MetricSample.build(h, np.vstack([x, y]), sample_radius, substeps)
    i, j = sample.site_index(np.vstack([x, y]))
    return min(sample.pair_distance(int(i), int(j)), rho_q(x, y, h, substeps))


def refinement_report(x, y, h: DensityField, substeps: int = 4) -> Dict[str, float]:
    """rho_hat under a doubled ladder and a doubled grid; both can only grow"""
    base = rho_q(x, y, h, substeps)
    enriched = rho_q(x, y, h, 2 * substeps)
    refined = rho_q(x, y, h.refined(), 2 * substeps)
    return {
        "rho": base,
        "rho_enriched": enriched,
        "rho_refined": refined,
        "ratio": refined / base if base > 0 else 1.0,
    }


def check_metric_factor(sample: MetricSample, pairs: np.ndarray, slack: float = 0.05) -> Dict[str, Any]:
    """rho_hat <= 16 (1 + slack) d_hat over pairs of site indices"""
    worst = 0.0
    violations = []
    for i, j in pairs:
        rho = rho_q(sample.sites[i], sample.sites[j], sample.density, sample.substeps)
        d = min(rho, sample.pair_distance(int(i), int(j)))
        if d > 0:
            worst = max(worst, rho / d)
        if rho > METRIC_FACTOR * (1.0 + slack) * d * (1.0 + REL_TOL):
            violations.append(f"pair ({i}, {j}): rho {rho:.6g} > 16 d {d:.6g}")
    return {"pairs": len(pairs), "max_ratio": worst, "violations": violations}


def check_chains(h: DensityField, chains: Sequence[np.ndarray], substeps: int = 4, slack: float = 0.05) -> Dict[str, Any]:
    """rho(x_0, x_M) <= 16 sum rho(x_i, x_{i+1}) for every chain"""
    worst = 0.0
    violations = []
    for k, chain in enumerate(chains):
        chain = np.asarray(chain, dtype=float)
        hops = float(np.sum(rho_many(h, chain[:-1], chain[1:], substeps)))
        ends = rho_q(chain[0], chain[-1], h, substeps)
        if hops > 0:
            worst = max(worst, ends / hops)
        if ends > METRIC_FACTOR * (1.0 + slack) * hops * (1.0 + REL_TOL):
            violations.append(f"chain {k}: ends {ends:.6g} > 16 * hops {hops:.6g}")
    return {"chains": len(chains), "max_ratio": worst, "violations": violations}


def check_vmt(sample: MetricSample, triples: np.ndarray, slack: float = 0.05) -> Dict[str, Any]:
    """
    Comparison inequalities of a metric in the transform class, on site triples.

    For ||y - z|| <= lam ||x - z|| with lam >= 1: d(y, z) <= 32 lam d(x, z).
    For z on the segment (x, y) (checked when z is a site there):
    d(x, z) + d(y, z) <= 64 d(x, y).
    """
    violations = []
    worst_b = worst_c = 0.0
    pts = sample.sites
    for x, y, z in triples:
        d = sample.from_sites([x, y, z])
        dxz, dyz, dxy = d[0, z], d[1, z], d[0, y]
        lam = max(1.0, float(np.max(np.abs(pts[y] - pts[z])) / max(np.max(np.abs(pts[x] - pts[z])), 1e-300)))
        if dxz > 0:
            worst_b = max(worst_b, dyz / (lam * dxz))
        if dyz > 32.0 * lam * dxz * (1.0 + slack) + REL_TOL:
            violations.append(f"triple ({x}, {y}, {z}): d(y,z) > 32 lam d(x,z)")
        if _on_segment(pts[x], pts[y], pts[z]):
            if dxy > 0:
                worst_c = max(worst_c, (dxz + dyz) / dxy)
            if dxz + dyz > 64.0 * dxy * (1.0 + slack) + REL_TOL:
                violations.append(f"triple ({x}, {y}, {z}): d(x,z) + d(y,z) > 64 d(x,y)")
    return {"triples": len(triples), "max_ratio_b": worst_b, "max_ratio_c": worst_c, "violations": violations}


def _on_segment(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> bool:
    span = y - x
    length = float(np.dot(span, span))
    if length == 0:
        return False
    s = float(np.dot(z - x, span)) / length
    return 0 < s < 1 and np.allclose(x + s * span, z, rtol=0, atol=1e-12 * math.sqrt(length))


# ============================================================================
# Extensions
# ============================================================================

def mcshane_extend(f, E, d: Callable[[np.ndarray, np.ndarray], np.ndarray], x) -> float:
    """
    F(x) = min_y f(y) + d(x, y).

    Args:
        f: values on E
        E: point set
        d: d(x, Y) returning distances from x to every row of Y
        x: evaluation point
    """
    points = as_points(E, allow_empty=True)
    if len(points) == 0:
        raise EmptySetError("McShane extension needs a nonempty E")
    f = np.asarray(f, dtype=float).reshape(-1)
    return float(np.min(f + np.asarray(d(np.asarray(x, dtype=float), points), dtype=float)))


def scaled_uniform_metric(scale: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """d(x, y) = scale ||x - y|| in the uniform norm"""
    return lambda x, Y: scale * np.max(np.abs(np.atleast_2d(Y) - x), axis=1)


def sampled_lipschitz(X: np.ndarray, F: np.ndarray) -> float:
    """Largest |F(x) - F(y)| / ||x - y|| over distinct rows of X, uniform norm"""
    gaps = pdist(X, "chebyshev")
    jumps = pdist(np.asarray(F, dtype=float).reshape(-1, 1), "cityblock")
    keep = gaps > 0
    return float(np.max(jumps[keep] / gaps[keep], initial=0.0))


def lipschitz_constant(E, f, norm: float = np.inf) -> float:
    points = as_points(E)
    f = np.asarray(f, dtype=float).reshape(-1)
    worst = 0.0
    for i, j in itertools.combinations(range(len(points)), 2):
        gap = float(np.linalg.norm(points[i] - points[j], ord=norm))
        worst = max(worst, abs(f[i] - f[j]) / gap)
    return worst


def sharp_envelope(E, f, h: DensityField) -> np.ndarray:
    """
    Per-cell upper bound of f#(x) = sup_{y != z} |f(y) - f(z)| / (||x-y|| + ||x-z||).

    On a cell C both ||x-y|| + ||x-z|| >= dist(C,y) + dist(C,z) and >= ||y-z||.
    """
    points = as_points(E)
    f = np.asarray(f, dtype=float).reshape(-1)
    centers = h.cell_centers()
    half = h.cell / 2.0
    gaps = np.maximum(np.max(np.abs(centers[:, None, :] - points[None, :, :]), axis=2) - half, 0.0)
    out = np.zeros(len(centers))
    for i, j in itertools.combinations(range(len(points)), 2):
        jump = abs(f[i] - f[j])
        if jump == 0:
            continue
        span = float(np.max(np.abs(points[i] - points[j])))
        out = np.maximum(out, jump / np.maximum(gaps[:, i] + gaps[:, j], span))
    return out.reshape((h.resolution,) * h.dim)


class L1pExtension:
    """
    Extension of f in L^1_p: F(x) = min_y f(y) + 48 d_hat_q(x, y : f#).

    The sample graph is built once; distances from every point of E are
    computed by one multi-source Dijkstra sweep.
    """

    def __init__(self, E, f, p: float, resolution: int = 32, radius_cells: float = 4.0, substeps: int = 4, inflate: float = 4.0):
        points = as_points(E)
        n = points.shape[1]
        if math.isinf(p) or not p > n:
            raise ExponentError(f"L^1_p extension needs n < p < inf, got p = {p} with n = {n}")
        if resolution < 1:
            raise ConfigError(f"resolution must be positive, got {resolution}")
        self.points = points
        self.f = np.asarray(f, dtype=float).reshape(-1)
        if len(self.f) != len(points):
            raise FieldSchemaError("need one value per point of E")
        self.p = float(p)
        self.q = (n + p) / 2.0
        box = root_window(points, inflate)
        probe = DensityField.constant(box, resolution, 0.0, self.q)
        self.density = DensityField(box, sharp_envelope(points, self.f, probe), self.q)
        self.sample = MetricSample.build(self.density, points, radius_cells, substeps)
        self.site_ids = self.sample.site_index(points)
        self.sample.from_sites(self.site_ids)

    def distances(self, x) -> np.ndarray:
        return self.sample.distances_from(x, self.site_ids)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray([np.min(self.f + MCSHANE_FACTOR * self.distances(x)) for x in X])

    def grid(self, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
        """Grid over the box and F on it"""
        box = self.density.box
        axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(box.lower, box.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.column_stack([m.reshape(-1) for m in mesh])
        return X, self(X)


def l1p_extend(
    f, E, p: float, resolution: int = 32, radius_cells: float = 4.0, substeps: int = 4, inflate: float = 4.0
) -> L1pExtension:
    """Evaluator of the L^1_p extension of f over the inflated bounding cube of E"""
    return L1pExtension(E, f, p, resolution, radius_cells, substeps, inflate)
