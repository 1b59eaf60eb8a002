"""
Jet Algebra
Multi-index polynomials of degree <= m-1, Taylor shifts and Whitney fields on E
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import orjson

from ..errors import DimensionMismatchError, ExponentError, FieldSchemaError, GeometryError
from .geometry import MAX_DIM, as_points, min_separation

MultiIndex = Tuple[int, ...]

MAX_ORDER = 4


# ============================================================================
# Multi-indices
# ============================================================================

@lru_cache(maxsize=None)
def multi_indices(dim: int, max_order: int) -> Tuple[MultiIndex, ...]:
    """All alpha with |alpha| <= max_order, by order then reverse lexicographic"""
    if max_order < 0:
        return ()
    found = [
        alpha
        for alpha in itertools.product(range(max_order + 1), repeat=dim)
        if sum(alpha) <= max_order
    ]
    return tuple(sorted(found, key=lambda a: (sum(a), tuple(-c for c in a))))


@lru_cache(maxsize=None)
def exact_order(dim: int, order: int) -> Tuple[MultiIndex, ...]:
    return tuple(a for a in multi_indices(dim, order) if sum(a) == order)


@lru_cache(maxsize=None)
def index_position(dim: int, max_order: int) -> Dict[MultiIndex, int]:
    return {alpha: i for i, alpha in enumerate(multi_indices(dim, max_order))}


def below(alpha: MultiIndex) -> Tuple[MultiIndex, ...]:
    """All beta <= alpha componentwise"""
    return tuple(itertools.product(*(range(a + 1) for a in alpha)))


def binom_mi(alpha: MultiIndex, beta: MultiIndex) -> int:
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


def factorial_mi(alpha: MultiIndex) -> int:
    return math.prod(math.factorial(a) for a in alpha)


def parse_multi_index(text: str, dim: int) -> MultiIndex:
    try:
        alpha = tuple(int(part) for part in text.split(","))
    except ValueError as e:
        raise FieldSchemaError(f"bad multi-index '{text}'") from e
    if len(alpha) != dim or any(a < 0 for a in alpha):
        raise FieldSchemaError(f"multi-index '{text}' does not fit dimension {dim}")
    return alpha


def format_multi_index(alpha: MultiIndex) -> str:
    return ",".join(str(a) for a in alpha)


@lru_cache(maxsize=None)
def _shift_table(dim: int, m: int, alpha: MultiIndex):
    """Terms of D^alpha sum_beta c_beta (x-b)^beta / beta! as (positions, exponents, 1/(beta-alpha)!)"""
    positions, exponents, weights = [], [], []
    for pos, beta in enumerate(multi_indices(dim, m - 1)):
        if all(b >= a for a, b in zip(alpha, beta)):
            gap = tuple(b - a for a, b in zip(alpha, beta))
            positions.append(pos)
            exponents.append(gap)
            weights.append(1.0 / factorial_mi(gap))
    return (
        np.asarray(positions, dtype=int),
        np.asarray(exponents, dtype=float).reshape(-1, dim),
        np.asarray(weights, dtype=float),
    )


def shifted_monomials(dim: int, m: int, alpha: MultiIndex, D: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Monomial table (N, T) for offsets D = x - base and the coefficient positions it pairs with"""
    positions, exponents, weights = _shift_table(dim, m, alpha)
    if len(positions) == 0:
        return positions, np.zeros((len(D), 0))
    table = np.prod(D[:, None, :] ** exponents[None, :, :], axis=2) * weights
    return positions, table


# ============================================================================
# Polynomials
# ============================================================================

@dataclass(frozen=True, eq=False)
class Poly:
    """
    Polynomial of degree <= m-1 in the scaled Taylor basis.

    P(x) = sum_alpha coeffs[alpha] (x - basepoint)^alpha / alpha!, so
    coeffs[alpha] = D^alpha P(basepoint). The coefficient vector is aligned
    with multi_indices(dim, m - 1).
    """

    basepoint: Tuple[float, ...]
    coeffs: np.ndarray = field(repr=False)
    m: int

    def __post_init__(self):
        object.__setattr__(self, "basepoint", tuple(float(c) for c in self.basepoint))
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        expected = len(multi_indices(self.dim, self.m - 1))
        if len(coeffs) != expected:
            raise GeometryError(f"expected {expected} coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return len(self.basepoint)

    @classmethod
    def from_dict(cls, basepoint: Sequence[float], coeffs: Mapping[MultiIndex, float], m: Optional[int] = None) -> "Poly":
        dim = len(basepoint)
        degree = max((sum(a) for a, c in coeffs.items() if c != 0), default=0)
        m = degree + 1 if m is None else m
        if degree > m - 1:
            raise GeometryError(f"degree {degree} exceeds m-1 = {m - 1}")
        positions = index_position(dim, m - 1)
        vector = np.zeros(len(positions))
        for alpha, value in coeffs.items():
            if len(alpha) != dim:
                raise DimensionMismatchError(f"multi-index {alpha} does not fit dimension {dim}")
            if sum(alpha) <= m - 1:
                vector[positions[tuple(alpha)]] = value
        return cls(tuple(basepoint), vector, m)

    def as_dict(self) -> Dict[MultiIndex, float]:
        return dict(zip(multi_indices(self.dim, self.m - 1), self.coeffs.tolist()))

    @property
    def degree(self) -> int:
        nonzero = [sum(a) for a, c in zip(multi_indices(self.dim, self.m - 1), self.coeffs) if c != 0]
        return max(nonzero, default=0)

    def derivative_many(self, alpha: MultiIndex, X: np.ndarray) -> np.ndarray:
        """D^alpha P at each row of X; zero when |alpha| >= m"""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim or len(alpha) != self.dim:
            raise DimensionMismatchError(f"expected dimension {self.dim}")
        if sum(alpha) > self.m - 1:
            return np.zeros(len(X))
        positions, table = shifted_monomials(self.dim, self.m, tuple(alpha), X - np.asarray(self.basepoint))
        return table @ self.coeffs[positions]

    def derivative(self, alpha: MultiIndex, x) -> float:
        return float(self.derivative_many(alpha, np.asarray(x, dtype=float).reshape(1, -1))[0])

    def __call__(self, x) -> float:
        return self.derivative((0,) * self.dim, x)

    def rebase(self, new_base) -> "Poly":
        """Same polynomial expanded about new_base"""
        new_base = np.asarray(new_base, dtype=float).reshape(1, -1)
        coeffs = [self.derivative_many(a, new_base)[0] for a in multi_indices(self.dim, self.m - 1)]
        return Poly(tuple(new_base[0]), np.asarray(coeffs), self.m)

    def with_order(self, m: int) -> "Poly":
        """Re-express with another jet order; fails if that drops nonzero terms"""
        return Poly.from_dict(self.basepoint, self.as_dict(), m)

    def __add__(self, other: "Poly") -> "Poly":
        other = other.rebase(self.basepoint) if other.basepoint != self.basepoint else other
        if other.m != self.m:
            raise GeometryError("polynomials of different jet order")
        return Poly(self.basepoint, self.coeffs + other.coeffs, self.m)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1.0)

    def scale(self, factor: float) -> "Poly":
        return Poly(self.basepoint, factor * self.coeffs, self.m)


def poly_eval_deriv(P: Poly, alpha: MultiIndex, x) -> float:
    """D^alpha P(x), exactly 0 when |alpha| >= m"""
    return P.derivative(tuple(alpha), x)


def jet_difference(P: Poly, Q: Poly, alpha: MultiIndex, x) -> float:
    """D^alpha (P - Q)(x)"""
    if P.dim != Q.dim:
        raise DimensionMismatchError(f"dimension mismatch: {P.dim} vs {Q.dim}")
    return P.derivative(tuple(alpha), x) - Q.derivative(tuple(alpha), x)


# ============================================================================
# Whitney fields
# ============================================================================

def check_exponent(p: float, dim: int) -> float:
    p = float(p)
    if math.isnan(p) or not (math.isinf(p) and p > 0 or p > dim):
        raise ExponentError(f"integrability exponent must satisfy p > n = {dim}, got {p}")
    return p


@dataclass(frozen=True, eq=False)
class JetField:
    """
    Whitney (m-1)-field: one polynomial P_x per point x of E, based at x.

    coeffs[i] holds D^alpha P_{x_i}(x_i) for alpha in multi_indices(dim, m - 1).
    """

    points: np.ndarray
    coeffs: np.ndarray
    m: int
    p: float
    generator: Optional[Poly] = None

    def __post_init__(self):
        points = as_points(self.points)
        if not 1 <= self.m <= MAX_ORDER:
            raise FieldSchemaError(f"m must be in 1..{MAX_ORDER}, got {self.m}")
        dim = points.shape[1]
        check_exponent(self.p, dim)
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(len(points), -1)
        if coeffs.shape[1] != len(multi_indices(dim, self.m - 1)):
            raise FieldSchemaError("coefficient table does not match (dim, m)")
        if not np.all(np.isfinite(coeffs)):
            raise FieldSchemaError("jet coefficients must be finite")
        if len(points) > 1 and min_separation(points) == 0:
            raise FieldSchemaError("points of E must be distinct")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "p", float(self.p))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def alphas(self) -> Tuple[MultiIndex, ...]:
        return multi_indices(self.dim, self.m - 1)

    def poly(self, i: int) -> Poly:
        return Poly(tuple(self.points[i]), self.coeffs[i], self.m)

    @property
    def polys(self) -> List[Poly]:
        return [self.poly(i) for i in range(self.size)]

    def jet_value(self, i: int, alpha: MultiIndex) -> float:
        """D^alpha P_{x_i}(x_i)"""
        if sum(alpha) > self.m - 1:
            return 0.0
        return float(self.coeffs[i, index_position(self.dim, self.m - 1)[tuple(alpha)]])

    def scaled(self, factor: float) -> "JetField":
        return JetField(self.points, factor * self.coeffs, self.m, self.p)

    def combine(self, a: float, other: "JetField", b: float) -> "JetField":
        """a * self + b * other on the same E"""
        if other.m != self.m or other.points.shape != self.points.shape or not np.array_equal(other.points, self.points):
            raise FieldSchemaError("fields must share E and m to be combined")
        return JetField(self.points, a * self.coeffs + b * other.coeffs, self.m, self.p)

    def with_exponent(self, p: float) -> "JetField":
        return JetField(self.points, self.coeffs, self.m, p, self.generator)


def field_from_polynomial(G: Poly, E, m: int, p: Optional[float] = None) -> JetField:
    """
    Whitney field of Taylor jets of one global polynomial.

    Args:
        G: polynomial with degree <= m-1
        E: point set
        m: jet order plus one
        p: integrability exponent; defaults to n + 1

    Returns:
        JetField with P_x = T_x^{m-1}[G] for every x in E
    """
    points = as_points(E)
    if points.shape[1] != G.dim:
        raise DimensionMismatchError(f"dimension mismatch: {points.shape[1]} vs {G.dim}")
    if G.degree > m - 1:
        raise GeometryError(f"degree {G.degree} exceeds m-1 = {m - 1}")
    alphas = multi_indices(G.dim, m - 1)
    G = G.with_order(max(G.m, m))
    coeffs = np.column_stack([G.derivative_many(alpha, points) for alpha in alphas])
    p = float(G.dim + 1) if p is None else p
    return JetField(points, coeffs, m, p, G.with_order(m))


# ============================================================================
# JSON schema
# ============================================================================

def _format_exponent(p: float) -> Union[float, str]:
    return "inf" if math.isinf(p) else p


def field_to_dict(jf: JetField) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "dim": jf.dim,
        "m": jf.m,
        "p": _format_exponent(jf.p),
        "points": jf.points.tolist(),
        "jets": [
            {format_multi_index(alpha): float(c) for alpha, c in zip(jf.alphas, row)}
            for row in jf.coeffs
        ],
    }
    if jf.generator is not None:
        data["generator"] = {
            "basepoint": list(jf.generator.basepoint),
            "coeffs": {format_multi_index(a): c for a, c in jf.generator.as_dict().items()},
        }
    return data


def field_from_dict(data: Mapping[str, Any]) -> JetField:
    try:
        dim = int(data["dim"])
        m = int(data["m"])
        p = float(data["p"])
        points = data["points"]
        jets = data["jets"]
    except (KeyError, TypeError, ValueError) as e:
        raise FieldSchemaError(f"jet field JSON is missing or has bad keys: {e}") from e

    if not 1 <= dim <= MAX_DIM:
        raise FieldSchemaError(f"dim must be in 1..{MAX_DIM}, got {dim}")
    if not 1 <= m <= MAX_ORDER:
        raise FieldSchemaError(f"m must be in 1..{MAX_ORDER}, got {m}")
    if len(points) != len(jets) or len(points) == 0:
        raise FieldSchemaError("need one jet per point and at least one point")
    if any(len(x) != dim for x in points):
        raise FieldSchemaError("point coordinates do not match dim")

    positions = index_position(dim, m - 1)
    coeffs = np.zeros((len(points), len(positions)))
    for i, jet in enumerate(jets):
        for key, value in jet.items():
            alpha = parse_multi_index(key, dim)
            if sum(alpha) > m - 1:
                if float(value) != 0.0:
                    raise FieldSchemaError(f"jet {i} has order {sum(alpha)} >= m")
                continue
            coeffs[i, positions[alpha]] = float(value)

    generator = None
    if "generator" in data:
        spec = data["generator"]
        raw = {parse_multi_index(k, dim): float(v) for k, v in spec["coeffs"].items()}
        generator = Poly.from_dict(spec["basepoint"], raw, m)

    try:
        return JetField(np.asarray(points, dtype=float), coeffs, m, p, generator)
    except GeometryError as e:
        raise FieldSchemaError(str(e)) from e


def load_field(path: Union[str, Path]) -> JetField:
    """Read a jet field JSON file"""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise FieldSchemaError(f"cannot read jet file {path}: {e}") from e
    try:
        data = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise FieldSchemaError(f"jet file {path} is not valid JSON: {e}") from e
    return field_from_dict(data)


def dump_field(jf: JetField, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(field_to_dict(jf), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
    return path


def random_polynomial(rng: np.random.Generator, dim: int, m: int, basepoint: Optional[Iterable[float]] = None) -> Poly:
    """Polynomial of degree <= m-1 with standard normal Taylor coefficients"""
    base = tuple(basepoint) if basepoint is not None else (0.0,) * dim
    return Poly(base, rng.standard_normal(len(multi_indices(dim, m - 1))), m)
