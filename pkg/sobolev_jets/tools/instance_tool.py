"""
Instance Tool
Seeded random jet fields written in the jet JSON schema
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from ..core.jets import JetField, dump_field, field_from_polynomial, field_to_dict, multi_indices, random_polynomial
from ..errors import ConfigError
from .report_tool import envelope

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 200


def random_points(rng: np.random.Generator, n: int, count: int, spread: float = 1.0, separation: Optional[float] = None) -> np.ndarray:
    """
    count points in [-spread, spread]^n, pairwise at least separation apart in the uniform norm.

    Raises:
        ConfigError: the points do not fit after repeated rejection
    """
    if count < 1:
        raise ConfigError(f"need at least one point, got {count}")
    separation = spread / (4.0 * count ** (1.0 / n)) if separation is None else separation
    kept = np.zeros((0, n))
    attempts = 0
    while len(kept) < count:
        if attempts > MAX_ATTEMPTS * count:
            raise ConfigError(f"cannot place {count} points with separation {separation:g} in dimension {n}")
        attempts += 1
        x = rng.uniform(-spread, spread, size=n)
        if len(kept) and np.min(np.max(np.abs(kept - x), axis=1)) < separation:
            continue
        kept = np.vstack([kept, x])
    return kept


def generate_instance(
    seed: int,
    n: int,
    m: int,
    points: int,
    p: Optional[float] = None,
    polynomial: bool = False,
    spread: float = 1.0,
    separation: Optional[float] = None,
) -> JetField:
    """
    Random jet field; with polynomial=True every jet is the Taylor jet of one global polynomial.

    All randomness comes from seed.
    """
    rng = np.random.default_rng(seed)
    p = float(n + 1) if p is None else float(p)
    E = random_points(rng, n, points, spread, separation)
    if polynomial:
        return field_from_polynomial(random_polynomial(rng, n, m), E, m, p)
    coeffs = rng.standard_normal((points, len(multi_indices(n, m - 1))))
    return JetField(E, coeffs, m, p)


def gen_tool(
    seed: int,
    n: int,
    m: int,
    points: int,
    output: Union[str, Path],
    p: Optional[float] = None,
    polynomial: bool = False,
) -> Dict[str, Any]:
    """Generate an instance and write it as a jet file"""
    field = generate_instance(seed, n, m, points, p, polynomial)
    path = dump_field(field, output)
    logger.info("generated %d points in dimension %d (m = %d, seed %d)", points, n, m, seed)
    result = envelope(
        command="gen",
        seed=seed,
        instance={"dim": n, "m": m, "points": points, "p": field.p, "polynomial": polynomial},
        field=field_to_dict(field),
    )
    result["artifacts"].append(str(path))
    return result
