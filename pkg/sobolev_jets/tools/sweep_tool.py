"""
Sweep Tool
Ratio windows of the trace functionals over seeded instance banks
"""

import itertools
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from ..settings import Settings
from .instance_tool import generate_instance
from .report_tool import envelope, write_csv, write_report
from .seminorm_tool import seminorm_values

logger = logging.getLogger(__name__)

RATIO_KEYS = ("sobolev_over_graph", "sharp_over_graph", "phi_over_psi")
EXPANSION_FACTOR = 1.2


def exponents(n: int) -> List[float]:
    """p in {n + 1, 2n, 4n}, dropping values that are not above n"""
    return sorted({float(p) for p in (n + 1, 2 * n, 4 * n) if p > n})


def window_constant(ratios: Sequence[float]) -> float:
    """Smallest C with every ratio in [1/C, C]"""
    ratios = [r for r in ratios if r is not None and r > 0]
    if not ratios:
        return float("nan")
    return float(max(max(ratios), 1.0 / min(ratios)))


def sweep_tool(
    settings: Settings,
    output_dir: Path,
    seed: int = 0,
    dims: Sequence[int] = (1, 2),
    orders: Sequence[int] = (1, 2, 3),
    instances: int = 5,
    points: int = 6,
) -> Dict[str, Any]:
    """
    For every (n, m, p): the window constant C of each ratio over the bank, and
    whether C grows when the number of points doubles.
    """
    rows = []
    configs = [(n, m, p) for n, m in itertools.product(dims, orders) for p in exponents(n)]
    for k, (n, m, p) in enumerate(configs):
        for size in (points, 2 * points):
            for i in range(instances):
                instance_seed = int(np.random.SeedSequence([seed, k, size, i]).generate_state(1)[0])
                field = generate_instance(instance_seed, n, m, size, p)
                ratios = seminorm_values(field, settings)["ratios"]
                rows.append({"n": n, "m": m, "p": p, "points": size, "seed": instance_seed, **{key: ratios.get(key) for key in RATIO_KEYS}})
        logger.info("sweep (n=%d, m=%d, p=%g) done", n, m, p)

    frame = pd.DataFrame(rows)
    windows = []
    for (n, m, p), group in frame.groupby(["n", "m", "p"], sort=True):
        entry: Dict[str, Any] = {"n": int(n), "m": int(m), "p": float(p)}
        for key in RATIO_KEYS:
            base = window_constant(group.loc[group["points"] == points, key].tolist())
            doubled = window_constant(group.loc[group["points"] == 2 * points, key].tolist())
            if np.isnan(base):
                continue
            entry[key] = {"C": base, "C_doubled": doubled, "expands": bool(doubled > base * EXPANSION_FACTOR)}
        windows.append(entry)

    result = envelope(
        command="sweep",
        seed=seed,
        bank={"dims": list(dims), "orders": list(orders), "instances": instances, "points": points},
        windows=windows,
    )
    write_csv(result, frame, output_dir / "sweep_ratios.csv")
    write_report(result, output_dir / "sweep.json")
    return result
