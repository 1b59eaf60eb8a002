"""
Metric Tool
rho_q / d_q dumps with the factor-16 and transform checks, and McShane-type extensions of m = 1 data
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from ..core.geometry import Cube
from ..core.jets import JetField
from ..core.metrics import (
    DensityField,
    MetricSample,
    check_metric_factor,
    check_vmt,
    l1p_extend,
    lipschitz_constant,
    load_density,
    mcshane_extend,
    profile_violations,
    refinement_report,
    rho_many,
    sampled_lipschitz,
    scaled_uniform_metric,
    v_and_omega,
)
from ..core.whitney import root_window
from ..errors import ConfigError
from ..settings import Settings
from .report_tool import envelope, write_csv, write_report

logger = logging.getLogger(__name__)


def default_density(dim: int, resolution: int) -> DensityField:
    """h = 1 on [-1, 1]^n with q = n + 1"""
    return DensityField.constant(Cube((0.0,) * dim, 1.0), resolution, 1.0, float(dim + 1))


def metric_tool(
    settings: Settings,
    output_dir: Path,
    seed: int = 0,
    density_path: Optional[Path] = None,
    dim: int = 2,
    pairs: int = 100,
) -> Dict[str, Any]:
    """
    rho_hat and d_hat on random site pairs of a sample graph.

    Args:
        density_path: density JSON; a constant density on [-1, 1]^dim when None
        pairs: number of random site pairs (and triples)
    """
    cfg = settings.metric
    h = load_density(density_path) if density_path else default_density(dim, cfg.resolution)
    sample = MetricSample.build(h, radius_cells=cfg.sample_radius_cells, substeps=cfg.substeps)
    rng = np.random.default_rng(seed)

    index_pairs = rng.integers(len(sample.sites), size=(pairs, 2))
    index_pairs = index_pairs[index_pairs[:, 0] != index_pairs[:, 1]]
    triples = rng.integers(len(sample.sites), size=(pairs, 3))
    triples = triples[(triples[:, 0] != triples[:, 1]) & (triples[:, 1] != triples[:, 2]) & (triples[:, 0] != triples[:, 2])]

    factor = check_metric_factor(sample, index_pairs, cfg.slack)
    transform = check_vmt(sample, triples, cfg.slack)
    center = np.asarray(h.box.center)
    profile = v_and_omega(center, h, cfg.substeps)

    X, Y = sample.sites[index_pairs[:, 0]], sample.sites[index_pairs[:, 1]]
    rho = rho_many(h, X, Y, cfg.substeps)
    d = [min(r, sample.pair_distance(int(i), int(j))) for r, (i, j) in zip(rho, index_pairs)]
    rows = np.column_stack([X, Y, rho, d]) if len(index_pairs) else np.zeros((0, 2 * h.dim + 2))
    columns = [f"x{k}" for k in range(h.dim)] + [f"y{k}" for k in range(h.dim)] + ["rho", "d"]
    frame = pd.DataFrame(rows, columns=columns)

    result = envelope(
        command="metric",
        seed=seed,
        density={"dim": h.dim, "resolution": h.resolution, "q": h.q, "box": h.box.to_dict()},
        sample={"sites": len(sample.sites), "edges": int(sample.graph.nnz // 2), "radius": sample.radius},
        metric_factor=factor,
        transform=transform,
        profile={"x": center.tolist(), **profile.to_dict(), "violations": profile_violations(profile)},
    )
    if len(index_pairs):
        i, j = index_pairs[0]
        result["refinement"] = refinement_report(sample.sites[i], sample.sites[j], h, cfg.substeps)
    write_csv(result, frame, output_dir / "metric_pairs.csv")
    write_report(result, output_dir / "metric.json")
    return result


def _grid(box: Cube, resolution: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def mcshane_tool(field: JetField, settings: Settings, output_dir: Path) -> Dict[str, Any]:
    """
    Extension of m = 1 data: the Lipschitz McShane formula for p = inf,
    the L^1_p formula through d_q(f#) for finite p.

    Raises:
        ConfigError: the field carries jets of order above zero
    """
    if field.m != 1:
        raise ConfigError(f"mcshane extends values (m = 1), got m = {field.m}")
    E, f = field.points, field.coeffs[:, 0]
    resolution = settings.extension.grid_resolution

    if math.isinf(field.p):
        lip = lipschitz_constant(E, f)
        metric = scaled_uniform_metric(lip)
        X = _grid(root_window(E, settings.whitney.inflate), resolution)
        F = np.asarray([mcshane_extend(f, E, metric, x) for x in X])
        on_E = np.asarray([mcshane_extend(f, E, metric, x) for x in E])
        sampled = sampled_lipschitz(np.vstack([X, E]), np.concatenate([F, on_E]))
        details = {
            "method": "lipschitz",
            "lipschitz": lip,
            "sampled_lipschitz": sampled,
            "lipschitz_ok": sampled <= lip * (1.0 + 1e-6) + 1e-12,
        }
    else:
        cfg = settings.metric
        ext = l1p_extend(f, E, field.p, cfg.resolution, cfg.sample_radius_cells, cfg.substeps, settings.whitney.inflate)
        X, F = ext.grid(resolution)
        on_E = ext(E)
        details = {
            "method": "l1p",
            "q": ext.q,
            "density_max": float(ext.density.values.max()),
            "sites": len(ext.sample.sites),
        }

    frame = pd.DataFrame(np.column_stack([X, F]), columns=[f"x{k}" for k in range(field.dim)] + ["value"])
    result = envelope(
        command="mcshane",
        trace_error=float(np.max(np.abs(on_E - f))),
        grid={"resolution": resolution, "rows": len(frame)},
        **details,
    )
    write_csv(result, frame, output_dir / "mcshane_grid.csv")
    write_report(result, output_dir / "mcshane.json")
    return result
