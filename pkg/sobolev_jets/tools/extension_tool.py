"""
Extension Tool
Grid dumps of F and F_eps with the reproduction check and the W^m_p parts
"""

import logging
from pathlib import Path
from typing import Any, Dict

from ..core.extension import grid_evaluation, reproduction_error, window_grid
from ..core.jets import JetField
from ..core.seminorms import wmp_norm_parts, wmp_numerical_norm
from ..flows.extension_flow import run_extension_pipeline, truncation_settings
from ..settings import Settings
from .report_tool import envelope, write_csv, write_report
from .seminorm_tool import quadrature_spec

logger = logging.getLogger(__name__)

REPRODUCTION_TOL = 1e-9


def extend_tool(field: JetField, settings: Settings, output_dir: Path) -> Dict[str, Any]:
    """Grid CSV of F and its derivatives of order <= m-1"""
    state = run_extension_pipeline(field, settings)
    plan = state["plan"]
    resolution = settings.extension.grid_resolution
    frame = grid_evaluation(plan, resolution)

    result = envelope(
        command="extend",
        grid={"resolution": resolution, "rows": len(frame), "window": plan.cover.window.to_dict()},
        far_center=plan.far_index,
        cubes=len(plan.cover),
        timings=state["timings"],
    )
    if field.generator is not None:
        worst, scale = reproduction_error(plan, field.generator, window_grid(plan, resolution))
        result["reproduction"] = {
            "max_error": worst,
            "scale": scale,
            "passed": worst <= REPRODUCTION_TOL * max(scale, 1.0),
        }
        logger.info("reproduction error %.3g against scale %.3g", worst, scale)
    write_csv(result, frame, output_dir / "extension_grid.csv")
    write_report(result, output_dir / "extension.json")
    return result


def wmp_tool(field: JetField, settings: Settings, output_dir: Path) -> Dict[str, Any]:
    """
    F_eps grid, the discrete W^m_p parts and the numerical norm of F_eps.

    The cover is refined until its finest cubes resolve delta, otherwise F_eps
    vanishes on every covered point.
    """
    state = run_extension_pipeline(field, truncation_settings(field, settings))
    plan = state["plan"]
    cfg = settings.extension
    frame = grid_evaluation(plan, cfg.grid_resolution, epsilon=cfg.epsilon, delta_factor=cfg.delta_factor)
    parts = wmp_norm_parts(
        field,
        cfg.epsilon,
        field.p,
        state["lacunae"],
        state["cover"],
        state["graph"],
        settings.graph.bruteforce_gamma,
        settings.graph.bruteforce_max_points,
    )
    numerical = wmp_numerical_norm(plan, cfg.epsilon, field.p, quadrature_spec(settings), cfg.delta_factor)
    result = envelope(
        command="wmp",
        epsilon=cfg.epsilon,
        delta=cfg.delta_factor * cfg.epsilon,
        parts=parts.to_dict(),
        numerical=numerical.to_dict(),
        ratio=numerical.value / parts.total if parts.total > 0 else None,
        depth=state["cover"].depth_cap,
        grid={"resolution": cfg.grid_resolution, "rows": len(frame)},
        timings=state["timings"],
    )
    write_csv(result, frame, output_dir / "wmp_grid.csv")
    write_report(result, output_dir / "wmp.json")
    return result
