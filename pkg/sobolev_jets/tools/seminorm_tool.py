"""
Seminorm Tool
Every trace functional of a jet field in one report, with the ratios between them
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional

from ..core.jets import JetField
from ..core.quadrature import QuadratureSpec
from ..core.seminorms import phi_psi_m1, sharp_max_lp, sobolev_seminorm, trace_norm_bruteforce
from ..core.sparse_graph import graph_seminorm
from ..flows.extension_flow import run_extension_pipeline
from ..settings import Settings
from .report_tool import envelope, write_report

logger = logging.getLogger(__name__)


def quadrature_spec(settings: Settings) -> QuadratureSpec:
    cfg = settings.quadrature
    return QuadratureSpec(
        order=cfg.order,
        refinement_check=cfg.refinement_check,
        refinement_tolerance=cfg.refinement_tolerance,
        chunk_cubes=cfg.chunk_cubes,
    )


def _ratio(a: float, b: float) -> Optional[float]:
    return a / b if b > 0 else None


def seminorm_values(field: JetField, settings: Settings) -> Dict[str, Any]:
    """All functionals on one pipeline run, values only"""
    state = run_extension_pipeline(field, settings)
    graph, plan, cover = state["graph"], state["plan"], state["cover"]
    quad = quadrature_spec(settings)
    cfg = settings.graph

    values: Dict[str, Any] = {"graph": graph_seminorm(field, graph)}
    if field.size <= cfg.bruteforce_max_points:
        values["bruteforce"] = trace_norm_bruteforce(field, gamma=cfg.bruteforce_gamma, max_points=cfg.bruteforce_max_points)
    else:
        logger.info("brute force skipped: %d points exceed %d", field.size, cfg.bruteforce_max_points)
    values["sharp_max"] = sharp_max_lp(field, quad, cover).to_dict()
    values["sobolev"] = sobolev_seminorm(plan, quad=quad).to_dict()
    if field.m == 1 and not math.isinf(field.p):
        phi, psi = phi_psi_m1(field.coeffs[:, 0], field.points, field.p, quad, cfg.bruteforce_gamma, graph, cover)
        values["phi"] = phi.to_dict()
        values["psi"] = psi.to_dict()

    ratios = {
        "sobolev_over_graph": _ratio(values["sobolev"]["value"], values["graph"]),
        "sharp_over_graph": _ratio(values["sharp_max"]["value"], values["graph"]),
    }
    if "phi" in values:
        ratios["phi_over_psi"] = _ratio(values["phi"]["value"], values["psi"]["value"])
    return {"values": values, "ratios": ratios, "timings": state["timings"]}


def seminorm_tool(field: JetField, settings: Settings, output_dir: Path) -> Dict[str, Any]:
    """Seminorm report written as seminorms.json"""
    computed = seminorm_values(field, settings)
    result = envelope(
        command="seminorm",
        instance={"dim": field.dim, "m": field.m, "p": field.p, "points": field.size},
        **computed,
    )
    write_report(result, output_dir / "seminorms.json")
    return result
