"""
Construction Tool
Reports for the Whitney cover, the lacunae and the sparse graph of a jet field
"""

import logging
from pathlib import Path
from typing import Any, Dict

from ..core.geometry import dyadic_point_sets
from ..core.jets import JetField
from ..core.lacunae import LacunaConstants, lacuna_statistics, lacuna_to_dict, lacuna_violations
from ..core.sparse_graph import graph_statistics, to_dot, verify_sparse
from ..core.whitney import cover_statistics, cover_violations
from ..flows.extension_flow import run_extension_pipeline
from ..settings import Settings
from .report_tool import envelope, write_report, write_text

logger = logging.getLogger(__name__)


def decompose_tool(field: JetField, settings: Settings, output_dir: Path) -> Dict[str, Any]:
    """Whitney cover JSON with packing statistics and the exact cover checks"""
    state = run_extension_pipeline(field, settings, stop_after="cover")
    cover, nets = state["cover"], state["nets"]
    result = envelope(
        command="decompose",
        statistics=cover_statistics(cover),
        violations=cover_violations(cover),
        nets=[{"level": i, "size": len(pts)} for i, pts in dyadic_point_sets(nets)],
        cover=cover.to_dict(),
        timings=state["timings"],
    )
    write_report(result, output_dir / "cover.json")
    return result


def lacunae_tool(field: JetField, settings: Settings, output_dir: Path) -> Dict[str, Any]:
    """Lacuna list with projector rules, measured constants and violations"""
    state = run_extension_pipeline(field, settings, stop_after="contacts")
    cover, lacunae, contacts = state["cover"], state["lacunae"], state["contacts"]
    consts = LacunaConstants(tau=settings.lacunae.tau, gamma_tilde=settings.lacunae.gamma_tilde)
    violations = lacuna_violations(lacunae, contacts, cover, consts)
    result = envelope(
        command="lacunae",
        constants=consts.to_dict(),
        statistics=lacuna_statistics(lacunae, contacts, cover),
        violations=violations,
        contacts=len(contacts),
        lacunae=[lacuna_to_dict(L, cover) for L in lacunae],
        timings=state["timings"],
    )
    write_report(result, output_dir / "lacunae.json")
    return result


def graph_tool(field: JetField, settings: Settings, output_dir: Path) -> Dict[str, Any]:
    """Graph JSON, DOT export and the sparsity report"""
    state = run_extension_pipeline(field, settings, stop_after="graph")
    graph = state["graph"]
    result = envelope(
        command="graph",
        statistics=graph_statistics(graph),
        sparsity=verify_sparse(graph),
        graph=graph.to_dict(),
        timings=state["timings"],
    )
    write_report(result, output_dir / "graph.json")
    write_text(result, to_dot(graph), output_dir / "graph.dot")
    return result
