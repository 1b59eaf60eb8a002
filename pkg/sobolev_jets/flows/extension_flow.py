"""
Extension Pipeline Flow
Orchestrates nets -> cover -> lacunae -> projector -> contacts -> graph -> plan as a LangGraph StateGraph
"""

import logging
import operator
import time
from typing import Annotated, Any, Callable, Dict, List, Optional, TypedDict

from langgraph.graph import END, START, StateGraph

from ..core.extension import ExtensionPlan, plan_extension, truncation_delta, truncation_depth
from ..core.geometry import DyadicNets, build_dyadic_nets
from ..core.jets import JetField
from ..core.lacunae import Contact, Lacuna, LacunaConstants, classify_lacunae, contacting_pairs, project_lacunae
from ..core.sparse_graph import SparseGraph, build_graph
from ..core.whitney import WhitneyCover, root_window, whitney_decompose
from ..errors import ConfigError
from ..settings import Settings

logger = logging.getLogger(__name__)

STAGES = ("nets", "cover", "lacunae", "projector", "contacts", "graph", "plan")


def _merge(left: Dict[str, float], right: Dict[str, float]) -> Dict[str, float]:
    return {**left, **right}


class ExtensionState(TypedDict, total=False):
    """State carried through the extension pipeline"""

    field: JetField
    settings: Settings
    stop_after: str

    nets: DyadicNets
    cover: WhitneyCover
    lacunae: List[Lacuna]
    contacts: List[Contact]
    graph: SparseGraph
    plan: ExtensionPlan

    completed: Annotated[List[str], operator.add]
    notes: Annotated[List[str], operator.add]
    timings: Annotated[Dict[str, float], _merge]


def _timed(stage: str, build: Callable[[ExtensionState], Dict[str, Any]]) -> Callable[[ExtensionState], Dict[str, Any]]:
    def node(state: ExtensionState) -> Dict[str, Any]:
        started = time.perf_counter()
        update = build(state)
        elapsed = time.perf_counter() - started
        logger.debug("stage %s finished in %.3fs", stage, elapsed)
        update["completed"] = [stage]
        update["timings"] = {stage: elapsed}
        return update

    return node


# ============================================================================
# Nodes
# ============================================================================

def build_nets_node(state: ExtensionState) -> Dict[str, Any]:
    """Nested separated nets of E"""
    return {"nets": build_dyadic_nets(state["field"].points)}


def decompose_node(state: ExtensionState) -> Dict[str, Any]:
    """Whitney cubes of the window around E"""
    cfg = state["settings"].whitney
    depth_cap = None if cfg.depth_cap == "auto" else int(cfg.depth_cap)
    cover = whitney_decompose(
        state["field"].points,
        inflate=cfg.inflate,
        depth_cap=depth_cap,
        max_depth=cfg.max_depth,
        resolution_factor=cfg.resolution_factor,
    )
    notes = []
    if len(cover.collar_centers):
        notes.append(f"{len(cover.collar_centers)} collar cubes left at depth {cover.depth_cap}")
    return {"cover": cover, "notes": notes}


def classify_node(state: ExtensionState) -> Dict[str, Any]:
    """True and elementary lacunae"""
    lacunae = classify_lacunae(state["cover"])
    notes = [] if any(L.unbounded for L in lacunae) else ["no unbounded lacuna found; window may be too tight"]
    return {"lacunae": lacunae, "notes": notes}


def project_node(state: ExtensionState) -> Dict[str, Any]:
    """Center of every lacuna"""
    cfg = state["settings"].lacunae
    consts = LacunaConstants(tau=cfg.tau, gamma_tilde=cfg.gamma_tilde)
    return {"lacunae": project_lacunae(state["lacunae"], state["nets"], consts, state["cover"])}


def contacts_node(state: ExtensionState) -> Dict[str, Any]:
    """Pairs of distinct lacunae with touching cubes"""
    return {"contacts": contacting_pairs(state["lacunae"], state["cover"])}


def graph_node(state: ExtensionState) -> Dict[str, Any]:
    """Sparse graph on E with certificates"""
    graph = build_graph(
        state["field"].points, state["lacunae"], state["cover"], state["contacts"], state["settings"].gamma
    )
    return {"graph": graph}


def plan_node(state: ExtensionState) -> Dict[str, Any]:
    """Jet assignment of every Whitney cube"""
    plan = plan_extension(
        state["field"], state["cover"], state["lacunae"], state["settings"].lacunae.gamma_tilde
    )
    return {"plan": plan}


NODES = {
    "nets": build_nets_node,
    "cover": decompose_node,
    "lacunae": classify_node,
    "projector": project_node,
    "contacts": contacts_node,
    "graph": graph_node,
    "plan": plan_node,
}


def _route_after(stage: str, following: str) -> Callable[[ExtensionState], str]:
    def route(state: ExtensionState) -> str:
        return END if state.get("stop_after") == stage else following

    return route


# ============================================================================
# Graph
# ============================================================================

def create_extension_graph():
    """Create and compile the extension pipeline"""

    workflow = StateGraph(ExtensionState)

    for stage in STAGES:
        workflow.add_node(stage, _timed(stage, NODES[stage]))

    workflow.add_edge(START, STAGES[0])
    for stage, following in zip(STAGES, STAGES[1:]):
        workflow.add_conditional_edges(stage, _route_after(stage, following), {following: following, END: END})
    workflow.add_edge(STAGES[-1], END)

    return workflow.compile()


extension_graph = create_extension_graph()


def run_extension_pipeline(field: JetField, settings: Settings, stop_after: Optional[str] = None) -> ExtensionState:
    """
    Run the construction stages on a jet field.

    Args:
        field: Whitney field on E
        settings: validated run settings
        stop_after: last stage to run (one of STAGES); None runs all of them

    Returns:
        Final pipeline state with every object built so far
    """
    stop_after = stop_after or STAGES[-1]
    if stop_after not in STAGES:
        raise ConfigError(f"unknown pipeline stage '{stop_after}', expected one of {', '.join(STAGES)}")

    initial_state: ExtensionState = {
        "field": field,
        "settings": settings,
        "stop_after": stop_after,
        "completed": [],
        "notes": [],
        "timings": {},
    }
    result = extension_graph.invoke(initial_state)
    for note in result.get("notes", []):
        logger.warning(note)
    return result


def truncation_settings(field: JetField, settings: Settings) -> Settings:
    """Settings whose cover refines far enough to resolve delta = delta_factor * epsilon"""
    cfg = settings.extension
    window = root_window(field.points, settings.whitney.inflate)
    delta = truncation_delta(cfg.epsilon, cfg.delta_factor)
    depth = truncation_depth(window, delta, settings.whitney.resolution_factor)
    current = settings.whitney.depth_cap
    if current != "auto" and int(current) >= depth:
        return settings
    logger.info("refining the cover to depth %d for delta %.3g", depth, delta)
    return settings.with_overrides({"whitney.depth_cap": depth})


__all__ = ["STAGES", "ExtensionState", "extension_graph", "run_extension_pipeline", "truncation_settings"]
