"""
Verification Flow
Runs every invariant suite on a built pipeline as parallel StateGraph branches and joins their reports
"""

import logging
import math
import operator
from typing import Annotated, Any, Callable, Dict, List, Optional, TypedDict

import numpy as np
from langgraph.graph import END, START, StateGraph

from ..core.extension import ExtensionPlan, evaluate, plan_extension, reproduction_error, truncation_check
from ..core.jets import JetField, multi_indices
from ..core.lacunae import LacunaConstants, lacuna_statistics, lacuna_violations
from ..core.metrics import (
    DensityField,
    MetricSample,
    check_metric_factor,
    check_vmt,
    l1p_extend,
    lipschitz_constant,
    mcshane_extend,
    profile_violations,
    sampled_lipschitz,
    scaled_uniform_metric,
    sharp_envelope,
    v_and_omega,
)
from ..core.quadrature import QuadratureSpec
from ..core.seminorms import phi_m1, sobolev_seminorm, trace_norm_bruteforce
from ..core.sparse_graph import graph_seminorm, graph_statistics, verify_sparse
from ..core.whitney import (
    cover_statistics,
    cover_violations,
    packing_bound,
    partition_check,
    root_window,
    star_equivalence_violations,
)
from ..errors import CollarError, SobolevJetsError
from ..settings import Settings
from .extension_flow import ExtensionState, run_extension_pipeline, truncation_settings

logger = logging.getLogger(__name__)

POU_TOL = 1e-9
DERIVATIVE_SUM_TOL = 1e-6
REPRODUCTION_TOL = 1e-9
SEMINORM_FLOOR = 1e-8
LINEARITY_TOL = 1e-12
CHAIN_TOL = 1e-9
TRUNCATION_TOL = 1e-12
TRUNCATION_SAMPLES = 32
OFF_WINDOW_SAMPLES = 32
METRIC_RESOLUTION = 8
METRIC_PAIRS = 20


class VerificationState(TypedDict, total=False):
    """Built objects under test plus the reports of the finished suites"""

    pipeline: ExtensionState
    settings: Settings
    seed: int
    suites: Annotated[List[Dict[str, Any]], operator.add]
    passed: bool


def suite_report(
    name: str,
    violations: List[str],
    measured: Optional[Dict[str, Any]] = None,
    warnings: Optional[List[str]] = None,
) -> Dict[str, Any]:
    return {
        "name": name,
        "passed": not violations,
        "violations": violations,
        "warnings": warnings or [],
        "measured": measured or {},
    }


def _bounds(settings: Settings, measured: Dict[str, float], keys: Dict[str, str]) -> List[str]:
    """Measured constants above their configured bounds"""
    bounds = settings.verification.empirical_bounds
    found = []
    for key, bound_name in keys.items():
        bound = bounds.get(bound_name)
        if bound is not None and measured.get(key, 0) > bound:
            found.append(f"{key} = {measured[key]} exceeds bound {bound}")
    return found


def _samples(state: VerificationState, count: int, salt: int) -> np.ndarray:
    window = state["pipeline"]["cover"].window
    rng = np.random.default_rng([state.get("seed", 0), salt])
    lower, upper = window.lower, window.upper
    return rng.uniform(lower, upper, size=(count, window.dim))


def _covered(plan: ExtensionPlan, X: np.ndarray) -> np.ndarray:
    return np.asarray([x for x in X if plan.cover.owner(x) is not None]).reshape(-1, plan.field.dim)


def _guarded(name: str, check: Callable[[VerificationState], Dict[str, Any]]) -> Callable[[VerificationState], Dict[str, Any]]:
    def node(state: VerificationState) -> Dict[str, Any]:
        try:
            report = check(state)
        except SobolevJetsError as e:
            report = suite_report(name, [f"{type(e).__name__}: {e}"])
        logger.info("suite %s: %s", name, "passed" if report["passed"] else "FAILED")
        return {"suites": [report]}

    return node


# ============================================================================
# Suites
# ============================================================================

def nets_suite(state: VerificationState) -> Dict[str, Any]:
    nets = state["pipeline"]["nets"]
    return suite_report("nets", nets.check(), {"i_min": nets.i_min, "i_max": nets.i_max})


def cover_suite(state: VerificationState) -> Dict[str, Any]:
    cover = state["pipeline"]["cover"]
    violations = cover_violations(cover) + star_equivalence_violations(cover)
    measured = {**cover_statistics(cover), "packing_bound": packing_bound(cover.dim)}
    return suite_report("whitney_cover", violations, measured)


def partition_suite(state: VerificationState) -> Dict[str, Any]:
    cover = state["pipeline"]["cover"]
    field = state["pipeline"]["field"]
    samples = _samples(state, state["settings"].verification.pou_samples, 1)
    measured = partition_check(cover, samples, field.m)
    violations = []
    if measured["max_sum_error"] > POU_TOL:
        violations.append(f"|sum phi - 1| = {measured['max_sum_error']:.3g} > {POU_TOL}")
    if measured["max_scaled_derivative_sum"] > DERIVATIVE_SUM_TOL:
        violations.append(f"scaled derivative sum {measured['max_scaled_derivative_sum']:.3g} > {DERIVATIVE_SUM_TOL}")
    if measured["support_violations"]:
        violations.append(f"{measured['support_violations']} bumps nonzero outside their star")
    return suite_report("partition_of_unity", violations, measured)


def lacunae_suite(state: VerificationState) -> Dict[str, Any]:
    pipeline = state["pipeline"]
    cfg = state["settings"].lacunae
    consts = LacunaConstants(tau=cfg.tau, gamma_tilde=cfg.gamma_tilde)
    found = lacuna_violations(pipeline["lacunae"], pipeline["contacts"], pipeline["cover"], consts)
    violations = [v for group in found.values() for v in group]
    measured = lacuna_statistics(pipeline["lacunae"], pipeline["contacts"], pipeline["cover"])
    violations += _bounds(state["settings"], measured, {"max_fiber": "fiber", "max_contacts": "contacts"})
    return suite_report("lacunae", violations, measured)


def graph_suite(state: VerificationState) -> Dict[str, Any]:
    graph = state["pipeline"]["graph"]
    violations = list(verify_sparse(graph)["violations"])
    measured = graph_statistics(graph)
    if not measured["connected"]:
        violations.append("graph on E is disconnected")
    violations += _bounds(state["settings"], measured, {"max_degree": "degree", "geodesic_stretch": "geodesic_stretch"})
    return suite_report("graph", violations, measured)


def reproduction_suite(state: VerificationState) -> Dict[str, Any]:
    plan = state["pipeline"]["plan"]
    generator = plan.field.generator
    if generator is None:
        return suite_report("reproduction", [], {"skipped": "field has no generator polynomial"})
    X = _samples(state, state["settings"].verification.reproduction_samples, 2)
    worst, scale = reproduction_error(plan, generator, X)
    violations = []
    if worst > REPRODUCTION_TOL * max(scale, 1.0):
        violations.append(f"max |F - G| = {worst:.3g} exceeds {REPRODUCTION_TOL} relative to {scale:.3g}")
    cfg = state["settings"].quadrature
    quad = QuadratureSpec(order=cfg.order, chunk_cubes=cfg.chunk_cubes)
    seminorm = sobolev_seminorm(plan, quad=quad).value
    warnings = []
    if seminorm > SEMINORM_FLOOR * max(scale, 1.0):
        warnings.append(f"seminorm of a reproduced polynomial is {seminorm:.3g}, above the quadrature floor")
    return suite_report("reproduction", violations, {"max_error": worst, "scale": scale, "seminorm": seminorm}, warnings)


def linearity_suite(state: VerificationState) -> Dict[str, Any]:
    """F(a f + b g) = a F(f) + b F(g) on sample points; graph seminorm is homogeneous"""
    pipeline = state["pipeline"]
    plan, cover, lacunae = pipeline["plan"], pipeline["cover"], pipeline["lacunae"]
    field = plan.field
    gamma_tilde = state["settings"].lacunae.gamma_tilde
    rng = np.random.default_rng([state.get("seed", 0), 3])
    other = JetField(field.points, rng.standard_normal(field.coeffs.shape), field.m, field.p)
    a, b = 2.5, -0.75
    mixed = field.combine(a, other, b)
    plans = [plan_extension(f, cover, lacunae, gamma_tilde) for f in (mixed, other)]

    X = _covered(plan, _samples(state, 64, 4))
    alphas = multi_indices(field.dim, field.m - 1)
    violations = []
    worst = 0.0
    try:
        base = evaluate(plan, X, alphas)
        lhs = evaluate(plans[0], X, alphas)
        rhs = evaluate(plans[1], X, alphas)
    except CollarError as e:
        return suite_report("linearity", [f"sample hit the collar: {e}"])
    for alpha in alphas:
        expected = a * base[alpha] + b * rhs[alpha]
        scale = float(np.max(np.abs(a * base[alpha]) + np.abs(b * rhs[alpha]), initial=0.0))
        if scale > 0:
            worst = max(worst, float(np.max(np.abs(lhs[alpha] - expected))) / scale)
    if worst > LINEARITY_TOL:
        violations.append(f"extension is not linear: relative defect {worst:.3g}")

    graph = pipeline["graph"]
    value = graph_seminorm(field, graph)
    scaled = graph_seminorm(field.scaled(a), graph)
    homogeneity = abs(scaled - abs(a) * value) / max(abs(a) * value, 1e-300)
    if value > 0 and homogeneity > LINEARITY_TOL:
        violations.append(f"graph seminorm is not homogeneous: relative defect {homogeneity:.3g}")
    return suite_report("linearity", violations, {"relative_defect": worst, "homogeneity_defect": homogeneity})


def trace_bounds_suite(state: VerificationState) -> Dict[str, Any]:
    """Graph seminorm below the brute-force trace norm at the graph's gamma; Phi equals brute force for m = 1"""
    pipeline = state["pipeline"]
    field, graph = pipeline["field"], pipeline["graph"]
    cfg = state["settings"].graph
    if field.size > cfg.bruteforce_max_points:
        return suite_report("trace_bounds", [], {"skipped": f"{field.size} points exceed the brute-force limit"})
    lower = graph_seminorm(field, graph)
    upper = trace_norm_bruteforce(field, gamma=graph.gamma, max_points=cfg.bruteforce_max_points)
    measured: Dict[str, Any] = {"graph": lower, "bruteforce": upper, "ratio": lower / upper if upper > 0 else 1.0}
    violations = []
    if lower > upper * (1.0 + CHAIN_TOL):
        violations.append(f"graph seminorm {lower:.6g} above brute force {upper:.6g} at gamma {graph.gamma:.6g}")
    if field.m == 1:
        phi = phi_m1(field.coeffs[:, 0], field.points, field.p, cfg.bruteforce_gamma, max_points=cfg.bruteforce_max_points)
        direct = trace_norm_bruteforce(field, gamma=cfg.bruteforce_gamma, max_points=cfg.bruteforce_max_points)
        measured["phi"] = phi.value
        if abs(phi.value - direct) > CHAIN_TOL * max(direct, 1.0):
            violations.append(f"Phi {phi.value:.6g} differs from brute force {direct:.6g}")
    return suite_report("trace_bounds", violations, measured)


def truncation_suite(state: VerificationState) -> Dict[str, Any]:
    """F_eps = F below delta/4 and F_eps = 0 from 20 delta on, on a cover that resolves delta"""
    settings = state["settings"]
    field = state["pipeline"]["field"]
    deep = run_extension_pipeline(field, truncation_settings(field, settings))
    cfg = settings.extension
    measured = truncation_check(deep["plan"], cfg.epsilon, cfg.delta_factor, TRUNCATION_SAMPLES, state.get("seed", 0))
    measured["depth"] = deep["cover"].depth_cap
    violations = []
    if measured["near_max_difference"] > TRUNCATION_TOL * max(measured["near_scale"], 1.0):
        violations.append(f"F_eps differs from F below delta/4 by {measured['near_max_difference']:.3g}")
    if measured["far_max_value"] > 0.0:
        violations.append(f"F_eps reaches {measured['far_max_value']:.3g} at distance 20 delta or more")
    warnings = [] if measured["near_checked"] else ["every sample below delta/4 fell into the collar"]
    return suite_report("truncation", violations, measured, warnings)


def off_window_suite(state: VerificationState) -> Dict[str, Any]:
    """Outside the window D^alpha F is the jet of the unbounded lacuna; order-m derivatives vanish"""
    plan = state["pipeline"]["plan"]
    window = plan.cover.window
    n, m = plan.field.dim, plan.field.m
    count = OFF_WINDOW_SAMPLES
    rng = np.random.default_rng([state.get("seed", 0), 5])
    # unit directions in the uniform norm, pushed past the window boundary
    u = rng.uniform(-1.0, 1.0, size=(count, n))
    u[np.arange(count), rng.integers(n, size=count)] = rng.choice([-1.0, 1.0], size=count)
    X = np.asarray(window.center) + window.half_side * rng.uniform(1.01, 4.0, size=count)[:, None] * u

    alphas = multi_indices(n, m)
    values = evaluate(plan, X, alphas)
    worst_jet, worst_top, scale = 0.0, 0.0, 0.0
    for alpha in alphas:
        if sum(alpha) == m:
            worst_top = max(worst_top, float(np.max(np.abs(values[alpha]))))
            continue
        expected = np.asarray([plan.far_poly.derivative(alpha, x) for x in X])
        worst_jet = max(worst_jet, float(np.max(np.abs(values[alpha] - expected))))
        scale = max(scale, float(np.max(np.abs(expected))))
    violations = []
    if worst_jet > REPRODUCTION_TOL * max(scale, 1.0):
        violations.append(f"F leaves the far jet outside the window by {worst_jet:.3g}")
    if worst_top > 0.0:
        violations.append(f"order-m derivative {worst_top:.3g} outside the window")
    measured = {"samples": count, "far_center": plan.far_index, "max_error": worst_jet, "max_order_m": worst_top}
    return suite_report("off_window", violations, measured)


def mcshane_suite(state: VerificationState) -> Dict[str, Any]:
    """McShane-type extensions of m = 1 data interpolate f; the Lipschitz one keeps its constant"""
    field = state["pipeline"]["field"]
    if field.m != 1:
        return suite_report("mcshane", [], {"skipped": f"values only (m = 1), got m = {field.m}"})
    settings = state["settings"]
    E, f = field.points, field.coeffs[:, 0]
    violations = []
    if math.isinf(field.p):
        lip = lipschitz_constant(E, f)
        metric = scaled_uniform_metric(lip)
        X = np.vstack([_samples(state, 64, 6), E])
        F = np.asarray([mcshane_extend(f, E, metric, x) for x in X])
        on_E = F[-len(E):]
        sampled = sampled_lipschitz(X, F)
        measured: Dict[str, Any] = {"method": "lipschitz", "lipschitz": lip, "sampled_lipschitz": sampled}
        if sampled > lip * (1.0 + 1e-6) + 1e-12:
            violations.append(f"sampled Lipschitz constant {sampled:.6g} above {lip:.6g}")
    else:
        cfg = settings.metric
        ext = l1p_extend(f, E, field.p, METRIC_RESOLUTION, cfg.sample_radius_cells, cfg.substeps, settings.whitney.inflate)
        on_E = ext(E)
        measured = {"method": "l1p", "q": ext.q, "density_max": float(ext.density.values.max())}
    trace = float(np.max(np.abs(on_E - f)))
    measured["trace_error"] = trace
    if trace > REPRODUCTION_TOL * max(float(np.max(np.abs(f))), 1.0):
        violations.append(f"extension misses f on E by {trace:.3g}")
    return suite_report("mcshane", violations, measured)


def metric_suite(state: VerificationState) -> Dict[str, Any]:
    """
    Metric transform of the sharp envelope of the values on E.

    The v_x / omega_x profiles at every point of E are exact checks; the
    factor-16 and comparison ratios of the sampled geodesic are warnings.
    """
    field = state["pipeline"]["field"]
    settings = state["settings"]
    cfg = settings.metric
    n = field.dim
    q = (n + field.p) / 2.0 if math.isfinite(field.p) else float(n + 1)
    box = root_window(field.points, settings.whitney.inflate)
    values = field.coeffs[:, field.alphas.index((0,) * n)]
    blank = DensityField.constant(box, METRIC_RESOLUTION, 0.0, q)
    h = DensityField(box, sharp_envelope(field.points, values, blank), q)
    sample = MetricSample.build(h, radius_cells=cfg.sample_radius_cells, substeps=cfg.substeps)

    rng = np.random.default_rng([state.get("seed", 0), 7])
    pairs = rng.integers(len(sample.sites), size=(METRIC_PAIRS, 2))
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    triples = rng.integers(len(sample.sites), size=(METRIC_PAIRS, 3))
    triples = triples[(triples[:, 0] != triples[:, 1]) & (triples[:, 1] != triples[:, 2]) & (triples[:, 0] != triples[:, 2])]
    factor = check_metric_factor(sample, pairs, cfg.slack)
    transform = check_vmt(sample, triples, cfg.slack)

    violations = []
    for i, x in enumerate(field.points):
        violations.extend(f"profile at point {i}: {v}" for v in profile_violations(v_and_omega(x, h, cfg.substeps)))
    measured = {
        "q": q,
        "sites": len(sample.sites),
        "metric_factor": factor["max_ratio"],
        "transform_b": transform["max_ratio_b"],
        "transform_c": transform["max_ratio_c"],
    }
    return suite_report("metric", violations, measured, factor["violations"] + transform["violations"])


SUITES = {
    "nets": nets_suite,
    "whitney_cover": cover_suite,
    "partition_of_unity": partition_suite,
    "lacunae": lacunae_suite,
    "graph": graph_suite,
    "reproduction": reproduction_suite,
    "linearity": linearity_suite,
    "trace_bounds": trace_bounds_suite,
    "truncation": truncation_suite,
    "off_window": off_window_suite,
    "mcshane": mcshane_suite,
    "metric": metric_suite,
}


def summarize(state: VerificationState) -> Dict[str, Any]:
    """Join node: a run passes when every exact suite is clean"""
    return {"passed": all(report["passed"] for report in state.get("suites", []))}


# ============================================================================
# Graph
# ============================================================================

def create_verification_graph():
    """Fan out to every suite, then join in summarize"""

    workflow = StateGraph(VerificationState)
    for name, check in SUITES.items():
        workflow.add_node(name, _guarded(name, check))
        workflow.add_edge(START, name)
    workflow.add_node("summarize", summarize)
    workflow.add_edge(list(SUITES), "summarize")
    workflow.add_edge("summarize", END)
    return workflow.compile()


verification_graph = create_verification_graph()


def run_verification(field: JetField, settings: Settings, seed: int = 0) -> Dict[str, Any]:
    """
    Build the full pipeline for field and run every invariant suite on it.

    Returns:
        {"passed", "suites": [{name, passed, violations, warnings, measured}], "timings"}
    """
    pipeline = run_extension_pipeline(field, settings)
    result = verification_graph.invoke(
        {"pipeline": pipeline, "settings": settings, "seed": seed, "suites": []}
    )
    suites = sorted(result.get("suites", []), key=lambda report: report["name"])
    for report in suites:
        for warning in report["warnings"]:
            logger.warning("%s: %s", report["name"], warning)
    return {
        "passed": bool(result.get("passed", False)),
        "suites": suites,
        "timings": pipeline.get("timings", {}),
    }


__all__ = ["SUITES", "VerificationState", "run_verification", "suite_report", "verification_graph"]
