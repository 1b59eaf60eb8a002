import math

import numpy as np
import pytest

from sobolev_jets.core.geometry import Cube
from sobolev_jets.core.jets import JetField
from sobolev_jets.core.quadrature import QuadratureSpec
from sobolev_jets.core.seminorms import (
    best_family,
    certificate_cube,
    oscillation_sum,
    phi_m1,
    phi_psi_m1,
    random_cube_family,
    sharp_max_eval,
    sharp_max_lp,
    sobolev_seminorm,
    trace_norm_bruteforce,
    wmp_norm_parts,
    wmp_numerical_norm,
)
from sobolev_jets.core.sparse_graph import graph_seminorm
from sobolev_jets.core.whitney import whitney_decompose
from sobolev_jets.errors import CapacityError, ExponentError, GeometryError
from sobolev_jets.flows.extension_flow import truncation_settings


class TestBruteForce:
    def test_two_points(self, two_point_field):
        assert trace_norm_bruteforce(two_point_field) == pytest.approx(1.0)

    def test_polynomial_field(self, make_field):
        field = make_field(seed=3, n=1, m=2, points=6, polynomial=True)
        assert trace_norm_bruteforce(field) == pytest.approx(0.0, abs=1e-9)

    def test_monotone_in_gamma(self, make_field):
        field = make_field(seed=8, n=1, m=1, points=6)
        assert trace_norm_bruteforce(field, gamma=1.0) <= trace_norm_bruteforce(field, gamma=3.0) + 1e-12

    def test_infinite_exponent_takes_the_largest_pair(self, make_field):
        field = make_field(seed=1, n=1, m=1, points=5).with_exponent(float("inf"))
        value, family = best_family(field, float("inf"), 3.0)
        assert len(family) == 1
        assert trace_norm_bruteforce(field) == pytest.approx(value)

    def test_family_certificates_are_disjoint(self, make_field):
        field = make_field(seed=6, n=2, m=1, points=6)
        _, family = best_family(field, field.p, 3.0)
        cubes = [certificate_cube(field.points, x, y, 3.0) for x, y in family]
        for i in range(len(cubes)):
            for j in range(i + 1, len(cubes)):
                assert not cubes[i].interiors_overlap(cubes[j])

    def test_capacity(self, make_field):
        with pytest.raises(CapacityError):
            trace_norm_bruteforce(make_field(seed=0, n=1, m=1, points=9))

    def test_exponent(self, two_point_field):
        with pytest.raises(ExponentError):
            trace_norm_bruteforce(two_point_field, p=0.5)


class TestSharpMaximalFunction:
    @pytest.mark.parametrize("x", [-2.0, 0.25, 0.5, 3.0])
    def test_two_points(self, two_point_field, x):
        assert sharp_max_eval(two_point_field, [x]) == pytest.approx(1.0 / (abs(x) + abs(x - 1.0)))

    def test_lp_norm_over_window(self, two_point_field):
        estimate = sharp_max_lp(two_point_field, QuadratureSpec(order=8))
        # 1 on [0, 1] plus 3/8 on each side of the window [-1.5, 2.5]
        assert estimate.details["window"] == pytest.approx(1.75, rel=1e-4)
        assert estimate.value == pytest.approx(math.sqrt(1.75), rel=1e-4)
        assert estimate.error_bar > 0

    def test_singleton_is_zero(self, singleton_field):
        assert sharp_max_lp(singleton_field, QuadratureSpec()).value == 0.0


class TestPhiPsi:
    E = [[0.0], [1.0]]

    def test_two_points(self):
        cover = whitney_decompose(self.E)
        phi, psi = phi_psi_m1([0.0, 1.0], self.E, 2.0, QuadratureSpec(order=8), cover=cover)
        assert phi.value == pytest.approx(1.0)
        assert phi.details["method"] == "bruteforce"
        assert psi.details["window"] == pytest.approx(2.0 * math.atan(4.0), abs=1e-5)
        assert psi.details["tail"] == pytest.approx(2.0 / 3.0, rel=1e-6)
        assert psi.details["tail"] >= math.pi - 2.0 * math.atan(4.0)

    def test_constant_values(self):
        phi, psi = phi_psi_m1([2.0, 2.0], self.E, 3.0, QuadratureSpec())
        assert phi.value == 0.0
        assert psi.value == 0.0

    def test_needs_finite_exponent(self):
        with pytest.raises(ExponentError):
            phi_psi_m1([0.0, 1.0], self.E, float("inf"), QuadratureSpec())


class TestLowerBoundChain:
    @pytest.mark.parametrize("seed", range(6))
    def test_graph_below_bruteforce_at_graph_gamma(self, make_field, settings, build, seed):
        field = make_field(seed=seed, n=1, m=1, points=6)
        graph = build(field, settings)["graph"]
        assert graph_seminorm(field, graph) <= trace_norm_bruteforce(field, gamma=graph.gamma) * (1.0 + 1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_phi_is_the_bruteforce_value(self, make_field, seed):
        field = make_field(seed=seed, n=1, m=1, points=5)
        phi = phi_m1(field.coeffs[:, 0], field.points, field.p)
        assert phi.details["method"] == "bruteforce"
        assert phi.value == trace_norm_bruteforce(field)

    def test_phi_beyond_the_limit_sums_graph_edges(self, make_field, settings, build):
        field = make_field(seed=1, n=1, m=1, points=6)
        graph = build(field, settings)["graph"]
        phi = phi_m1(field.coeffs[:, 0], field.points, field.p, graph.gamma, graph, max_points=4)
        assert phi.details["method"] == "graph_lower_bound"
        assert phi.value == pytest.approx(graph_seminorm(field, graph))
        assert phi.value <= trace_norm_bruteforce(field, gamma=graph.gamma) * (1.0 + 1e-9)

    def test_phi_without_graph_beyond_the_limit(self, make_field):
        field = make_field(seed=1, n=1, m=1, points=6)
        with pytest.raises(CapacityError):
            phi_m1(field.coeffs[:, 0], field.points, field.p, max_points=4)


class TestSobolevSeminorm:
    def test_reproduced_polynomial(self, linear_field, settings, build):
        plan = build(linear_field, settings)["plan"]
        assert sobolev_seminorm(plan).value < 1e-8

    def test_two_points_is_positive(self, two_point_field, settings, build):
        plan = build(two_point_field, settings)["plan"]
        estimate = sobolev_seminorm(plan, quad=QuadratureSpec(order=4))
        assert estimate.value > 0
        assert estimate.details["cubes"] == len(plan.cover)


class TestOscillationSum:
    cubes = [Cube((0.25,), 0.25), Cube((0.75,), 0.25)]
    points = [[0.5], [0.5]]

    def test_linear_function(self):
        assert oscillation_sum(lambda X: 3.0 * X[:, 0], self.cubes, self.points, 2.0) == pytest.approx(2.25)

    def test_constant_function(self):
        assert oscillation_sum(lambda X: np.ones(len(X)), self.cubes, self.points, 2.0) == 0.0

    def test_overlapping_cubes(self):
        with pytest.raises(GeometryError):
            oscillation_sum(lambda X: X[:, 0], [Cube((0.25,), 0.25), Cube((0.4,), 0.25)], self.points, 2.0)

    def test_unequal_cubes(self):
        with pytest.raises(GeometryError):
            oscillation_sum(lambda X: X[:, 0], [Cube((0.25,), 0.25), Cube((1.0,), 0.5)], self.points, 2.0)

    def test_point_outside_cube(self):
        with pytest.raises(GeometryError):
            oscillation_sum(lambda X: X[:, 0], self.cubes, [[0.9], [0.5]], 2.0)

    def test_random_family_is_admissible(self):
        rng = np.random.default_rng(12)
        cubes, points = random_cube_family(rng, Cube((0.0, 0.0), 1.0), 6, 0.125)
        assert len(cubes) == 6
        assert oscillation_sum(lambda X: X[:, 0] + X[:, 1], cubes, points, 3.0) >= 0.0


class TestWmpParts:
    def _parts(self, field, settings, build, epsilon):
        state = build(field, settings)
        return wmp_norm_parts(field, epsilon, None, state["lacunae"], state["cover"], state["graph"])

    def test_zero_field(self, two_point_field, settings, build):
        zero = two_point_field.scaled(0.0)
        parts = self._parts(zero, settings, build, 1.0)
        assert (parts.n_flat, parts.lacuna_sum, parts.point_sum, parts.total) == (0.0, 0.0, 0.0, 0.0)

    def test_large_scale_recovers_bruteforce(self, two_point_field, settings, build):
        parts = self._parts(two_point_field, settings, build, 100.0)
        assert parts.n_flat == pytest.approx(trace_norm_bruteforce(two_point_field))
        assert parts.method == "bruteforce"

    def test_small_scale_drops_long_pairs(self, two_point_field, settings, build):
        assert self._parts(two_point_field, settings, build, 0.5).n_flat == 0.0

    def test_point_sum(self, two_point_field, settings, build):
        parts = self._parts(two_point_field, settings, build, 1.0)
        assert parts.point_sum == pytest.approx(math.sqrt(0.5))
        assert parts.total == pytest.approx(parts.n_flat + parts.lacuna_sum + parts.point_sum)

    def test_graph_fallback_for_large_sets(self, make_field, settings, build):
        field = make_field(seed=2, n=1, m=1, points=10)
        parts = self._parts(field, settings, build, 0.5)
        assert parts.method == "graph"
        assert parts.n_flat >= 0.0

    def test_rejects_nonpositive_scale(self, two_point_field, settings, build):
        with pytest.raises(ValueError):
            self._parts(two_point_field, settings, build, 0.0)


class TestWmpRatioWindow:
    def test_numerical_norm_tracks_the_parts(self, make_field, settings, build):
        ratios = []
        for seed in range(4):
            field = make_field(seed=seed, n=1, m=1, points=4)
            state = build(field, truncation_settings(field, settings))
            parts = wmp_norm_parts(field, 1.0, None, state["lacunae"], state["cover"], state["graph"])
            numerical = wmp_numerical_norm(state["plan"], 1.0, quad=QuadratureSpec(order=4))
            assert parts.total > 0
            assert numerical.details["seminorm"] > 0
            ratios.append(numerical.value / parts.total)
        assert all(math.isfinite(r) and r > 0 for r in ratios)
        assert max(ratios) / min(ratios) < 1e3

def test_exponent_override_on_fields():
    field = JetField([[0.0], [1.0]], [[0.0], [1.0]], 1, 2.0)
    assert trace_norm_bruteforce(field, p=4.0) == pytest.approx(1.0)
