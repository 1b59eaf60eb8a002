import numpy as np
import pytest

from sobolev_jets.core.extension import (
    evaluate,
    extend_eval,
    extend_eval_wmp,
    grid_evaluation,
    reproduction_error,
    truncation_check,
    truncation_delta,
    truncation_depth,
    window_grid,
)
from sobolev_jets.core.whitney import root_window
from sobolev_jets.flows.extension_flow import truncation_settings
from sobolev_jets.errors import CollarError


@pytest.fixture
def two_point_plan(two_point_field, settings, build):
    return build(two_point_field, settings)["plan"]


class TestSingletonExtension:
    @pytest.fixture
    def plan(self, singleton_field, settings, build):
        return build(singleton_field, settings)["plan"]

    @pytest.mark.parametrize("x", [-1.5, -0.2, 0.2, 0.45, 2.0, 5.0, -40.0])
    def test_extension_is_the_single_jet(self, plan, singleton_field, x):
        P = singleton_field.poly(0)
        assert extend_eval(plan, [x], (0,)) == pytest.approx(P([x]), abs=1e-12)
        assert extend_eval(plan, [x], (1,)) == pytest.approx(-2.0, abs=1e-9)
        assert extend_eval(plan, [x], (2,)) == pytest.approx(0.0, abs=1e-6)

    def test_values_on_E(self, plan):
        assert extend_eval(plan, [0.3], (0,)) == 1.5
        assert extend_eval(plan, [0.3], (1,)) == -2.0

    def test_order_limits(self, plan):
        with pytest.raises(ValueError):
            extend_eval(plan, [0.3], (2,))
        with pytest.raises(ValueError):
            extend_eval(plan, [1.0], (4,))

    def test_grid(self, plan):
        frame = grid_evaluation(plan, 4)
        assert list(frame.columns) == ["x0", "alpha", "value"]
        assert len(frame) == 8
        assert sorted(set(frame["alpha"])) == ["0", "1"]


class TestTwoPointExtension:
    def test_interpolates(self, two_point_plan):
        assert extend_eval(two_point_plan, [0.0], (0,)) == 0.0
        assert extend_eval(two_point_plan, [1.0], (0,)) == 1.0

    def test_collar(self, two_point_plan):
        with pytest.raises(CollarError):
            extend_eval(two_point_plan, [1e-4], (0,))

    def test_far_field_is_the_unbounded_jet(self, two_point_plan, two_point_field):
        far = two_point_field.poly(two_point_plan.far_index)
        assert extend_eval(two_point_plan, [30.0], (0,)) == pytest.approx(far([30.0]))

    def test_continuous_across_cube_faces(self, two_point_plan):
        cover = two_point_plan.cover
        for Q in range(0, len(cover), 5):
            face = cover.centers[Q] + cover.half_sides[Q]
            if not cover.in_window(face + 1e-9) or cover.owner(face + 1e-10) is None:
                continue
            inner = extend_eval(two_point_plan, face - 1e-10, (0,))
            outer = extend_eval(two_point_plan, face + 1e-10, (0,))
            assert inner == pytest.approx(outer, abs=1e-6)

    def test_batch_matches_pointwise(self, two_point_plan):
        X = np.asarray([[-1.2], [0.4], [0.75], [2.2]])
        batch = evaluate(two_point_plan, X, [(0,), (1,)])
        for i, x in enumerate(X):
            assert batch[(0,)][i] == pytest.approx(extend_eval(two_point_plan, x, (0,)))
            assert batch[(1,)][i] == pytest.approx(extend_eval(two_point_plan, x, (1,)))

    def test_window_grid(self, two_point_plan):
        grid = window_grid(two_point_plan, 9)
        assert grid.shape == (9, 1)
        assert grid[0, 0] == pytest.approx(-1.5)
        assert grid[-1, 0] == pytest.approx(2.5)


class TestPolynomialReproduction:
    def test_linear_field(self, linear_field, settings, build):
        plan = build(linear_field, settings)["plan"]
        X = np.linspace(-2.0, 2.5, 37).reshape(-1, 1)
        worst, scale = reproduction_error(plan, linear_field.generator, X)
        assert scale > 0
        assert worst < 1e-9

    def test_planar_quadratic(self, make_field, settings, build):
        field = make_field(seed=4, n=2, m=3, points=5, polynomial=True)
        plan = build(field, settings)["plan"]
        X = np.random.default_rng(0).uniform(-1, 1, size=(30, 2))
        worst, scale = reproduction_error(plan, field.generator, X)
        assert worst < 1e-7 * max(scale, 1.0)


class TestTruncatedExtension:
    @pytest.fixture
    def plan(self, two_point_field, settings, build):
        return build(two_point_field, settings.with_overrides({"whitney.depth_cap": 12}))["plan"]

    def test_delta(self):
        assert truncation_delta(2.0) == pytest.approx(2e-5)
        with pytest.raises(ValueError):
            truncation_delta(0.0)

    def test_near_E_matches_F(self, plan):
        x = [0.01]
        assert extend_eval_wmp(plan, x, (0,), 1.0, 0.05) == pytest.approx(extend_eval(plan, x, (0,)))

    @pytest.mark.parametrize("x", [-1.2, 3.5])
    def test_vanishes_away_from_E(self, plan, x):
        assert extend_eval_wmp(plan, [x], (0,), 1.0, 0.05) == 0.0

    def test_keeps_values_on_E(self, plan):
        assert extend_eval_wmp(plan, [1.0], (0,), 1.0, 0.05) == 1.0


class TestTruncationAtDefaultDelta:
    @pytest.fixture
    def deep_plan(self, two_point_field, settings, build):
        return build(two_point_field, truncation_settings(two_point_field, settings))["plan"]

    def test_depth_resolves_delta(self, two_point_field, settings):
        window = root_window(two_point_field.points, settings.whitney.inflate)
        assert truncation_depth(window, 1e-5) == 25
        assert truncation_settings(two_point_field, settings).whitney.depth_cap == 25

    def test_deeper_explicit_cap_is_kept(self, two_point_field, settings):
        deeper = settings.with_overrides({"whitney.depth_cap": 30})
        assert truncation_settings(two_point_field, deeper) is deeper

    def test_sampled_points(self, deep_plan):
        report = truncation_check(deep_plan, 1.0)
        assert report["delta"] == pytest.approx(1e-5)
        assert report["near_checked"] > 0
        assert report["far_checked"] > 0
        assert report["near_max_difference"] == 0.0
        assert report["far_max_value"] == 0.0

    def test_shallow_cover_vanishes_on_covered_points(self, two_point_plan):
        X = np.asarray([[0.3], [0.5], [-1.0]])
        values = evaluate(two_point_plan, X, [(0,)], truncation_delta(1.0))
        assert np.all(values[(0,)] == 0.0)
