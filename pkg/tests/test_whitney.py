import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobolev_jets.core import whitney
from sobolev_jets.core.geometry import Cube
from sobolev_jets.core.lacunae import lacuna_statistics
from sobolev_jets.core.sparse_graph import graph_statistics
from sobolev_jets.core.whitney import (
    auto_depth,
    cover_statistics,
    cover_violations,
    packing_bound,
    partition_check,
    pou_eval,
    star_equivalence_violations,
    touching,
    whitney_decompose,
)
from sobolev_jets.errors import CollarError, GeometryError


@pytest.fixture(scope="module")
def singleton_cover():
    return whitney_decompose([[0.0]])


class TestSingletonCover:
    def test_window_and_depth(self, singleton_cover):
        assert singleton_cover.window == Cube((0.0,), 2.0)
        assert singleton_cover.depth_cap == 8

    def test_one_cube_per_side_and_level(self, singleton_cover):
        # levels 2..8 on each side of the point
        assert len(singleton_cover) == 14
        assert sorted(set(singleton_cover.levels.tolist())) == list(range(2, 9))
        assert len(singleton_cover.collar_centers) == 2

    def test_invariants(self, singleton_cover):
        assert cover_violations(singleton_cover) == []
        assert star_equivalence_violations(singleton_cover) == []

    def test_touching_sets(self, singleton_cover):
        lo, hi = singleton_cover.levels.min(), singleton_cover.levels.max()
        for K in range(len(singleton_cover)):
            T = touching(singleton_cover, K)
            assert K in T
            assert len(T) in (2, 3)
            if lo < singleton_cover.levels[K] < hi:
                assert len(T) == 3
        assert cover_statistics(singleton_cover)["max_touching"] == 3

    def test_touching_rejects_bad_index(self, singleton_cover):
        with pytest.raises(IndexError):
            touching(singleton_cover, len(singleton_cover))

    def test_collar_point(self, singleton_cover):
        with pytest.raises(CollarError) as info:
            pou_eval(singleton_cover, 0, (0,), [0.001])
        assert info.value.distance == pytest.approx(0.001)

    def test_bump_vanishes_outside_star(self, singleton_cover):
        far = int(np.argmax(singleton_cover.half_sides))
        x = -singleton_cover.centers[far]
        assert pou_eval(singleton_cover, far, (0,), x) == 0.0


class TestPackingBound:
    def test_ring_counts(self):
        assert [packing_bound(n) for n in (1, 2, 3)] == [3, 21, 153]

    def test_crowded_cube_is_a_violation(self, singleton_cover, monkeypatch):
        monkeypatch.setattr(whitney, "packing_bound", lambda dim: 2)
        found = cover_violations(singleton_cover)
        assert found
        assert all("packing bound" in v for v in found)

    @pytest.mark.parametrize("seed", range(4))
    def test_planar_instances_stay_within_bounds(self, make_field, settings, build, seed):
        state = build(make_field(seed, n=2, m=1, points=6), settings)
        cover = state["cover"]
        assert cover_statistics(cover)["max_touching"] <= packing_bound(2)
        assert cover_violations(cover) == []
        lacunae = lacuna_statistics(state["lacunae"], state["contacts"], cover)
        assert lacunae["max_fiber"] <= 64
        assert lacunae["max_contacts"] <= 64
        assert graph_statistics(state["graph"])["max_degree"] <= 64


class TestDecomposition:
    def test_rejects_small_inflation(self):
        with pytest.raises(GeometryError):
            whitney_decompose([[0.0], [1.0]], inflate=2.0)

    def test_rejects_window_missing_points(self):
        with pytest.raises(GeometryError):
            whitney_decompose([[0.0], [5.0]], window=Cube((0.0,), 1.0))

    def test_rejects_empty_set(self):
        with pytest.raises(GeometryError):
            whitney_decompose(np.zeros((0, 2)))

    def test_auto_depth_tracks_separation(self):
        points = np.asarray([[0.0], [1.0]])
        assert auto_depth(points, 2.0, 14) == 8
        assert auto_depth(points, 2.0, 5) == 5

    def test_neighbor_ratios(self):
        cover = whitney_decompose([[0.0, 0.0], [1.0, 0.5], [0.2, 0.9]], depth_cap=7)
        stats = cover_statistics(cover)
        assert stats["min_neighbor_ratio"] >= 0.25
        assert stats["max_neighbor_ratio"] <= 4.0
        assert cover_violations(cover) == []

    def test_to_dict(self, singleton_cover):
        data = singleton_cover.to_dict()
        assert len(data["cubes"]) == len(singleton_cover)
        assert data["collar"]["cubes"] == 2


class TestPartitionOfUnity:
    def test_sums_to_one_in_one_dimension(self, singleton_cover):
        samples = np.linspace(-1.99, 1.99, 301).reshape(-1, 1)
        report = partition_check(singleton_cover, samples, 2)
        assert report["max_sum_error"] < 1e-9
        assert report["max_scaled_derivative_sum"] < 1e-6
        assert report["support_violations"] == 0

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=5, deadline=None)
    def test_property_sums_to_one_in_two_dimensions(self, seed):
        rng = np.random.default_rng(seed)
        cover = whitney_decompose(rng.uniform(-1, 1, size=(4, 2)), depth_cap=6)
        samples = rng.uniform(cover.window.lower, cover.window.upper, size=(60, 2))
        report = partition_check(cover, samples, 1)
        assert report["max_sum_error"] < 1e-9
        assert report["support_violations"] == 0

    def test_scaled_derivatives_are_scale_invariant(self):
        small = whitney_decompose([[0.0], [1.0]], depth_cap=6)
        large = whitney_decompose([[0.0], [2.0]], depth_cap=6)
        assert len(small) == len(large)
        for Q in range(0, len(small), 3):
            x = small.centers[Q] + 0.95 * small.half_sides[Q]
            lhs = pou_eval(small, Q, (1,), x) * small.diams[Q]
            rhs = pou_eval(large, Q, (1,), 2.0 * x) * large.diams[Q]
            assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-9)
