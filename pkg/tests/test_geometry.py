import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobolev_jets.core.geometry import Cube, build_dyadic_nets, dilate, min_separation, uniform_dist
from sobolev_jets.errors import DimensionMismatchError, GeometryError

coords = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


class TestUniformDist:
    def test_points(self):
        assert uniform_dist([0.0, 0.0], [3.0, 1.0]) == 3.0

    def test_cubes(self):
        assert uniform_dist(Cube((0.0, 0.0), 1.0), Cube((5.0, 0.0), 1.0)) == pytest.approx(3.0)

    def test_empty_set_is_infinitely_far(self):
        assert math.isinf(uniform_dist([0.0, 0.0], []))

    def test_touching_cubes_are_at_distance_zero(self):
        assert uniform_dist(Cube((0.0,), 1.0), Cube((2.0,), 1.0)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            uniform_dist([0.0, 0.0], [1.0, 2.0, 3.0])

    def test_large_point_set_matches_pairwise(self):
        rng = np.random.default_rng(3)
        cloud = rng.uniform(-1, 1, size=(100, 2))
        x = np.asarray([3.0, 0.5])
        expected = float(np.min(np.max(np.abs(cloud - x), axis=1)))
        assert uniform_dist(x, cloud) == pytest.approx(expected)

    @given(st.lists(coords, min_size=2, max_size=2), st.lists(coords, min_size=2, max_size=2))
    @settings(max_examples=50)
    def test_property_symmetric(self, a, b):
        assert uniform_dist(a, b) == uniform_dist(b, a)

    @given(
        st.lists(coords, min_size=2, max_size=2),
        st.lists(coords, min_size=2, max_size=2),
        st.lists(coords, min_size=2, max_size=2),
    )
    @settings(max_examples=50)
    def test_property_triangle_inequality(self, a, b, c):
        assert uniform_dist(a, c) <= uniform_dist(a, b) + uniform_dist(b, c) + 1e-9


class TestCube:
    def test_dilate(self):
        assert dilate(Cube((0.0, 0.0), 1.0), 9 / 8) == Cube((0.0, 0.0), 1.125)
        assert dilate(Cube((1.0, 2.0), 0.5), 90) == Cube((1.0, 2.0), 45.0)

    def test_dilate_by_one_is_identity(self):
        Q = Cube((0.25, -1.0), 0.75)
        assert dilate(Q, 1.0) == Q

    @pytest.mark.parametrize("factor", [0.0, -2.0])
    def test_dilate_rejects_nonpositive_factor(self, factor):
        with pytest.raises(GeometryError):
            dilate(Cube((0.0,), 1.0), factor)
        with pytest.raises(ValueError):
            dilate(Cube((0.0,), 1.0), factor)

    def test_closed_and_open_intersection(self):
        Q, K = Cube((0.0,), 1.0), Cube((2.0,), 1.0)
        assert Q.intersects(K)
        assert not Q.interiors_overlap(K)
        assert Q.interiors_overlap(Cube((1.5,), 1.0))

    def test_touches_boundary(self):
        window = Cube((0.0, 0.0), 4.0)
        assert Cube((3.0, 0.0), 1.0).touches_boundary(window)
        assert not Cube((0.0, 0.0), 1.0).touches_boundary(window)
        assert not Cube((4.0, 0.0), 1.0).touches_boundary(window)

    def test_rejects_bad_half_side(self):
        with pytest.raises(GeometryError):
            Cube((0.0,), 0.0)


class TestDyadicNets:
    def test_two_points(self):
        nets = build_dyadic_nets([[0.0], [1.0]])
        assert nets.i_min == 0
        assert sorted(nets.level(0).tolist()) == [0, 1]
        assert nets.level(-3).tolist() == nets.level(0).tolist()
        assert nets.level(1).tolist() == [0]
        assert nets.level(nets.i_max).tolist() == [0]

    def test_singleton(self):
        nets = build_dyadic_nets([[2.0, 3.0]])
        for i in range(-4, 5):
            assert nets.level(i).tolist() == [0]
        assert nets.check() == []

    def test_integer_grid_passes_checks(self):
        nets = build_dyadic_nets(np.arange(8, dtype=float).reshape(-1, 1))
        assert nets.check() == []
        level_one = nets.points[nets.level(1)]
        assert min_separation(level_one) >= 2.0

    def test_repeated_points_are_rejected(self):
        with pytest.raises(GeometryError):
            build_dyadic_nets([[0.0, 0.0], [0.0, 0.0]])

    @given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(min_value=1, max_value=3))
    @settings(max_examples=25, deadline=None)
    def test_property_nested_separated_nets(self, seed, dim):
        points = np.random.default_rng(seed).uniform(-1, 1, size=(12, dim))
        nets = build_dyadic_nets(points)
        assert nets.check() == []
        assert len(nets.level(nets.i_max)) == 1
