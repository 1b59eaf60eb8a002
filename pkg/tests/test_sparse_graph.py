import numpy as np
import pytest

from sobolev_jets.core.geometry import Cube
from sobolev_jets.core.jets import Poly, field_from_polynomial
from sobolev_jets.core.sparse_graph import (
    Edge,
    SparseGraph,
    geodesic_stretch,
    graph_geodesic,
    graph_seminorm,
    graph_statistics,
    to_dot,
    verify_sparse,
)
from sobolev_jets.errors import DisconnectedGraphError, ExponentError


class TestBuiltGraphs:
    def test_singleton_has_no_edges(self, singleton_field, settings, build):
        graph = build(singleton_field, settings, "graph")["graph"]
        assert graph.edges == []
        assert graph_seminorm(singleton_field, graph) == 0.0

    def test_two_points_share_one_edge(self, two_point_field, settings, build):
        graph = build(two_point_field, settings, "graph")["graph"]
        assert [(e.u, e.v) for e in graph.edges] == [(0, 1)]
        assert verify_sparse(graph)["violations"] == []
        assert graph.is_connected()

    def test_two_point_seminorm(self, two_point_field, settings, build):
        graph = build(two_point_field, settings, "graph")["graph"]
        assert graph_seminorm(two_point_field, graph) == pytest.approx(1.0)
        assert graph_seminorm(two_point_field, graph, float("inf")) == pytest.approx(1.0)

    def test_exponent_must_exceed_dimension(self, two_point_field, settings, build):
        graph = build(two_point_field, settings, "graph")["graph"]
        with pytest.raises(ExponentError):
            graph_seminorm(two_point_field, graph, 1.0)

    def test_random_planar_graph(self, make_field, settings, build):
        field = make_field(seed=5, n=2, m=2, points=7)
        graph = build(field, settings, "graph")["graph"]
        assert verify_sparse(graph)["violations"] == []
        stats = graph_statistics(graph)
        assert stats["connected"]
        assert stats["geodesic_stretch"] >= 1.0

    def test_polynomial_jets_have_zero_seminorm(self, settings, build):
        G = Poly.from_dict((0.0, 0.0), {(0, 0): 1.0, (1, 0): -2.0, (1, 1): 0.5})
        points = np.random.default_rng(9).uniform(-1, 1, size=(6, 2))
        field = field_from_polynomial(G, points, 3)
        graph = build(field, settings, "graph")["graph"]
        assert graph_seminorm(field, graph) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("c", [-3.0, 0.5, 2.0])
    def test_homogeneous(self, make_field, settings, build, c):
        field = make_field(seed=2, n=1, m=2, points=5)
        graph = build(field, settings, "graph")["graph"]
        assert graph_seminorm(field.scaled(c), graph) == pytest.approx(abs(c) * graph_seminorm(field, graph))


class TestCertificates:
    def test_valid_edge(self):
        g = SparseGraph(np.asarray([[0.0], [1.0]]), [Edge(0, 1, Cube((0.5,), 0.25))], gamma=3.0)
        assert verify_sparse(g)["violations"] == []

    def test_overlapping_certificates(self):
        points = np.asarray([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        edges = [Edge(0, 1, Cube((0.5, 0.0), 0.5)), Edge(0, 2, Cube((0.0, 0.5), 0.5))]
        violations = verify_sparse(SparseGraph(points, edges, gamma=3.0))["violations"]
        assert any("certificate interiors overlap" in v for v in violations)

    def test_oversized_certificate(self):
        g = SparseGraph(np.asarray([[0.0], [1.0]]), [Edge(0, 1, Cube((0.5,), 2.0))], gamma=1.0)
        assert any("diam K > gamma |u - v|" in v for v in verify_sparse(g)["violations"])

    def test_far_vertex(self):
        g = SparseGraph(np.asarray([[0.0], [10.0]]), [Edge(0, 1, Cube((0.5,), 0.5))], gamma=3.0)
        assert any("outside gamma*K" in v for v in verify_sparse(g)["violations"])

    def test_loops_and_duplicates(self):
        points = np.asarray([[0.0], [1.0]])
        edges = [Edge(0, 0, Cube((0.0,), 0.1)), Edge(0, 1, Cube((0.5,), 0.1)), Edge(1, 0, Cube((0.7,), 0.1))]
        violations = verify_sparse(SparseGraph(points, edges, gamma=10.0))["violations"]
        assert any("loop" in v for v in violations)
        assert any("duplicate" in v for v in violations)


class TestGeodesics:
    @pytest.fixture
    def path_graph(self):
        points = np.asarray([[0.0], [1.0], [3.0]])
        edges = [Edge(0, 1, Cube((0.5,), 0.25)), Edge(1, 2, Cube((2.0,), 0.25))]
        return SparseGraph(points, edges, gamma=10.0)

    def test_same_vertex(self, path_graph):
        assert graph_geodesic(path_graph, 1, 1) == ([1], 0.0)

    def test_path(self, path_graph):
        path, length = graph_geodesic(path_graph, 0, 2)
        assert path == [0, 1, 2]
        assert length == pytest.approx(3.0)
        assert geodesic_stretch(path_graph) == pytest.approx(1.0)

    def test_disconnected(self):
        g = SparseGraph(np.asarray([[0.0], [1.0], [5.0]]), [Edge(0, 1, Cube((0.5,), 0.25))], gamma=3.0)
        assert not g.is_connected()
        with pytest.raises(DisconnectedGraphError):
            graph_geodesic(g, 0, 2)

    def test_dot_export(self, path_graph):
        text = to_dot(path_graph)
        assert text.startswith("graph Gamma_E {")
        assert "0 -- 1" in text and "1 -- 2" in text
