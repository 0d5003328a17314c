# tests/test_graph_core.py
import numpy as np
import pytest

from graph_core import GraphError, IncidenceIndex, MultiGraph, read_graph, write_graph
from tests.conftest import path_graph


class TestMultiGraph:

    def test_insert_assigns_increasing_ids(self):
        g = MultiGraph(3)
        assert g.insert_edge(0, 1) == 0
        assert g.insert_edge(1, 2) == 1
        assert g.edge_count == 2

    def test_parallel_edges_allowed(self):
        g = MultiGraph(2)
        a = g.insert_edge(0, 1)
        b = g.insert_edge(1, 0)
        assert g.edges_between(0, 1) == [a, b]
        assert g.degree(0) == 2
        assert g.weighted_degree(0) == 2.0

    def test_self_loop_rejected(self):
        g = MultiGraph(3)
        with pytest.raises(GraphError):
            g.insert_edge(1, 1)

    def test_vertex_out_of_range(self):
        g = MultiGraph(3)
        with pytest.raises(GraphError):
            g.insert_edge(0, 3)

    def test_unweighted_rejects_other_weights(self):
        g = MultiGraph(3)
        with pytest.raises(GraphError):
            g.insert_edge(0, 1, 2.0)

    def test_weighted_bounds(self):
        g = MultiGraph(3, weighted=True)
        g.insert_edge(0, 1, 3.0 ** 10)
        with pytest.raises(GraphError):
            g.insert_edge(0, 2, 0.5)
        with pytest.raises(GraphError):
            g.insert_edge(0, 2, 3.0 ** 10 * 2)

    def test_free_weights_accept_fractions(self):
        g = MultiGraph(3, free_weights=True)
        g.insert_edge(0, 1, 1e-6)
        assert g.weighted_degree(1) == pytest.approx(1e-6)

    def test_delete_unknown_edge(self):
        g = MultiGraph(3)
        with pytest.raises(GraphError):
            g.delete_edge(7)

    def test_delete_updates_degrees_and_components(self):
        g = path_graph(4)
        assert g.same_component(0, 3)
        g.delete_edge(g.edges_between(1, 2)[0])
        assert not g.same_component(0, 3)
        assert g.degree(1) == 1
        assert g.component_size(0) == 2
        assert g.component_edge_count(3) == 1

    def test_laplacian_rows_sum_to_zero(self, weighted_graph):
        L = weighted_graph.laplacian()
        assert np.allclose(L.sum(axis=1), 0.0)
        assert L[1, 2] == -4.0

    def test_neighbors_ordered_by_edge_id(self):
        g = MultiGraph(4)
        g.insert_edge(0, 3)
        g.insert_edge(0, 1)
        g.insert_edge(2, 0)
        assert [nb for nb, _, _ in g.neighbors(0)] == [3, 1, 2]

    def test_copy_is_independent(self, path5):
        h = path5.copy()
        h.insert_edge(0, 4)
        assert path5.edge_count == 4
        assert h.edge_count == 5
        assert h.insert_edge(0, 2) == 5

    def test_weighted_random_neighbor_frequencies(self, rng):
        g = MultiGraph(3, weighted=True)
        g.insert_edge(0, 1, 1.0)
        g.insert_edge(0, 2, 3.0)
        draws = [g.weighted_random_neighbor(0, rng)[0] for _ in range(8000)]
        assert np.mean(np.array(draws) == 2) == pytest.approx(0.75, abs=0.03)

    def test_isolated_vertex_has_no_neighbor(self, rng):
        g = MultiGraph(2)
        with pytest.raises(GraphError):
            g.weighted_random_neighbor(0, rng)

    def test_read_write_round_trip(self, tmp_path, weighted_graph):
        path = tmp_path / "g.txt"
        write_graph(weighted_graph, str(path))
        g = read_graph(str(path))
        assert g.weighted
        assert np.array_equal(g.laplacian(), weighted_graph.laplacian())

    def test_read_graph_bad_edge_count(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3 2 unweighted\n0 1 1\n")
        with pytest.raises(GraphError):
            read_graph(str(path))


class TestIncidenceIndex:

    def test_prefix_sums_follow_slots(self):
        index = IncidenceIndex(capacity=2)
        for edge_id, w in enumerate([1.0, 2.0, 3.0, 4.0, 5.0]):
            index.add(edge_id, edge_id + 10, w)
        assert index.total() == 15.0
        assert index.prefix(2) == 3.0
        index.remove(1)
        assert index.total() == 13.0

    def test_find_respects_intervals(self):
        index = IncidenceIndex()
        index.add(0, 5, 1.0)
        index.add(1, 6, 2.0)
        assert index.find(0.5) == (5, 0)
        assert index.find(1.5) == (6, 1)

    def test_removed_slot_recycled(self):
        index = IncidenceIndex()
        index.add(0, 1, 1.0)
        index.add(1, 2, 1.0)
        index.remove(0)
        index.add(2, 3, 2.0)
        assert len(index) == 2
        assert index.total() == 3.0

    def test_temporarily_zeroed_restores_tree(self):
        index = IncidenceIndex()
        for edge_id in range(6):
            index.add(edge_id, edge_id, float(edge_id + 1))
        before = index.total()
        with index.temporarily_zeroed([0, 2, 5]):
            assert index.total() == before - 1 - 3 - 6
            for _ in range(20):
                assert index.sample(np.random.default_rng(0).random())[1] not in (0, 2, 5)
        assert index.total() == before
        assert index.weight(5) == 6.0
