# tests/test_projection_dynamic.py
import numpy as np
import pytest

from exact_oracle import NotInRangeError
from graph_core import GraphError, MultiGraph
from generators import random_bounded_degree_graph, random_demand
from projection_dynamic import (
    DegreeBoundError, check_degree, check_range, contracted_projection, degree_identity, exact_projected,
    expected_load, proj_add_terminal, proj_change, proj_edge_update, proj_initialize, proj_query,
    projection_budget, projection_error, promotion_error_direction, top_demand_vertices,
)
from schur_dynamic import NeedsRebuild
from tests.conftest import path_graph


def _state(g, b, S, epsilon=1e-8, budget_scale=1e6):
    return proj_initialize(g, b, S, beta=0.5, epsilon=epsilon, max_degree=g.max_degree(),
                           budget_scale=budget_scale)


class TestHelpers:

    def test_top_demand_ties_by_vertex(self):
        assert top_demand_vertices([1.0, -3.0, 3.0, 0.0], 2) == [1, 2]
        assert top_demand_vertices([1.0, -3.0, 3.0, 0.0], 0) == []
        assert top_demand_vertices([0.0, 0.0, 0.0], 2) == [0, 1]

    def test_check_range(self, path5):
        check_range(path5, np.array([1.0, 0, 0, 0, -1.0]))
        with pytest.raises(NotInRangeError):
            check_range(path5, np.array([1.0, 0, 0, 0, 0]))

    def test_check_range_per_component(self):
        g = MultiGraph(4)
        g.insert_edge(0, 1)
        g.insert_edge(2, 3)
        check_range(g, np.array([1.0, -1.0, 2.0, -2.0]))
        with pytest.raises(NotInRangeError):
            check_range(g, np.array([1.0, 0.0, 0.0, -1.0]))

    def test_degree_bound(self):
        star = MultiGraph(8)
        for leaf in range(1, 8):
            star.insert_edge(0, leaf)
        check_degree(star, 7)
        with pytest.raises(DegreeBoundError):
            check_degree(star, 6)
        b = np.zeros(8)
        b[1], b[2] = 1.0, -1.0
        with pytest.raises(DegreeBoundError):
            proj_initialize(star, b, [0], 0.5, 0.1, max_degree=6)

    def test_budget_floor(self, small_graph):
        assert projection_budget(small_graph, 0.01, 0.1) == 1
        assert projection_budget(small_graph, 0.5, 0.5, scale=1e6) > 1

    @pytest.mark.parametrize("t", [0, 1, 2, 5, 16])
    def test_degree_identity(self, small_graph, t):
        for u in range(small_graph.n):
            lhs, rhs = degree_identity(small_graph, u, t)
            assert lhs == pytest.approx(rhs)

    def test_expected_load_on_path(self):
        g = path_graph(3)
        # from 0 the walk passes 1 before reaching 2
        assert expected_load(g, {2}, 1, [1.0, 0.0, -1.0]) == pytest.approx(1.0)
        assert expected_load(g, {2}, 2, [1.0, 0.0, -1.0]) == 0.0


class TestInitialization:

    def test_length_mismatch(self, path5):
        with pytest.raises(ValueError):
            proj_initialize(path5, [1.0, -1.0], [0], 0.5, 0.1)

    def test_matches_exact_projection(self, small_graph):
        b = random_demand(small_graph, 3)
        st = _state(small_graph, b, [0, 4, 7])
        assert np.allclose(proj_query(st), exact_projected(st), atol=1e-6)
        assert projection_error(st) < 1e-6
        T, values = st.on_terminals()
        assert T == [0, 4, 7]
        assert values.sum() == pytest.approx(0.0, abs=1e-6)

    def test_contracted_projection_with_all_terminals(self, path5):
        b = np.array([1.0, -2.0, 0.0, 0.5, 0.5])
        assert np.allclose(contracted_projection(path5, b, set(range(5)), 0.1), b)
        assert np.allclose(contracted_projection(path5, b, set(), 0.1), 0.0)

    def test_demand_on_terminals_is_exact(self, small_graph):
        b = np.zeros(small_graph.n)
        b[[1, 5, 9]] = [2.0, -0.5, -1.5]
        st = _state(small_graph, b, [1, 5, 9], epsilon=0.5)
        assert np.allclose(proj_query(st), b)
        assert projection_error(st) == pytest.approx(0.0, abs=1e-12)

    def test_uncovered_component_gets_terminal(self):
        g = MultiGraph(5)
        g.insert_edge(0, 1)
        g.insert_edge(2, 3)
        g.insert_edge(3, 4)
        st = _state(g, [1.0, -1.0, 0.5, 0.0, -0.5], [0])
        assert st.S == {0, 2}
        assert projection_error(st) < 1e-6

    def test_zero_demand(self, path5):
        st = _state(path5, np.zeros(5), [0])
        assert np.allclose(proj_query(st), 0.0)
        assert projection_error(st) == 0.0


class TestOperations:

    def test_lazy_promotion_moves_error_by_direction(self, small_graph):
        b = random_demand(small_graph, 8)
        S = {0, 3}
        st = _state(small_graph, b, S, epsilon=0.3)
        before = proj_query(st) - exact_projected(st)
        direction = promotion_error_direction(small_graph, set(st.S), 6, st.demand())
        proj_add_terminal(st, 6)
        after = proj_query(st) - exact_projected(st)
        assert np.allclose(after - before, direction, atol=1e-8)
        assert st.added == [6]

    def test_change_on_terminals_keeps_error(self, small_graph):
        b = random_demand(small_graph, 9)
        st = _state(small_graph, b, [2, 5], epsilon=0.3)
        before = proj_query(st) - exact_projected(st)
        proj_change(st, 2, b[2] + 0.75, 5, b[5] - 0.75)
        after = proj_query(st) - exact_projected(st)
        assert np.allclose(after, before, atol=1e-9)
        assert st.demand()[2] == pytest.approx(b[2] + 0.75)

    def test_change_promotes_endpoints(self, small_graph):
        b = random_demand(small_graph, 10)
        st = _state(small_graph, b, [0])
        proj_change(st, 4, b[4] + 1.0, 8, b[8] - 1.0)
        assert {4, 8} <= st.S
        assert np.allclose(st.demand().sum(), 0.0)

    def test_change_must_preserve_total(self, small_graph):
        b = random_demand(small_graph, 11)
        st = _state(small_graph, b, [0])
        with pytest.raises(NotInRangeError):
            proj_change(st, 1, b[1] + 1.0, 2, b[2])
        assert st.ops_used == 0

    def test_change_across_components(self):
        g = MultiGraph(4)
        g.insert_edge(0, 1)
        g.insert_edge(2, 3)
        st = _state(g, [1.0, -1.0, 0.0, 0.0], [0])
        with pytest.raises(NotInRangeError):
            proj_change(st, 1, 0.0, 2, -1.0)

    def test_edge_update_and_range(self, small_graph):
        st = _state(small_graph, random_demand(small_graph, 12), [0])
        proj_edge_update(st, 3, 9)
        assert {3, 9} <= st.S
        with pytest.raises(GraphError):
            proj_add_terminal(st, 99)

    def test_budget_exhaustion(self, small_graph):
        st = _state(small_graph, random_demand(small_graph, 13), [0], budget_scale=1e-9)
        assert st.ops_budget == 1
        proj_add_terminal(st, 1)
        assert st.exhausted
        with pytest.raises(NeedsRebuild):
            proj_add_terminal(st, 2)



class TestAccuracy:

    @pytest.mark.slow
    def test_error_within_epsilon_through_budget(self):
        within = 0
        for seed in range(10):
            g = random_bounded_degree_graph(60, 0.08, seed)
            b = random_demand(g, seed)
            S_prime = top_demand_vertices(b, int(np.ceil(0.3 * g.edge_count)))
            st = proj_initialize(g, b, S_prime, beta=0.3, epsilon=0.25, max_degree=g.max_degree())
            rng = np.random.default_rng(seed)
            free = [v for v in range(g.n) if v not in st.S]
            rng.shuffle(free)
            for u in free[:st.ops_budget]:
                proj_add_terminal(st, u)
            within += projection_error(st) <= 0.25
        assert within >= 9
