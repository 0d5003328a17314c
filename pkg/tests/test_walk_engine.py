# tests/test_walk_engine.py
import io

import numpy as np
import pytest

from config import walk_constants
from graph_core import GraphError
from random_streams import UniformStream, walk_stream
from schur_dynamic import DynamicSC
from walk_engine import (
    HEdge, Walk, WalkStatus, WalkStore, coupled_regeneration, dump_walks, generate_unweighted_walk,
    hedge_weight, simulate_until_distinct, steps_to_distinct_edges, truncation_caps,
)
from tests.conftest import complete_graph, connected_random_graph, cycle_graph, path_graph


class TestUnweightedWalk:

    def test_start_on_terminal_is_trivial(self, path5, rng):
        walk = generate_unweighted_walk(path5, {2}, 2, 0.3, rng)
        assert walk.vertices == [2]
        assert walk.status == WalkStatus.REACHED
        assert walk.terminal == 2
        assert walk.cost == 0.0

    def test_stops_at_first_terminal(self, path5):
        for seed in range(30):
            walk = generate_unweighted_walk(path5, {0, 4}, 2, 0.5, walk_stream(seed, 0, 0, 1))
            assert walk.status == WalkStatus.REACHED
            assert walk.terminal in (0, 4)
            assert all(v not in (0, 4) for v in walk.vertices[:-1])
            assert walk.costs == [float(i) for i in range(len(walk.vertices))]
            assert len(walk.edges) == walk.length

    def test_truncation_caps_bound_distinct_edges(self, rng):
        g = cycle_graph(200)
        cap_distinct, cap_steps = truncation_caps(g.n, 0.5, walk_constants())
        walk = generate_unweighted_walk(g, set(), 0, 0.5, rng)
        assert walk.status == WalkStatus.TRUNCATED
        assert len(set(walk.edges)) <= cap_distinct
        assert walk.length <= cap_steps

    def test_covers_small_component(self, rng):
        g = path_graph(3)
        walk = generate_unweighted_walk(g, set(), 1, 0.1, rng)
        assert walk.status == WalkStatus.COVERED
        assert set(walk.edges) == set(g.edges)

    def test_reproducible_from_stream(self, small_graph):
        first = generate_unweighted_walk(small_graph, {0}, 5, 0.3, walk_stream(9, 3, 1, 2))
        second = generate_unweighted_walk(small_graph, {0}, 5, 0.3, walk_stream(9, 3, 1, 2))
        assert first.vertices == second.vertices

    def test_invalid_beta(self, path5, rng):
        with pytest.raises(ValueError):
            generate_unweighted_walk(path5, set(), 0, 1.0, rng)


class TestUniformStream:

    def test_lazy_until_first_draw(self):
        stream = UniformStream(1, 2, 3)
        assert stream.draws == 0
        value = stream.random()
        assert 0.0 <= value < 1.0
        assert stream.draws == 1


class TestWalkStore:

    def _store(self):
        store = WalkStore(rho=2)
        first = Walk([0, 1, 2], [0.0, 1.0, 2.0], WalkStatus.REACHED, edges=[10, 11], terminal=2)
        second = Walk([3, 1, 4], [0.0, 1.0, 2.0], WalkStatus.TRUNCATED, edges=[12, 13])
        store.add_sample(7, 0, 1.0, first, second)
        return store

    def test_incomplete_sample_has_no_hedge(self):
        store = self._store()
        assert store.hedges() == {}

    def test_shorten_completes_sample(self):
        store = self._store()
        deltas = store.shorten_at(1)
        assert len(deltas) == 1
        assert deltas[0].old is None
        assert deltas[0].new == HEdge.between(1, 1, hedge_weight(2, 1.0, 1.0, 1.0))
        assert store.audit({1, 2}) == []

    def test_reverse_index_tracks_first_visit(self):
        store = self._store()
        positions = dict(store.walks_through(1))
        assert sorted(positions.values()) == [1, 1]
        assert store.walks_through_edge(13)

    def test_remove_sample_clears_indices(self):
        store = self._store()
        sample_id = store.samples_for_edge(7)[0]
        store.remove_sample(sample_id)
        assert len(store) == 0
        assert store.by_vertex == {}
        assert store.by_edge == {}
        assert store.samples_for_edge(7) == []

    def test_dump_walks_one_line_per_walk(self):
        store = self._store()
        buffer = io.StringIO()
        dump_walks(store, buffer)
        lines = buffer.getvalue().splitlines()
        assert len(lines) == 2
        assert lines[0].split()[1] == WalkStatus.REACHED.value


class TestCoupling:

    @pytest.mark.parametrize("seed", range(10))
    def test_shortening_matches_coupled_regeneration(self, seed):
        g = connected_random_graph(14, 0.3, seed)
        constants = walk_constants().with_overrides(c_rho=0.5)
        ds = DynamicSC.initialize(g, [0, 13], 0.4, 0.5, seed=seed, constants=constants, sample_terminals=False)
        snapshot = ds.store.snapshot()
        rng = np.random.default_rng(seed)
        for u in rng.choice(np.arange(1, 13), size=4, replace=False):
            ds.store.shorten_at(int(u))
            ds.terminals.add(int(u))
        assert ds.h_multiset() == coupled_regeneration(snapshot, ds.terminals, ds.rho)
        assert ds.store.audit(ds.terminals) == []

    def test_add_terminal_matches_regeneration(self, small_graph):
        constants = walk_constants().with_overrides(c_rho=0.5)
        ds = DynamicSC.initialize(small_graph, [0], 0.45, 0.5, seed=3, constants=constants)
        snapshot = ds.store.snapshot()
        ds.add_terminal(6)
        ds.add_terminal(9)
        assert ds.h_multiset() == coupled_regeneration(snapshot, ds.terminals, ds.rho)


class TestNaiveSimulation:

    def test_reaches_distinct_target(self, rng):
        g = complete_graph(8)
        walk = simulate_until_distinct(g, 0, 5, rng)
        assert walk.finished
        assert len(walk.first_occurrences) == 5
        assert walk.trajectory[0] == 0

    def test_stop_set(self, path5, rng):
        walk = simulate_until_distinct(path5, 2, 10, rng, stop_at={0, 4})
        assert walk.finished
        assert walk.trajectory[-1] in (0, 4)

    def test_step_cap(self, rng):
        walk = simulate_until_distinct(cycle_graph(50), 0, 50, rng, max_steps=3)
        assert not walk.finished
        assert walk.steps == 3

    def test_steps_to_distinct_edges(self, rng):
        g = cycle_graph(6)
        assert steps_to_distinct_edges(g, 0, 1, rng) == 1
        assert steps_to_distinct_edges(g, 0, 6, rng) >= 5
        with pytest.raises(GraphError):
            steps_to_distinct_edges(g, 0, 7, rng)
