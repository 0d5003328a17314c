# tests/test_weighted_walk.py
import numpy as np
import pytest

from config import walk_constants
from exact_oracle import hitting_probabilities
from generators import gen_snake
from graph_core import MultiGraph
from walk_engine import WalkStatus, simulate_until_distinct
from weighted_walk import (
    CoverBoundError, ExitKernel, cover_bound, generate_weighted_walk, matrix_power_apply,
    sample_exit_edge, sample_exit_time,
)


def _tv(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def _trap_graph():
    """Heavy edge 0-1 inside U with light exits to 2 and 3."""
    g = MultiGraph(4, weighted=True)
    g.insert_edge(0, 1, 4.0)
    g.insert_edge(0, 2, 1.0)
    g.insert_edge(1, 3, 1.0)
    g.insert_edge(2, 3, 1.0)
    return g


def _naive_exit_time(g, U, start, rng):
    current, steps = start, 0
    while True:
        current, _ = g.weighted_random_neighbor(current, rng)
        steps += 1
        if current not in U:
            return steps


class TestExitKernel:

    def test_matrix_power_apply(self, rng):
        W = rng.random((4, 4))
        p0 = rng.random(4)
        for i in (0, 1, 5, 13):
            assert np.allclose(matrix_power_apply(W, p0, i), np.linalg.matrix_power(W, i) @ p0)

    def test_columns_stochastic(self, weighted_graph):
        kernel = ExitKernel(weighted_graph, [0, 1, 3], 1)
        assert np.allclose(kernel.matrix.sum(axis=0), 1.0)

    def test_exit_probability_monotone(self):
        kernel = ExitKernel(_trap_graph(), [0, 1], 0)
        values = [kernel.p_new(i) for i in range(40)]
        assert values[0] == 0.0
        assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))
        assert kernel.p_new(1) == pytest.approx(0.2)

    def test_start_must_be_inside(self, weighted_graph):
        with pytest.raises(ValueError):
            ExitKernel(weighted_graph, [0, 1], 3)

    def test_cover_bound_grows_with_weight(self):
        light = gen_snake(8, heavy=1.0)
        heavy = gen_snake(8)
        assert cover_bound(heavy) > cover_bound(light)


class TestExitSampling:

    def test_exit_time_matches_exact_distribution(self):
        g = _trap_graph()
        kernel = ExitKernel(g, [0, 1], 0)
        rng = np.random.default_rng(11)
        M = 200
        draws = np.array([sample_exit_time(kernel, M, rng) for _ in range(20000)])
        exact = np.diff([kernel.p_new(i) for i in range(M + 1)])
        empirical = np.bincount(draws, minlength=M + 1)[1:] / len(draws)
        assert draws.min() >= 1
        assert _tv(empirical, exact) <= 0.03

    def test_naive_simulation_matches_exact_distribution(self):
        g = _trap_graph()
        kernel = ExitKernel(g, [0, 1], 0)
        rng = np.random.default_rng(12)
        M = 200
        draws = np.array([_naive_exit_time(g, {0, 1}, 0, rng) for _ in range(20000)])
        exact = np.diff([kernel.p_new(i) for i in range(M + 1)])
        empirical = np.bincount(np.minimum(draws, M), minlength=M + 1)[1:] / len(draws)
        assert _tv(empirical, exact) <= 0.03

    def test_cover_bound_violation(self, rng):
        kernel = ExitKernel(_trap_graph(), [0, 1], 0)
        with pytest.raises(CoverBoundError):
            sample_exit_time(kernel, 2, rng, cover_tol=1e-3)

    def test_draws_beyond_horizon_raise(self):
        kernel = ExitKernel(_trap_graph(), [0, 1], 0)
        rng = np.random.default_rng(13)
        p_2 = kernel.p_new(2)
        assert p_2 == pytest.approx(0.36)
        times, failures = [], 0
        for _ in range(4000):
            try:
                times.append(sample_exit_time(kernel, 2, rng, cover_tol=1.0))
            except CoverBoundError:
                failures += 1
        assert failures / 4000 == pytest.approx(1 - p_2, abs=0.03)
        # conditioned on leaving by step 2: P(X=1) = 0.2 / 0.36
        assert np.mean(np.array(times) == 1) == pytest.approx(0.2 / p_2, abs=0.05)

    def test_exit_edge_leaves_U(self, weighted_graph, rng):
        U = [0, 1, 2]
        kernel = ExitKernel(weighted_graph, U, 0)
        for _ in range(200):
            X = sample_exit_time(kernel, 500, rng)
            exit_from, exit_to, edge_id = sample_exit_edge(weighted_graph, kernel, X, rng)
            assert exit_from in U
            assert exit_to not in U
            e = weighted_graph.edge(edge_id)
            assert {e.u, e.v} == {exit_from, exit_to}

    def test_exit_side_frequencies(self):
        g = _trap_graph()
        kernel = ExitKernel(g, [0, 1], 0)
        rng = np.random.default_rng(5)
        sides = []
        for _ in range(4000):
            X = sample_exit_time(kernel, 200, rng)
            sides.append(sample_exit_edge(g, kernel, X, rng)[1])
        naive_rng = np.random.default_rng(6)
        naive = [simulate_until_distinct(g, 0, 10, naive_rng, stop_at={2, 3}).trajectory[-1] for _ in range(4000)]
        assert np.mean(np.array(sides) == 2) == pytest.approx(np.mean(np.array(naive) == 2), abs=0.05)


class TestWeightedWalk:

    def test_start_on_terminal(self, weighted_graph, rng):
        record = generate_weighted_walk(weighted_graph, {3}, 3, 0.5, 0.5, rng)
        assert record.L_w == [3]
        assert record.L_s == [0.0]
        assert record.status == WalkStatus.REACHED
        assert record.to_walk().vertices == [3]

    def test_reaches_terminal_on_snake(self):
        g = gen_snake(6, heavy=100.0)
        rng = np.random.default_rng(21)
        for _ in range(5):
            record = generate_weighted_walk(g, {0, 5}, 2, 0.5, 0.5, rng)
            assert record.status == WalkStatus.REACHED
            assert record.terminal in (0, 5)
            assert record.events <= 5
            assert len(set(record.L_w)) == len(record.L_w)

    def test_first_occurrences_and_costs(self, weighted_graph, rng):
        record = generate_weighted_walk(weighted_graph, {4}, 2, 0.5, 0.5, rng)
        walk = record.to_walk()
        assert walk.vertices[0] == 2
        assert len(set(walk.vertices)) == len(walk.vertices)
        assert all(b > a for a, b in zip(walk.costs, walk.costs[1:]))
        # every segment crosses at least one edge of weight <= 4
        assert all(s >= 0.25 for s in record.L_s)
        assert walk.cost == pytest.approx(record.total_s)

    def test_covers_component_without_terminals(self, weighted_graph, rng):
        record = generate_weighted_walk(weighted_graph, set(), 0, 0.2, 0.5, rng)
        assert record.status == WalkStatus.COVERED
        assert sorted(record.L_w) == [1, 2, 3, 4]

    @pytest.mark.slow
    def test_snake_first_occurrences_match_naive_walk(self):
        g = gen_snake(6, heavy=100.0)
        terminals = {0, 5}
        rng = np.random.default_rng(41)
        naive_rng = np.random.default_rng(42)
        fast, naive = {}, {}
        trials = 3000
        for _ in range(trials):
            record = generate_weighted_walk(g, terminals, 2, 0.5, 0.5, rng)
            key = tuple(record.L_w)
            fast[key] = fast.get(key, 0) + 1
            walk = simulate_until_distinct(g, 2, 10, naive_rng, stop_at=terminals)
            key = tuple(walk.first_occurrences[1:])
            naive[key] = naive.get(key, 0) + 1
        keys = sorted(set(fast) | set(naive))
        p = [fast.get(k, 0) / trials for k in keys]
        q = [naive.get(k, 0) / trials for k in keys]
        assert _tv(p, q) <= 0.06

    @pytest.mark.slow
    def test_terminal_distribution_matches_hitting_probabilities(self, weighted_graph):
        terminals = {0, 3}
        rng = np.random.default_rng(31)
        constants = walk_constants()
        M = cover_bound(weighted_graph, constants)
        hits = []
        for _ in range(2000):
            record = generate_weighted_walk(weighted_graph, terminals, 2, 0.5, 0.5, rng, constants, M=M)
            hits.append(record.terminal)
        exact = hitting_probabilities(weighted_graph, terminals, 2)
        empirical = [np.mean(np.array(hits) == t) for t in sorted(terminals)]
        assert _tv(empirical, exact) <= 0.05
