# tests/conftest.py
import os
import sys
import pytest
import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from config import walk_constants
from graph_core import MultiGraph
from generators import random_graph


def path_graph(n: int) -> MultiGraph:
    g = MultiGraph(n)
    for i in range(n - 1):
        g.insert_edge(i, i + 1)
    return g


def cycle_graph(n: int) -> MultiGraph:
    g = path_graph(n)
    g.insert_edge(n - 1, 0)
    return g


def complete_graph(n: int) -> MultiGraph:
    g = MultiGraph(n)
    for u in range(n):
        for v in range(u + 1, n):
            g.insert_edge(u, v)
    return g


def connected_random_graph(n: int, p: float, seed: int, weights=None) -> MultiGraph:
    """G(n, p) plus a spanning path so the result is connected."""
    g = random_graph(n, p, seed, weights)
    for i in range(n - 1):
        if not g.edges_between(i, i + 1):
            g.insert_edge(i, i + 1, 1.0)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def path5():
    return path_graph(5)


@pytest.fixture
def small_graph():
    """Connected unweighted graph on 12 vertices."""
    return connected_random_graph(12, 0.35, seed=7)


@pytest.fixture
def weighted_graph():
    """Connected graph on 5 vertices with weights in {1, 4}."""
    g = MultiGraph(5, weighted=True)
    for u, v, w in [(0, 1, 1), (1, 2, 4), (2, 3, 1), (3, 4, 4), (4, 0, 1), (1, 3, 1)]:
        g.insert_edge(u, v, w)
    return g


@pytest.fixture
def cheap_constants():
    """Few walk copies per edge so initialization stays fast."""
    return walk_constants().with_overrides(c_rho=0.5)


@pytest.fixture
def fake_redis():
    """Point the shared run queue at fakeredis with synchronous jobs."""
    import fakeredis
    from run_queue import get_run_queue
    from cache_manager import get_run_cache_manager

    client = fakeredis.FakeRedis()
    runs = get_run_queue()
    runs.attach(client, is_async=False)
    cache = get_run_cache_manager()
    cache.hit_count = cache.miss_count = 0
    yield client
    client.flushall()
    runs.disconnect()


@pytest.fixture
def clean_environment():
    """Provide a clean environment for testing."""
    original_env = os.environ.copy()
    os.environ.clear()
    os.environ.update({'REDIS_URL': 'redis://localhost:6379'})
    yield
    os.environ.clear()
    os.environ.update(original_env)


@pytest.fixture
def graph_files(tmp_path):
    """A small connected graph and an ER stream written to disk."""
    from graph_core import write_graph
    from generators import gen_stream, write_stream

    g = connected_random_graph(10, 0.4, seed=3)
    graph_path = tmp_path / "g.txt"
    stream_path = tmp_path / "s.txt"
    write_graph(g, str(graph_path))
    with open(stream_path, 'w', encoding='utf-8') as f:
        write_stream(gen_stream("mixed", g, 20, seed=5), f)
    return str(graph_path), str(stream_path)
