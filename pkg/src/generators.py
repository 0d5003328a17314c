"""
DynSC - Instance Generators
Graphs, demand vectors and operation streams for tests and benchmarks. Streams
are generated up front against a shadow copy of the graph, so every delete
names an existing edge and the data structures replaying them never influence
the sequence.
"""
import math
from typing import List, Optional, Sequence, TextIO
import logging

import networkx as nx
import numpy as np

from config import MAX_DEGREE
from graph_core import GraphError, MultiGraph

logger = logging.getLogger(__name__)

STREAM_KINDS = {
    # kind: (insert, delete, query, change, terminal) weights
    "mixed": (0.3, 0.2, 0.3, 0.1, 0.1),
    "insert-heavy": (0.6, 0.1, 0.2, 0.05, 0.05),
    "query-heavy": (0.1, 0.1, 0.6, 0.1, 0.1),
}
STREAM_MODES = ("er", "solver")


def from_networkx(G: nx.Graph, weighted: bool = False, weight: str = "weight") -> MultiGraph:
    """MultiGraph with nodes relabelled 0..n-1 in sorted order."""
    H = nx.convert_node_labels_to_integers(G, ordering="sorted")
    g = MultiGraph(max(H.number_of_nodes(), 1), weighted=weighted)
    for u, v, data in sorted(H.edges(data=True), key=lambda e: (min(e[0], e[1]), max(e[0], e[1]))):
        if u == v:
            continue
        g.insert_edge(u, v, float(data.get(weight, 1.0)) if weighted else 1.0)
    return g


def random_graph(n: int, p: float, seed: int, weights: Optional[Sequence[float]] = None) -> MultiGraph:
    """G(n, p); with `weights`, each edge weight is drawn uniformly from the list."""
    G = nx.gnp_random_graph(n, p, seed=seed)
    g = MultiGraph(n, weighted=weights is not None)
    rng = np.random.default_rng(seed)
    for u, v in sorted(G.edges()):
        g.insert_edge(u, v, float(rng.choice(weights)) if weights is not None else 1.0)
    return g


def random_bounded_degree_graph(n: int, p: float, seed: int, max_degree: int = MAX_DEGREE) -> MultiGraph:
    """G(n, p) thinned so no vertex exceeds max_degree (edges kept in random order)."""
    G = nx.gnp_random_graph(n, p, seed=seed)
    rng = np.random.default_rng(seed)
    edges = sorted(G.edges())
    rng.shuffle(edges)
    g = MultiGraph(n)
    for u, v in edges:
        if g.degree(u) < max_degree and g.degree(v) < max_degree:
            g.insert_edge(int(u), int(v))
    return g


def gen_snake(n: int, heavy: Optional[float] = None) -> MultiGraph:
    """Path on n vertices whose edge weights alternate 1, heavy, 1, ... (heavy defaults to n^10)."""
    if n < 2:
        raise GraphError("a snake needs at least two vertices")
    heavy = float(n) ** 10 if heavy is None else float(heavy)
    g = MultiGraph(n, weighted=True)
    for i in range(n - 1):
        g.insert_edge(i, i + 1, 1.0 if i % 2 == 0 else heavy)
    return g


def gen_path_augmented_expander(k: int, seed: int) -> MultiGraph:
    """
    Random regular core on vertices 0..k-1 (degree 3, or 4 when k is odd)
    with a ray of floor(k/10) extra vertices hanging off every core vertex.
    """
    if k < 10:
        raise ValueError(f"core size must be at least 10, got {k}")
    degree = 3 if k % 2 == 0 else 4
    core = nx.random_regular_graph(degree, k, seed=seed)
    ray = k // 10
    g = MultiGraph(k + k * ray)
    for u, v in sorted(core.edges()):
        g.insert_edge(u, v)
    for u in range(k):
        prev = u
        for j in range(ray):
            x = k + u * ray + j
            g.insert_edge(prev, x)
            prev = x
    return g


def random_demand(g: MultiGraph, seed: int) -> np.ndarray:
    """Gaussian demand projected to zero sum on every component."""
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(g.n)
    _, labels = g.components()
    means = np.bincount(labels, weights=b) / np.bincount(labels)
    return b - means[labels]


def read_demand(path: str, n: int) -> np.ndarray:
    """Demand file: one `vertex value` pair per line; missing vertices are zero."""
    b = np.zeros(n)
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected 'vertex value', got {line!r}")
            v = int(parts[0])
            if not (0 <= v < n):
                raise GraphError(f"{path}:{lineno}: vertex {v} out of range")
            b[v] = float(parts[1])
    return b


def write_demand(b: Sequence[float], path: str):
    with open(path, 'w', encoding='utf-8') as f:
        for v, value in enumerate(b):
            f.write(f"{v} {float(value):.17g}\n")


def _range_ok(g: MultiGraph, b: np.ndarray) -> bool:
    _, labels = g.components()
    sums = np.bincount(labels, weights=b)
    return bool(np.all(np.abs(sums) <= 1e-9 * max(1.0, float(np.abs(b).max()))))


def gen_stream(kind: str, g: MultiGraph, length: int, seed: int, mode: str = "er",
               b: Optional[Sequence[float]] = None, weights: Optional[Sequence[float]] = None,
               max_degree: int = MAX_DEGREE) -> List[str]:
    """
    Oblivious operation stream as text lines.

    er mode emits I/D/Q/T; solver mode emits I/D/C/X/EN and keeps the shadow
    graph within max_degree and the demand in range (deletes that would
    strand demand in a new component are skipped).
    """
    if kind not in STREAM_KINDS:
        raise ValueError(f"unknown stream kind {kind!r}, expected one of {sorted(STREAM_KINDS)}")
    if mode not in STREAM_MODES:
        raise ValueError(f"unknown stream mode {mode!r}, expected one of {STREAM_MODES}")
    rng = np.random.default_rng(seed)
    shadow = g.copy()
    n = shadow.n
    demand = np.zeros(n) if b is None else np.asarray(b, dtype=float).copy()
    probs = np.array(STREAM_KINDS[kind])
    probs = probs / probs.sum()
    weight_choices = list(weights) if weights is not None else ([1.0, 10.0, 100.0] if g.weighted else [1.0])
    lines: List[str] = []
    attempts = 0
    while len(lines) < length and attempts < 50 * max(length, 1):
        attempts += 1
        op = int(rng.choice(5, p=probs))
        if op == 0:
            u, v = (int(x) for x in rng.choice(n, size=2, replace=False)) if n > 1 else (0, 0)
            if u == v:
                continue
            if mode == "solver" and (shadow.degree(u) >= max_degree or shadow.degree(v) >= max_degree):
                continue
            w = float(rng.choice(weight_choices))
            shadow.insert_edge(u, v, w)
            lines.append(f"I {u} {v} {w:g}")
        elif op == 1:
            if shadow.edge_count == 0:
                continue
            edge = shadow.edges[int(rng.choice(sorted(shadow.edges)))]
            target = shadow.edges_between(edge.u, edge.v)[0]
            if mode == "solver":
                trial = shadow.copy()
                trial.delete_edge(target)
                if not _range_ok(trial, demand):
                    continue
            shadow.delete_edge(target)
            lines.append(f"D {edge.u} {edge.v}")
        elif op == 2:
            if mode == "er":
                s, t = (int(x) for x in rng.choice(n, size=2, replace=n < 2))
                lines.append(f"Q {s} {t}")
            elif rng.random() < 0.5:
                lines.append(f"X {int(rng.integers(n))}")
            else:
                lines.append("EN")
        elif op == 3:
            if mode == "er":
                continue
            u, v = (int(x) for x in rng.choice(n, size=2, replace=n < 2))
            if u == v or not shadow.same_component(u, v):
                continue
            delta = float(np.round(rng.standard_normal(), 6))
            demand[u] += delta
            demand[v] -= delta
            lines.append(f"C {u} {demand[u]:.17g} {v} {demand[v]:.17g}")
        else:
            if mode == "solver":
                continue
            lines.append(f"T {int(rng.integers(n))}")
    logger.debug(f"Generated {len(lines)} {kind} {mode} operations (seed {seed})")
    return lines


def write_stream(lines: Sequence[str], fp: TextIO):
    for line in lines:
        fp.write(line + "\n")
