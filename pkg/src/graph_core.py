"""
DynSC - Graph Core
Undirected weighted multigraph with stable edge identifiers, weighted degrees and a
per-vertex prefix-sum index over incident edge weights. The index is what the walk
engines use for weighted neighbour selection and for sampling a boundary edge with
some incident edges temporarily switched off.
"""
import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Tuple
import logging

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from config import WEIGHT_EXPONENT

logger = logging.getLogger(__name__)


class DynSCError(Exception):
    """Root of every error raised by this package."""


class GraphError(DynSCError):
    """Invalid graph mutation or query."""


@dataclass(frozen=True)
class Edge:
    edge_id: int
    u: int
    v: int
    weight: float

    def other(self, x: int) -> int:
        return self.v if x == self.u else self.u


class IncidenceIndex:
    """
    Fenwick tree over the incident-edge slots of one vertex.

    Slots of removed edges are recycled; their weight is zero while free,
    so they are never selected.
    """

    def __init__(self, capacity: int = 4):
        self._capacity = max(1, capacity)
        self._tree = [0.0] * (self._capacity + 1)
        self._weights: List[float] = []
        self._edges: List[Optional[int]] = []
        self._neighbors: List[Optional[int]] = []
        self._slot_of: Dict[int, int] = {}
        self._free: List[int] = []
        self._journal: Optional[List[Tuple[int, float]]] = None

    def __len__(self) -> int:
        return len(self._slot_of)

    def _update(self, slot: int, delta: float):
        i = slot + 1
        while i <= self._capacity:
            if self._journal is not None:
                self._journal.append((i, self._tree[i]))
            self._tree[i] += delta
            i += i & (-i)

    def _grow(self):
        self._capacity *= 2
        self._tree = [0.0] * (self._capacity + 1)
        for slot, w in enumerate(self._weights):
            if w:
                self._update(slot, w)

    def add(self, edge_id: int, neighbor: int, weight: float) -> int:
        if edge_id in self._slot_of:
            raise GraphError(f"edge {edge_id} already indexed")
        if self._free:
            slot = self._free.pop()
            self._edges[slot] = edge_id
            self._neighbors[slot] = neighbor
        else:
            slot = len(self._weights)
            if slot >= self._capacity:
                self._grow()
            self._weights.append(0.0)
            self._edges.append(edge_id)
            self._neighbors.append(neighbor)
        self._slot_of[edge_id] = slot
        self.set_weight(edge_id, weight)
        return slot

    def remove(self, edge_id: int):
        slot = self._slot_of.pop(edge_id)
        self._update(slot, -self._weights[slot])
        self._weights[slot] = 0.0
        self._edges[slot] = None
        self._neighbors[slot] = None
        self._free.append(slot)

    def set_weight(self, edge_id: int, weight: float):
        slot = self._slot_of[edge_id]
        delta = weight - self._weights[slot]
        self._weights[slot] = weight
        if delta:
            self._update(slot, delta)

    def weight(self, edge_id: int) -> float:
        return self._weights[self._slot_of[edge_id]]

    def prefix(self, count: int) -> float:
        """Sum of the first `count` slots."""
        total = 0.0
        i = min(count, self._capacity)
        while i > 0:
            total += self._tree[i]
            i -= i & (-i)
        return total

    def total(self) -> float:
        return self.prefix(len(self._weights))

    def find(self, x: float) -> Tuple[int, int]:
        """Slot whose cumulative interval contains x; returns (neighbor, edge_id)."""
        pos = 0
        rem = x
        step = 1 << (self._capacity.bit_length() - 1)
        while step:
            nxt = pos + step
            if nxt <= self._capacity and self._tree[nxt] <= rem:
                pos = nxt
                rem -= self._tree[nxt]
            step >>= 1
        if pos >= len(self._weights) or self._weights[pos] <= 0.0:
            # x fell on the upper end through rounding
            pos = max(i for i, w in enumerate(self._weights) if w > 0.0)
        return self._neighbors[pos], self._edges[pos]

    def sample(self, uniform: float) -> Tuple[int, int]:
        total = self.total()
        if total <= 0.0:
            raise GraphError("cannot sample from an empty incidence index")
        return self.find(uniform * total)

    def entries(self) -> Iterator[Tuple[int, int, float]]:
        for edge_id, slot in self._slot_of.items():
            yield edge_id, self._neighbors[slot], self._weights[slot]

    @contextmanager
    def temporarily_zeroed(self, edge_ids: Iterable[int]):
        """Zero the given edges and restore the exact prior tree afterwards."""
        journal: List[Tuple[int, float]] = []
        saved = [(e, self._weights[self._slot_of[e]]) for e in edge_ids]
        self._journal = journal
        try:
            for e, _ in saved:
                self.set_weight(e, 0.0)
        finally:
            self._journal = None
        try:
            yield self
        finally:
            for i, old in reversed(journal):
                self._tree[i] = old
            for e, w in saved:
                self._weights[self._slot_of[e]] = w


class MultiGraph:
    """
    Undirected multigraph on vertices 0..n-1.

    Modes: unweighted (every weight is 1), weighted (1 <= w <= n^c), or
    free (any positive finite weight; used for derived graphs such as the
    sampled Schur complement).
    """

    def __init__(self, vertex_count: int, weighted: bool = False, free_weights: bool = False,
                 weight_exponent: float = WEIGHT_EXPONENT):
        if vertex_count < 1:
            raise GraphError("a graph needs at least one vertex")
        self.vertex_count = vertex_count
        self.weighted = weighted or free_weights
        self.free_weights = free_weights
        self.weight_exponent = weight_exponent
        self.edges: Dict[int, Edge] = {}
        self._index = [IncidenceIndex() for _ in range(vertex_count)]
        self._next_id = 0
        self._version = 0
        self._components: Optional[Tuple[int, np.ndarray]] = None
        self._stats: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @property
    def n(self) -> int:
        return self.vertex_count

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def max_weight(self) -> float:
        return float(self.vertex_count) ** self.weight_exponent

    def _check_vertex(self, x: int):
        if not (0 <= x < self.vertex_count):
            raise GraphError(f"vertex {x} out of range 0..{self.vertex_count - 1}")

    def _check_weight(self, w: float):
        if not math.isfinite(w) or w <= 0:
            raise GraphError(f"weight {w} must be positive and finite")
        if self.free_weights:
            return
        if not self.weighted:
            if w != 1:
                raise GraphError(f"unweighted graph only accepts weight 1, got {w}")
            return
        if w < 1 or w > self.max_weight:
            raise GraphError(f"weight {w} outside [1, n^{self.weight_exponent:g}]")

    def insert_edge(self, u: int, v: int, w: float = 1.0) -> int:
        self._check_vertex(u)
        self._check_vertex(v)
        if u == v:
            raise GraphError(f"self-loop at {u} rejected")
        w = float(w)
        self._check_weight(w)
        edge_id = self._next_id
        self._next_id += 1
        self.edges[edge_id] = Edge(edge_id, u, v, w)
        self._index[u].add(edge_id, v, w)
        self._index[v].add(edge_id, u, w)
        self._touch()
        return edge_id

    def delete_edge(self, edge_id: int) -> Edge:
        edge = self.edges.pop(edge_id, None)
        if edge is None:
            raise GraphError(f"unknown edge {edge_id}")
        self._index[edge.u].remove(edge_id)
        self._index[edge.v].remove(edge_id)
        self._touch()
        return edge

    def _touch(self):
        self._version += 1
        self._components = None
        self._stats = None

    def edge(self, edge_id: int) -> Edge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise GraphError(f"unknown edge {edge_id}") from None

    def has_edge(self, edge_id: int) -> bool:
        return edge_id in self.edges

    def weighted_degree(self, u: int) -> float:
        return self._index[u].total()

    def degree(self, u: int) -> int:
        return len(self._index[u])

    def incidence(self, u: int) -> IncidenceIndex:
        return self._index[u]

    def neighbors(self, u: int) -> List[Tuple[int, int, float]]:
        """(neighbor, edge_id, weight) triples ordered by edge id."""
        return sorted(((nb, e, w) for e, nb, w in self._index[u].entries()), key=lambda t: t[1])

    def edges_between(self, u: int, v: int) -> List[int]:
        return sorted(e for e, nb, _ in self._index[u].entries() if nb == v)

    def weighted_random_neighbor(self, u: int, rng) -> Tuple[int, int]:
        """Neighbor of u chosen with probability w_uv / d(u); rng needs .random()."""
        index = self._index[u]
        if len(index) == 0:
            raise GraphError(f"vertex {u} is isolated")
        return index.sample(rng.random())

    def total_weight(self) -> float:
        return sum(e.weight for e in self.edges.values())

    def max_degree(self) -> int:
        return max(len(ix) for ix in self._index)

    def adjacency_matrix(self) -> np.ndarray:
        A = np.zeros((self.vertex_count, self.vertex_count))
        for e in self.edges.values():
            A[e.u, e.v] += e.weight
            A[e.v, e.u] += e.weight
        return A

    def laplacian(self) -> np.ndarray:
        A = self.adjacency_matrix()
        return np.diag(A.sum(axis=1)) - A

    def components(self) -> Tuple[int, np.ndarray]:
        """(count, labels) of connected components, cached until the next mutation."""
        if self._components is None:
            n = self.vertex_count
            rows = [e.u for e in self.edges.values()]
            cols = [e.v for e in self.edges.values()]
            graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
            self._components = connected_components(graph, directed=False)
        return self._components

    def same_component(self, u: int, v: int) -> bool:
        _, labels = self.components()
        return labels[u] == labels[v]

    def _component_stats(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._stats is None:
            count, labels = self.components()
            sizes = np.bincount(labels, minlength=count)
            edge_labels = [labels[e.u] for e in self.edges.values()]
            edge_counts = np.bincount(np.asarray(edge_labels, dtype=np.int64), minlength=count)
            self._stats = (sizes, edge_counts)
        return self._stats

    def component_size(self, u: int) -> int:
        _, labels = self.components()
        return int(self._component_stats()[0][labels[u]])

    def component_edge_count(self, u: int) -> int:
        _, labels = self.components()
        return int(self._component_stats()[1][labels[u]])

    def copy(self) -> "MultiGraph":
        g = MultiGraph(self.vertex_count, weighted=self.weighted, free_weights=self.free_weights,
                       weight_exponent=self.weight_exponent)
        for edge_id in sorted(self.edges):
            e = self.edges[edge_id]
            g.edges[edge_id] = e
            g._index[e.u].add(edge_id, e.v, e.weight)
            g._index[e.v].add(edge_id, e.u, e.weight)
        g._next_id = self._next_id
        return g

    def __repr__(self) -> str:
        kind = "free" if self.free_weights else ("weighted" if self.weighted else "unweighted")
        return f"MultiGraph(n={self.vertex_count}, m={self.edge_count}, {kind})"


def read_graph(path: str) -> MultiGraph:
    """
    Read the plain text graph format: header `n m weighted|unweighted`
    followed by m lines `u v w`.
    """
    with open(path, 'r', encoding='utf-8') as f:
        lines = [ln for ln in (raw.strip() for raw in f) if ln and not ln.startswith('#')]
    if not lines:
        raise GraphError(f"{path}: empty graph file")
    header = lines[0].split()
    if len(header) != 3 or header[2] not in ("weighted", "unweighted"):
        raise GraphError(f"{path}: bad header {lines[0]!r}")
    n, m = int(header[0]), int(header[1])
    g = MultiGraph(n, weighted=header[2] == "weighted")
    if len(lines) - 1 != m:
        raise GraphError(f"{path}: header promises {m} edges, found {len(lines) - 1}")
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"{path}:{lineno}: expected 'u v w', got {line!r}")
        w = float(parts[2]) if len(parts) == 3 else 1.0
        g.insert_edge(int(parts[0]), int(parts[1]), w)
    logger.debug(f"Read {g!r} from {path}")
    return g


def write_graph(g: MultiGraph, path: str):
    kind = "weighted" if g.weighted else "unweighted"
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"{g.n} {g.edge_count} {kind}\n")
        for edge_id in sorted(g.edges):
            e = g.edges[edge_id]
            f.write(f"{e.u} {e.v} {e.weight:.17g}\n")
