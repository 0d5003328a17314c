"""
DynSC - Second-Level Sparsifier
Backends that turn the sampled Schur complement H into the graph H̃ handed to
queries. The identity backend mirrors H edge for edge; the periodic backend
keeps a leverage-score sample of H, re-sampling it every few deltas and
passing edges inserted since the last sample through unchanged.
"""
import math
from typing import Dict, Hashable, Iterable, List, Optional, Set, Tuple
import logging

import numpy as np

from config import REBUILD_EVERY, SPARSIFIER, SPARSIFIER_BACKENDS, SPARSIFY_C, SPARSIFY_EPS
from exact_oracle import pinv
from graph_core import GraphError, MultiGraph
from random_streams import SPARSIFIER as SPARSIFIER_STREAM, generator
from walk_engine import HEdge

logger = logging.getLogger(__name__)


def sample_count(active_vertices: int, eps_s: float, c: float = SPARSIFY_C) -> int:
    n = max(active_vertices, 2)
    return int(math.ceil(c * n * math.log(n) / eps_s ** 2))


def static_sparsify(g: MultiGraph, eps_s: float, rng: np.random.Generator, c: float = SPARSIFY_C) -> MultiGraph:
    """
    Leverage-score spectral sparsifier of g.

    Edges are drawn with replacement proportionally to w_e * ER_e and each
    draw carries weight w_e / (q p_e), so the expected Laplacian equals L_g.
    Graphs already below the sample count are returned as a copy.
    """
    if not (0 < eps_s < 1):
        raise ValueError(f"eps_s must lie in (0, 1), got {eps_s}")
    active = sum(1 for v in range(g.n) if g.degree(v) > 0)
    q = sample_count(active, eps_s, c)
    if g.edge_count <= q:
        return g.copy()

    edge_ids = sorted(g.edges)
    edges = [g.edges[e] for e in edge_ids]
    P = pinv(g.laplacian())
    u = np.array([e.u for e in edges])
    v = np.array([e.v for e in edges])
    w = np.array([e.weight for e in edges])
    resistance = np.clip(P[u, u] + P[v, v] - 2 * P[u, v], 0.0, None)
    scores = w * resistance
    probs = scores / scores.sum()
    counts = rng.multinomial(q, probs)

    out = MultiGraph(g.n, free_weights=True)
    for i in np.nonzero(counts)[0]:
        out.insert_edge(int(u[i]), int(v[i]), float(w[i] * counts[i] / (q * probs[i])))
    logger.debug(f"Sparsified {g.edge_count} edges down to {out.edge_count} (q={q})")
    return out


class SparsifierBackend:
    """
    Holds H (edges keyed by the caller, usually sample ids) and its current
    sparsified view. Loops carry no Laplacian mass and are tracked by key only.
    """

    def __init__(self, n: int, mode: str = SPARSIFIER, rebuild_every: int = REBUILD_EVERY,
                 eps_s: float = SPARSIFY_EPS, seed: int = 0):
        if mode not in SPARSIFIER_BACKENDS:
            raise ValueError(f"unknown sparsifier backend {mode!r}, expected one of {SPARSIFIER_BACKENDS}")
        if rebuild_every < 1:
            raise ValueError(f"rebuild_every must be positive, got {rebuild_every}")
        self.mode = mode
        self.rebuild_every = rebuild_every
        self.eps_s = eps_s
        self.seed = seed
        self.H = MultiGraph(n, free_weights=True)
        self._key_edge: Dict[Hashable, int] = {}
        self._loops: Set[Hashable] = set()
        self._view: Optional[MultiGraph] = None
        self._fresh: Dict[Hashable, int] = {}
        self._stale = True
        self._since_rebuild = 0
        self.rebuilds = 0

    @property
    def n(self) -> int:
        return self.H.n

    def __contains__(self, key: Hashable) -> bool:
        return key in self._key_edge or key in self._loops

    def __len__(self) -> int:
        return len(self._key_edge) + len(self._loops)

    def keys(self) -> Set[Hashable]:
        return set(self._key_edge) | self._loops

    def load(self, edges: Iterable[Tuple[Hashable, HEdge]]):
        """Bulk insert at initialization; the view is rebuilt once afterwards."""
        for key, h in edges:
            self._insert_raw(key, h)
        self._stale = True
        self._since_rebuild = 0

    def _insert_raw(self, key: Hashable, h: HEdge) -> Optional[int]:
        if key in self:
            raise GraphError(f"H-edge key {key!r} already present")
        if h.is_loop:
            self._loops.add(key)
            return None
        edge_id = self.H.insert_edge(h.t1, h.t2, h.weight)
        self._key_edge[key] = edge_id
        return edge_id

    def _delete_raw(self, key: Hashable) -> Optional[int]:
        if key in self._loops:
            self._loops.discard(key)
            return None
        edge_id = self._key_edge.pop(key, None)
        if edge_id is None:
            raise GraphError(f"unknown H-edge key {key!r}")
        self.H.delete_edge(edge_id)
        return edge_id

    def apply_delta(self, inserts: Iterable[Tuple[Hashable, HEdge]] = (), deletes: Iterable[Hashable] = ()):
        """Apply H-edge deletions then insertions; one call counts as one delta."""
        deletes = list(deletes)
        inserts = list(inserts)
        for key in deletes:
            if key not in self:
                raise GraphError(f"unknown H-edge key {key!r}")
        for key in deletes:
            was_loop = key in self._loops
            self._delete_raw(key)
            if self.mode == "periodic" and not self._stale:
                fresh_id = self._fresh.pop(key, None)
                if fresh_id is not None:
                    self._view.delete_edge(fresh_id)
                elif not was_loop:
                    # part of the sampled snapshot, cannot be removed exactly
                    self._stale = True
        for key, h in inserts:
            self._insert_raw(key, h)
            if self.mode == "periodic" and not self._stale and not h.is_loop:
                self._fresh[key] = self._view.insert_edge(h.t1, h.t2, h.weight)
        if self.mode == "periodic":
            self._since_rebuild += 1
            if self._since_rebuild >= self.rebuild_every:
                self._stale = True

    def _resparsify(self):
        rng = generator(self.seed, SPARSIFIER_STREAM, self.rebuilds)
        self._view = static_sparsify(self.H, self.eps_s, rng)
        self._fresh = {}
        self._stale = False
        self._since_rebuild = 0
        self.rebuilds += 1
        logger.debug(f"Re-sparsified H: {self.H.edge_count} -> {self._view.edge_count} edges")

    def view(self) -> MultiGraph:
        """Current H̃; the identity backend returns H itself."""
        if self.mode == "identity":
            return self.H
        if self._stale or self._view is None:
            self._resparsify()
        return self._view

    def edge_multiset(self) -> List[HEdge]:
        out = [HEdge.between(e.u, e.v, e.weight) for e in self.view().edges.values()]
        return sorted(out)
