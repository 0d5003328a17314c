"""
DynSC - Dynamic Schur Complement
Maintains a sampled approximation H of the Schur complement of a dynamic graph
onto a growing terminal set. Every edge owns rho samples, each a pair of
truncated walks from its endpoints; a sample whose two halves both stop on
terminals contributes one H-edge. Insertions add rho trivial samples, deletions
first promote the endpoints so the edge's samples collapse to trivial ones and
can be removed, and promoting a vertex cuts the walks passing through it.
After about beta*m operations the structure asks its owner to rebuild.
"""
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Set, Tuple
import logging

import numpy as np

from config import SPARSIFIER, WalkConstants, walk_constants
from graph_core import DynSCError, GraphError, MultiGraph
from random_streams import TERMINALS, generator, walk_stream
from sparsify import SparsifierBackend
from walk_engine import HEdge, HEdgeDelta, Walk, WalkStatus, WalkStore, generate_unweighted_walk
from weighted_walk import cover_bound, generate_weighted_walk

logger = logging.getLogger(__name__)


class NeedsRebuild(DynSCError):
    """The operation budget of the current build is exhausted."""


def copies_per_edge(n: int, epsilon: float, c_rho: float) -> int:
    return max(1, int(math.ceil(c_rho * math.log(max(n, 2)) / epsilon ** 2)))


@dataclass
class ApproxSchur:
    """The sparsified Schur complement as handed to queries: a graph on the terminals."""
    terminals: List[int]
    graph: MultiGraph

    def laplacian(self) -> np.ndarray:
        """Laplacian restricted to the terminals, rows in sorted terminal order."""
        L = self.graph.laplacian()
        return L[np.ix_(self.terminals, self.terminals)]

    def edge_multiset(self) -> List[HEdge]:
        return sorted(HEdge.between(e.u, e.v, e.weight) for e in self.graph.edges.values())


class DynamicSC:
    def __init__(self, g: MultiGraph, terminals: Set[int], required: Set[int], beta: float, epsilon: float,
                 seed: int, constants: WalkConstants, backend: SparsifierBackend, weighted: bool):
        self.g = g
        self.terminals = terminals
        self.required = frozenset(required)
        self.beta = beta
        self.epsilon = epsilon
        self.seed = seed
        self.constants = constants
        self.backend = backend
        self.weighted = weighted
        self.rho = copies_per_edge(g.n, epsilon, constants.c_rho)
        self.store = WalkStore(self.rho)
        self.budget = max(2, int(math.ceil(beta * g.edge_count)))
        self.ops_since_build = 0
        self._cover_bound: Optional[int] = None

    @classmethod
    def initialize(cls, g: MultiGraph, T_prime: Iterable[int], beta: float, epsilon: float, seed: int = 0,
                   constants: Optional[WalkConstants] = None, sparsifier: Optional[SparsifierBackend] = None,
                   sample_terminals: bool = True, weighted: Optional[bool] = None) -> "DynamicSC":
        """
        Build the structure over g (which it then owns and mutates).

        Terminals are T' plus both endpoints of each edge kept with
        probability beta; with sample_terminals=False only T' is used.
        """
        if not (0 < beta < 1):
            raise ValueError(f"beta must lie in (0, 1), got {beta}")
        if not (0 < epsilon < 1):
            raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
        constants = constants or walk_constants()
        weighted = g.weighted if weighted is None else weighted
        required = set(int(t) for t in T_prime)
        for t in required:
            if not (0 <= t < g.n):
                raise GraphError(f"terminal {t} out of range 0..{g.n - 1}")
        terminals = set(required)
        if sample_terminals and g.edge_count:
            draws = generator(seed, TERMINALS).random(g.edge_count)
            for draw, edge_id in zip(draws, sorted(g.edges)):
                if draw < beta:
                    e = g.edges[edge_id]
                    terminals.update((e.u, e.v))
        backend = sparsifier or SparsifierBackend(g.n, mode=SPARSIFIER, seed=seed)
        ds = cls(g, terminals, required, beta, epsilon, seed, constants, backend, weighted)
        ds._populate()
        logger.info(f"Initialized DynamicSC over {g!r}: |T|={len(terminals)}, rho={ds.rho}, "
                    f"samples={len(ds.store.samples)}, budget={ds.budget}")
        return ds

    def _walk(self, start: int, rng) -> Walk:
        if not self.weighted:
            return generate_unweighted_walk(self.g, self.terminals, start, self.beta, rng, self.constants)
        if self._cover_bound is None:
            self._cover_bound = cover_bound(self.g, self.constants)
        record = generate_weighted_walk(self.g, self.terminals, start, self.beta, self.epsilon, rng,
                                        self.constants, M=self._cover_bound)
        return record.to_walk()

    def _edge_cost(self, weight: float) -> float:
        return 1.0 / weight if self.weighted else 1.0

    def _populate(self):
        for edge_id in sorted(self.g.edges):
            e = self.g.edges[edge_id]
            cost = self._edge_cost(e.weight)
            for copy_index in range(self.rho):
                first = self._walk(e.u, walk_stream(self.seed, edge_id, copy_index, 1))
                second = self._walk(e.v, walk_stream(self.seed, edge_id, copy_index, 2))
                self.store.add_sample(edge_id, copy_index, cost, first, second)
        self.backend.load(self.store.hedges().items())

    # operations

    def _spend(self):
        if self.ops_since_build >= self.budget:
            raise NeedsRebuild(f"operation budget {self.budget} exhausted")
        self.ops_since_build += 1

    def _apply(self, deltas: Iterable[HEdgeDelta]):
        deltas = list(deltas)
        if not deltas:
            return
        self.backend.apply_delta(
            inserts=[(d.sample_id, d.new) for d in deltas if d.new is not None],
            deletes=[d.sample_id for d in deltas if d.old is not None],
        )

    def _promote(self, u: int):
        if u in self.terminals:
            return
        self.terminals.add(u)
        deltas = self.store.shorten_at(u)
        self._apply(deltas)
        logger.debug(f"Promoted {u}: {len(deltas)} H-edges changed")

    def add_terminal(self, u: int):
        if not (0 <= u < self.g.n):
            raise GraphError(f"vertex {u} out of range 0..{self.g.n - 1}")
        self._spend()
        self._promote(u)

    def insert(self, u: int, v: int, w: float = 1.0) -> int:
        if self.ops_since_build >= self.budget:
            raise NeedsRebuild(f"operation budget {self.budget} exhausted")
        edge_id = self.g.insert_edge(u, v, w)
        self._spend()
        self._promote(u)
        self._promote(v)
        cost = self._edge_cost(self.g.edges[edge_id].weight)
        inserts = []
        for copy_index in range(self.rho):
            first = Walk([u], [0.0], WalkStatus.REACHED, terminal=u)
            second = Walk([v], [0.0], WalkStatus.REACHED, terminal=v)
            sample_id = self.store.add_sample(edge_id, copy_index, cost, first, second)
            inserts.append((sample_id, self.store.hedge(sample_id)))
        self.backend.apply_delta(inserts=inserts)
        return edge_id

    def delete(self, edge_id: int):
        edge = self.g.edge(edge_id)
        self._spend()
        self._promote(edge.u)
        self._promote(edge.v)
        deletes = []
        for sample_id in self.store.samples_for_edge(edge_id):
            if self.store.remove_sample(sample_id) is not None:
                deletes.append(sample_id)
        self.backend.apply_delta(deletes=deletes)
        self.g.delete_edge(edge_id)

    def current_sparsifier(self) -> ApproxSchur:
        return ApproxSchur(sorted(self.terminals), self.backend.view())

    # inspection

    @property
    def exhausted(self) -> bool:
        return self.ops_since_build >= self.budget

    def h_multiset(self) -> List[HEdge]:
        """Every sampled H-edge, loops included."""
        return sorted(self.store.hedges().values())

    def sparsifier_laplacian(self) -> Tuple[List[int], np.ndarray]:
        current = self.current_sparsifier()
        return current.terminals, current.laplacian()

    def check_invariants(self) -> List[str]:
        issues = self.store.audit(self.terminals)
        if not self.required <= self.terminals:
            issues.append("required terminals missing from T")
        if self.ops_since_build > self.budget:
            issues.append(f"ops {self.ops_since_build} beyond budget {self.budget}")
        hedges = self.store.hedges()
        if set(hedges) != self.backend.keys():
            issues.append("backend keys disagree with completed samples")
        for sample_id, h in hedges.items():
            if h.t1 not in self.terminals or h.t2 not in self.terminals:
                issues.append(f"sample {sample_id} ends off the terminal set")
        for edge_id in self.g.edges:
            if len(self.store.samples_for_edge(edge_id)) != self.rho:
                issues.append(f"edge {edge_id} does not own {self.rho} samples")
        return issues
