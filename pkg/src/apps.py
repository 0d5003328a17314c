"""
DynSC - Applications
User-facing dynamic data structures built on the sampled Schur complement:
all-pairs effective resistance queries and a Laplacian solver with energy
queries. Each owns its beta choice and rebuild policy: before an operation that
would overrun the current build's budget, the structure is rebuilt from the
current graph with fresh randomness.
"""
import math
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from config import MAX_DEGREE, PROJ_BUDGET_SCALE, SPARSIFIER, SPARSIFY_EPS, WalkConstants, app_constants
from exact_oracle import solve_lap
from graph_core import GraphError, MultiGraph
from projection_dynamic import (
    DegreeBoundError, check_degree, proj_add_terminal, proj_change, proj_edge_update, proj_initialize,
    proj_query, top_demand_vertices,
)
from random_streams import SPARSIFIER as SPARSIFIER_STREAM, epoch_seed, generator
from schur_dynamic import DynamicSC
from sparsify import SparsifierBackend, static_sparsify

logger = logging.getLogger(__name__)

BETA_MAX = 0.5
BETA_MIN = 1e-3


def default_beta(m: int, exponent: float) -> float:
    """m^(-exponent) clamped to [BETA_MIN, BETA_MAX]."""
    return min(BETA_MAX, max(BETA_MIN, max(m, 1) ** -exponent))


def _first_edge(g: MultiGraph, u: int, v: int) -> int:
    edges = g.edges_between(u, v)
    if not edges:
        raise GraphError(f"no edge between {u} and {v}")
    return edges[0]


class DynamicER:
    """Effective resistance between arbitrary vertex pairs of a dynamic graph."""

    def __init__(self, g: MultiGraph, epsilon: float, beta: Optional[float] = None, seed: int = 0,
                 constants: Optional[WalkConstants] = None, sparsifier: str = SPARSIFIER,
                 presparsify: bool = False, epoch: int = 0):
        self.epsilon = epsilon
        self.seed = seed
        self.constants = constants or app_constants()
        self.sparsifier = sparsifier
        self.presparsify = presparsify
        self.epoch = epoch
        self.shadow = g if presparsify else None
        self._beta = beta
        self.rebuilds = 0
        self.ds: Optional[DynamicSC] = None
        self._build(g)

    @property
    def g(self) -> MultiGraph:
        return self.shadow if self.presparsify else self.ds.g

    def _build(self, g: Optional[MultiGraph]):
        seed = epoch_seed(self.seed, self.epoch)
        if self.presparsify:
            work = static_sparsify(self.shadow, SPARSIFY_EPS, generator(seed, SPARSIFIER_STREAM))
        else:
            work = g
        beta = self._beta
        if beta is None:
            beta = default_beta(work.edge_count, 1 / 6 if work.weighted else 1 / 4)
        self.beta = beta
        backend = SparsifierBackend(work.n, mode=self.sparsifier, seed=seed)
        self.ds = DynamicSC.initialize(work, (), beta, self.epsilon / 3, seed=seed,
                                       constants=self.constants, sparsifier=backend)

    def rebuild(self):
        self.epoch += 1
        self.rebuilds += 1
        logger.info(f"Rebuilding DynamicER (epoch {self.epoch}, m={self.g.edge_count})")
        self._build(self.ds.g)

    def _ensure_capacity(self, needed: int):
        if self.ds.ops_since_build + needed > self.ds.budget:
            self.rebuild()

    @property
    def ops_since_rebuild(self) -> int:
        return self.ds.ops_since_build

    def insert(self, u: int, v: int, w: float = 1.0) -> int:
        if self.presparsify:
            self._ensure_capacity(1)
            edge_id = self.shadow.insert_edge(u, v, w)
            self.ds.insert(u, v, w)
            return edge_id
        self._ensure_capacity(1)
        return self.ds.insert(u, v, w)

    def delete(self, u: int, v: int):
        """Delete one (u, v) edge, the one with the smallest id."""
        if self.presparsify:
            self.shadow.delete_edge(_first_edge(self.shadow, u, v))
            self.rebuild()
            return
        self._ensure_capacity(1)
        self.ds.delete(_first_edge(self.ds.g, u, v))

    def add_terminal(self, u: int):
        self._ensure_capacity(1)
        self.ds.add_terminal(u)

    def er_query(self, s: int, t: int) -> float:
        if s == t:
            return 0.0
        self._ensure_capacity(2)
        self.ds.add_terminal(s)
        self.ds.add_terminal(t)
        current = self.ds.current_sparsifier()
        if not current.graph.same_component(s, t):
            return math.inf
        T = current.terminals
        index = {v: i for i, v in enumerate(T)}
        rhs = np.zeros(len(T))
        rhs[index[s]], rhs[index[t]] = 1.0, -1.0
        x = solve_lap(current.laplacian(), rhs, self.epsilon / 3)
        return float(x[index[s]] - x[index[t]])


class DynamicSolver:
    """
    Laplacian solver for a dynamic bounded-degree graph and demand vector.

    Potentials are only meaningful up to a constant per connected component.
    """

    def __init__(self, g: MultiGraph, b: Sequence[float], epsilon: float, beta: Optional[float] = None,
                 seed: int = 0, constants: Optional[WalkConstants] = None, max_degree: int = MAX_DEGREE,
                 budget_scale: float = PROJ_BUDGET_SCALE, sparsifier: str = SPARSIFIER, epoch: int = 0):
        check_degree(g, max_degree)
        self.epsilon = epsilon
        self.seed = seed
        self.constants = constants or app_constants()
        self.max_degree = max_degree
        self.budget_scale = budget_scale
        self.sparsifier = sparsifier
        self.epoch = epoch
        self._beta = beta
        self.rebuilds = 0
        self.energy_free = 0.0
        self._build(g, np.asarray(b, dtype=float))

    @property
    def g(self) -> MultiGraph:
        return self.ds.g

    def _build(self, g: MultiGraph, b: np.ndarray):
        seed = epoch_seed(self.seed, self.epoch)
        beta = self._beta if self._beta is not None else default_beta(g.edge_count, 1 / 12)
        self.beta = beta
        T_prime = set(top_demand_vertices(b, int(math.ceil(beta * g.edge_count))))
        count, labels = g.components()
        covered = {labels[t] for t in T_prime}
        for c in range(count):
            members = np.nonzero(labels == c)[0]
            if c not in covered and np.any(b[members] != 0):
                T_prime.add(int(members[0]))
        backend = SparsifierBackend(g.n, mode=self.sparsifier, seed=seed)
        self.ds = DynamicSC.initialize(g, T_prime, beta, self.epsilon, seed=seed,
                                       constants=self.constants, sparsifier=backend)
        self.pj = proj_initialize(g, b, set(self.ds.terminals), beta, self.epsilon,
                                  max_degree=self.max_degree, budget_scale=self.budget_scale)
        total = float(b @ solve_lap(g.laplacian(), b, self.epsilon / 10)) if np.any(b) else 0.0
        self.energy_free = total - self._projected_energy()
        logger.info(f"Built DynamicSolver: beta={beta:.3f}, |T|={len(self.ds.terminals)}, "
                    f"sc budget={self.ds.budget}, projection budget={self.pj.ops_budget}")

    def rebuild(self):
        self.epoch += 1
        self.rebuilds += 1
        logger.info(f"Rebuilding DynamicSolver (epoch {self.epoch}, m={self.g.edge_count})")
        self._build(self.ds.g, self.pj.demand())

    def _ensure_capacity(self, sc_ops: int, proj_ops: int):
        if (self.ds.ops_since_build + sc_ops > self.ds.budget
                or self.pj.ops_used + proj_ops > self.pj.ops_budget):
            self.rebuild()

    @property
    def ops_since_rebuild(self) -> int:
        return self.ds.ops_since_build

    def _promote_pair(self, u: int, v: int):
        self.ds.add_terminal(u)
        self.ds.add_terminal(v)

    def solve_terminals(self) -> Tuple[List[int], np.ndarray]:
        """Approximate potentials on the current terminal set."""
        current = self.ds.current_sparsifier()
        T = current.terminals
        rhs = proj_query(self.pj)[T]
        return T, solve_lap(current.laplacian(), rhs, self.epsilon / 10)

    def add_terminal(self, u: int):
        self._ensure_capacity(1, 1)
        self.ds.add_terminal(u)
        proj_add_terminal(self.pj, u)

    def solve_query(self, u: int) -> float:
        self.add_terminal(u)
        T, x = self.solve_terminals()
        return float(x[T.index(u)])

    def potential_difference(self, u: int, v: int) -> float:
        """x̃(u) - x̃(v) from a single solve after promoting both vertices."""
        self._ensure_capacity(2, 1)
        self._promote_pair(u, v)
        proj_edge_update(self.pj, u, v)
        T, x = self.solve_terminals()
        return float(x[T.index(u)] - x[T.index(v)])

    def _projected_energy(self) -> float:
        current = self.ds.current_sparsifier()
        rhs = proj_query(self.pj)[current.terminals]
        if not np.any(rhs):
            return 0.0
        return float(rhs @ solve_lap(current.laplacian(), rhs, self.epsilon / 10))

    def energy_query(self) -> float:
        return self._projected_energy() + self.energy_free

    def change(self, u: int, bu: float, v: int, bv: float):
        self._ensure_capacity(2, 1)
        proj_change(self.pj, u, bu, v, bv)
        self._promote_pair(u, v)

    def _check_insert_degree(self, u: int, v: int):
        for x in (u, v):
            if self.g.degree(x) + 1 > self.max_degree:
                raise DegreeBoundError(f"inserting ({u}, {v}) pushes vertex {x} past degree {self.max_degree}")

    def insert(self, u: int, v: int, w: float = 1.0) -> int:
        self._check_insert_degree(u, v)
        self._ensure_capacity(1, 1)
        proj_edge_update(self.pj, u, v)
        return self.ds.insert(u, v, w)

    def delete(self, u: int, v: int):
        edge_id = _first_edge(self.g, u, v)
        self._ensure_capacity(1, 1)
        proj_edge_update(self.pj, u, v)
        self.ds.delete(edge_id)
