"""
DynSC - Dynamic Projection
Maintains b̃, an approximation of the projection of a demand vector b onto a
terminal set S (the demand each terminal receives when the demand of every
non-terminal is carried by a random walk to the first terminal it hits).
Initialization solves one Laplacian system on the graph with S contracted;
afterwards terminal additions are lazy (b̃ gets a zero entry) and demand
changes on terminals are applied to b̃ directly, which leaves the error
vector untouched. The accumulated error stays small for a limited number of
operations, after which the owner rebuilds.
"""
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Set, Tuple
import logging

import numpy as np
import scipy.linalg as la

from config import MAX_DEGREE, PROJ_BUDGET_SCALE
from exact_oracle import NotInRangeError, exact_projection, pinv_norm, solve_lap
from graph_core import DynSCError, GraphError, MultiGraph
from schur_dynamic import NeedsRebuild

logger = logging.getLogger(__name__)


class DegreeBoundError(DynSCError):
    """The graph exceeds the configured maximum degree."""


@dataclass
class ProjectionState:
    """
    Lazy projection state. `b` and `b_tilde` are stored in scaled units
    (b multiplied by `scale`); `b_tilde` is zero off S.
    """
    g: MultiGraph
    S: Set[int]
    b: np.ndarray
    b_tilde: np.ndarray
    scale: float
    epsilon: float
    beta: float
    ops_budget: int
    ops_used: int = 0
    max_degree: int = MAX_DEGREE
    added: List[int] = field(default_factory=list)

    @property
    def exhausted(self) -> bool:
        return self.ops_used >= self.ops_budget

    def demand(self) -> np.ndarray:
        """Current b in caller units."""
        return self.b / self.scale

    def on_terminals(self) -> Tuple[List[int], np.ndarray]:
        T = sorted(self.S)
        return T, self.b_tilde[T] / self.scale


def top_demand_vertices(b: Sequence[float], k: int) -> List[int]:
    """The k vertices of largest |b|, ties broken by smaller vertex id."""
    b = np.asarray(b, dtype=float)
    order = sorted(range(len(b)), key=lambda v: (-abs(b[v]), v))
    return sorted(order[:max(0, k)])


def projection_budget(g: MultiGraph, beta: float, epsilon: float, scale: float = PROJ_BUDGET_SCALE) -> int:
    m = max(g.edge_count, 1)
    log_n = math.log(max(g.n, 2))
    return max(1, int(math.ceil(scale * beta ** 3 * math.sqrt(m) * epsilon / log_n ** 3)))


def check_range(g: MultiGraph, b: np.ndarray, tol: float = 1e-9):
    _, labels = g.components()
    sums = np.bincount(labels, weights=b)
    bound = tol * max(1.0, float(np.abs(b).max()) if len(b) else 1.0) * max(1, len(b))
    if np.any(np.abs(sums) > bound):
        raise NotInRangeError(f"demand does not sum to zero on every component: {sums.tolist()}")


def check_degree(g: MultiGraph, max_degree: int):
    worst = g.max_degree()
    if worst > max_degree:
        raise DegreeBoundError(f"maximum degree {worst} exceeds bound {max_degree}")


def contracted_projection(g: MultiGraph, b: np.ndarray, S: Set[int], epsilon: float) -> np.ndarray:
    """
    (b - L v)|_S where v solves the system with S contracted to one vertex
    and vanishes on S; zero off S.
    """
    n = g.n
    if not S:
        return np.zeros(n)
    F = [v for v in range(n) if v not in S]
    if not F:
        out = np.zeros(n)
        out[sorted(S)] = b[sorted(S)]
        return out
    col = np.full(n, len(F))
    col[F] = np.arange(len(F))
    C = np.zeros((n, len(F) + 1))
    C[np.arange(n), col] = 1.0
    L = g.laplacian()
    L_c = C.T @ L @ C
    v_c = solve_lap(L_c, C.T @ b, epsilon)
    v = C @ (v_c - v_c[-1])
    r = b - L @ v
    out = np.zeros(n)
    terminals = sorted(S)
    out[terminals] = r[terminals]
    return out


def proj_initialize(g: MultiGraph, b: Sequence[float], S_prime: Iterable[int], beta: float, epsilon: float,
                    max_degree: int = MAX_DEGREE, budget_scale: float = PROJ_BUDGET_SCALE) -> ProjectionState:
    """
    Approximate Proj_S b with one solver call.

    Components carrying demand but no vertex of S get their smallest vertex
    added to S so the projection exists.
    """
    b = np.asarray(b, dtype=float).copy()
    if len(b) != g.n:
        raise ValueError(f"demand has {len(b)} entries for {g.n} vertices")
    check_range(g, b)
    check_degree(g, max_degree)
    S = set(int(s) for s in S_prime)
    count, labels = g.components()
    covered = {labels[s] for s in S}
    for c in range(count):
        members = np.nonzero(labels == c)[0]
        if c not in covered and np.any(b[members] != 0):
            S.add(int(members[0]))

    outside = [abs(b[v]) for v in range(g.n) if v not in S]
    threshold = max(outside) if outside else 0.0
    if threshold <= 0:
        threshold = float(np.abs(b).max()) if np.any(b) else 1.0
    scale = 1.0 / threshold
    b *= scale

    b_tilde = contracted_projection(g, b, S, epsilon)
    budget = projection_budget(g, beta, epsilon, budget_scale)
    logger.info(f"Initialized projection: |S|={len(S)}, scale={scale:.3g}, budget={budget}")
    return ProjectionState(g, S, b, b_tilde, scale, epsilon, beta, budget, max_degree=max_degree)


def _spend(st: ProjectionState):
    if st.ops_used >= st.ops_budget:
        raise NeedsRebuild(f"projection budget {st.ops_budget} exhausted")
    st.ops_used += 1


def _lazy_add(st: ProjectionState, u: int):
    if not (0 <= u < st.g.n):
        raise GraphError(f"vertex {u} out of range 0..{st.g.n - 1}")
    if u not in st.S:
        st.S.add(u)
        st.added.append(u)


def proj_add_terminal(st: ProjectionState, u: int):
    _spend(st)
    _lazy_add(st, u)


def proj_edge_update(st: ProjectionState, u: int, v: int):
    """Promote both endpoints ahead of an edge change between them."""
    _spend(st)
    _lazy_add(st, u)
    _lazy_add(st, v)


def proj_change(st: ProjectionState, u: int, bu_new: float, v: int, bv_new: float):
    """Set b(u), b(v) to new values (caller units); the total must be preserved."""
    du = bu_new * st.scale - st.b[u]
    dv = bv_new * st.scale - st.b[v]
    if u == v:
        if abs(bu_new - bv_new) > 1e-12 * max(1.0, abs(bu_new)):
            raise ValueError(f"conflicting values for vertex {u}")
        dv = 0.0
    tol = 1e-9 * max(1.0, abs(du), abs(dv))
    if not st.g.same_component(u, v):
        if abs(du) > tol or abs(dv) > tol:
            raise NotInRangeError(f"change moves demand between components of {u} and {v}")
    elif abs(du + dv) > tol:
        raise NotInRangeError(f"change alters the total demand by {(du + dv) / st.scale:.3e}")
    _spend(st)
    _lazy_add(st, u)
    _lazy_add(st, v)
    st.b[u] += du
    st.b_tilde[u] += du
    if u != v:
        st.b[v] += dv
        st.b_tilde[v] += dv


def proj_query(st: ProjectionState) -> np.ndarray:
    """Current b̃ in caller units as an n-vector, zero off S."""
    return st.b_tilde / st.scale


def exact_projected(st: ProjectionState) -> np.ndarray:
    """Exact Proj_S b (caller units) as an n-vector."""
    L = st.g.laplacian()
    T = sorted(st.S)
    out = np.zeros(st.g.n)
    out[T] = exact_projection(L, T, strict=False) @ st.demand()
    return out


def projection_error(st: ProjectionState) -> float:
    """||b̃ - Proj b||_{L†} / ||b||_{L†}; zero when b is zero."""
    L = st.g.laplacian()
    b = st.demand()
    denom = pinv_norm(L, b)
    if denom == 0:
        return 0.0
    return pinv_norm(L, proj_query(st) - exact_projected(st)) / denom


def expected_load(g: MultiGraph, S: Iterable[int], u: int, b: Sequence[float]) -> float:
    """
    b-weighted mass that reaches u before S: b(u) plus, for every other
    non-terminal v, b(v) times the probability that a walk from v visits u
    before hitting S.
    """
    S = set(S)
    b = np.asarray(b, dtype=float)
    if u in S:
        return 0.0
    _, labels = g.components()
    component = [v for v in range(g.n) if labels[v] == labels[u]]
    rest = [v for v in component if v != u and v not in S]
    load = float(b[u])
    if not rest:
        return load
    if not any(labels[s] == labels[u] for s in S):
        return load + float(b[rest].sum())
    L = g.laplacian()
    h = la.solve(L[np.ix_(rest, rest)], -L[rest, u], assume_a='pos')
    return load + float(b[rest] @ h)


def promotion_error_direction(g: MultiGraph, S: Iterable[int], u: int, b: Sequence[float]) -> np.ndarray:
    """-N_u (1_u - Proj_S 1_u): the change of b̃ - Proj b when u joins S lazily."""
    S = set(S)
    N = expected_load(g, S, u, b)
    T = sorted(S)
    column = exact_projection(g.laplacian(), T, strict=False)[:, u]
    direction = np.zeros(g.n)
    direction[u] = 1.0
    direction[T] -= column
    return -N * direction


def degree_identity(g: MultiGraph, u: int, t: int) -> Tuple[float, float]:
    """
    (sum_v d(v) Pr[walk from v is at u after t steps], d(u)).

    The two agree exactly because d is stationary for the walk.
    """
    A = g.adjacency_matrix()
    d = A.sum(axis=1)
    P = np.zeros_like(A)
    moving = d > 0
    P[moving] = A[moving] / d[moving, None]
    P[~moving, ~moving] = 1.0
    lhs = float(d @ np.linalg.matrix_power(P, t)[:, u])
    return lhs, float(d[u])
