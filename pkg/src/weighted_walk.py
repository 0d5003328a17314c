"""
DynSC - Weighted Walk Engine
Event-driven simulation of weighted random walks. Instead of stepping through
every move (hopeless when a heavy edge traps the walk for n^10 steps), each
event jumps straight to the next new vertex: the exit time from the visited set
U is drawn by binary search over the exit probabilities of a small absorbing
kernel, the crossing edge is drawn from the walk's distribution at the step
before exit, and the weight of the confined stretch inside U is drawn from the
bucketed walk weight distributions.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple
import logging

import numpy as np

from config import WalkConstants, walk_constants
from graph_core import DynSCError, MultiGraph
from pmf_approx import DistribTable, eps0_for
from walk_engine import Walk, WalkStatus

logger = logging.getLogger(__name__)


class CoverBoundError(DynSCError):
    """The walk is unlikely to leave U within the configured step bound."""


def matrix_power_apply(W: np.ndarray, p0: np.ndarray, i: int) -> np.ndarray:
    """W^i p0 by repeated squaring."""
    if i < 0:
        raise ValueError(f"exponent must be non-negative, got {i}")
    result = np.array(p0, dtype=float)
    base = np.array(W, dtype=float)
    while i:
        if i & 1:
            result = base @ result
        i >>= 1
        if i:
            base = base @ base
    return result


class ExitKernel:
    """
    Absorbing kernel for a walk inside U.

    Column-oriented: state_{i} = W state_{i-1}, the first k entries are the
    probabilities of being at each vertex of U without having left, and the
    last entry is the probability of having left U by step i.
    """

    def __init__(self, g: MultiGraph, U: Sequence[int], start: int):
        self.vertices = list(U)
        self.position = {v: i for i, v in enumerate(self.vertices)}
        if start not in self.position:
            raise ValueError(f"start {start} is not in U")
        k = len(self.vertices)
        W = np.zeros((k + 1, k + 1))
        self.boundary = np.zeros(k)
        self.degrees = np.zeros(k)
        for j, u in enumerate(self.vertices):
            d = g.weighted_degree(u)
            self.degrees[j] = d
            if d <= 0:
                continue
            for nb, _, w in g.neighbors(u):
                i = self.position.get(nb)
                if i is None:
                    W[k, j] += w / d
                    self.boundary[j] += w
                else:
                    W[i, j] += w / d
        W[k, k] = 1.0
        self.matrix = W
        self.p0 = np.zeros(k + 1)
        self.p0[self.position[start]] = 1.0
        self.start = start
        self._squares: List[np.ndarray] = [W]
        self._exit: Dict[int, float] = {0: 0.0}

    @property
    def size(self) -> int:
        return len(self.vertices)

    def _square(self, level: int) -> np.ndarray:
        while len(self._squares) <= level:
            last = self._squares[-1]
            self._squares.append(last @ last)
        return self._squares[level]

    def state(self, i: int) -> np.ndarray:
        result = self.p0.copy()
        level = 0
        while i:
            if i & 1:
                result = self._square(level) @ result
            i >>= 1
            level += 1
        return result

    def p_new(self, i: int) -> float:
        cached = self._exit.get(i)
        if cached is None:
            cached = float(self.state(i)[-1])
            self._exit[i] = cached
        return cached


def cover_bound(g: MultiGraph, constants: Optional[WalkConstants] = None) -> int:
    """Step bound M within which a walk leaves any proper subset of its component w.h.p."""
    constants = constants or walk_constants()
    m = max(g.edge_count, 1)
    n = max(g.n, 2)
    hitting = max(m ** 3, math.ceil(2 * g.total_weight() * n))
    return int(math.ceil(constants.c_cover * math.ceil(math.log(n) + 1) * hitting))


def sample_exit_time(kernel: ExitKernel, M: int, rng, cover_tol: Optional[float] = None) -> int:
    """
    First step at which the walk leaves U, by randomized binary search over
    [0, M] using the cumulative exit probabilities.
    """
    if cover_tol is None:
        cover_tol = max(kernel.size, 2) ** -2.0
    p_M = kernel.p_new(M)
    if p_M < 1 - cover_tol:
        raise CoverBoundError(f"exit probability {p_M:.3e} at step {M} below 1 - {cover_tol:.1e}")
    if rng.random() >= p_M:
        raise CoverBoundError(f"walk still inside U after {M} steps")
    lo, hi, lo_p, hi_p = 0, M, 0.0, p_M
    while lo != hi:
        eta = (lo + hi) // 2
        p_eta = kernel.p_new(eta)
        spread = hi_p - lo_p
        if spread < 1e-15:
            go_left = p_eta > lo_p
        else:
            go_left = rng.random() < (p_eta - lo_p) / spread
        if go_left:
            hi, hi_p = eta, p_eta
        else:
            lo, lo_p = eta + 1, p_eta
    return lo


def sample_exit_edge(g: MultiGraph, kernel: ExitKernel, X: int, rng) -> Tuple[int, int, int]:
    """
    Edge through which the walk leaves U at step X.

    The walk is at v at step X-1 with probability q(v) and steps out with
    probability w(v, V\\U)/d(v), so v is drawn proportionally to the product;
    the crossing edge is then drawn from v's incidence index with the edges
    back into U switched off.
    """
    if X < 1:
        raise ValueError(f"exit time must be at least 1, got {X}")
    q = kernel.state(X - 1)[:-1]
    with np.errstate(divide='ignore', invalid='ignore'):
        rates = np.where(kernel.degrees > 0, kernel.boundary / kernel.degrees, 0.0)
    weights = np.clip(q, 0.0, None) * rates
    R = float(weights.sum())
    if R <= 0.0:
        raise CoverBoundError("no probability mass on the boundary of U")
    cdf = np.cumsum(weights)
    idx = min(int(np.searchsorted(cdf, rng.random() * R, side='right')), len(cdf) - 1)
    while weights[idx] <= 0.0:
        idx -= 1
    exit_from = kernel.vertices[idx]
    index = g.incidence(exit_from)
    inside = [e for e, nb, _ in index.entries() if nb in kernel.position]
    with index.temporarily_zeroed(inside):
        exit_to, edge_id = index.sample(rng.random())
    return exit_from, exit_to, edge_id


@dataclass
class WeightedWalkRecord:
    start: int
    L_w: List[int] = field(default_factory=list)
    L_s: List[float] = field(default_factory=list)
    status: WalkStatus = WalkStatus.TRUNCATED
    terminal: Optional[int] = None
    events: int = 0
    exit_times: List[int] = field(default_factory=list)

    @property
    def total_s(self) -> float:
        return float(sum(self.L_s))

    def to_walk(self) -> Walk:
        """Store representation: start followed by first occurrences, cumulative costs."""
        if self.events == 0:
            vertices, costs = [self.start], [0.0]
        else:
            vertices = [self.start] + list(self.L_w)
            costs = [0.0]
            for s in self.L_s:
                costs.append(costs[-1] + s)
        return Walk(vertices, costs, self.status, terminal=self.terminal)


def sample_confined_weight(g: MultiGraph, U: Sequence[int], u: int, v: int, length: int,
                           epsilon: float, rng) -> float:
    """Approximate s of a length-`length` walk from u to v that stays inside U."""
    if length == 0:
        return 0.0
    table = DistribTable(g, eps0_for(epsilon, length), vertices=U, max_length=length)
    return table.sample(u, v, length, rng)


def generate_weighted_walk(g: MultiGraph, terminals: Set[int], start: int, beta: float, epsilon: float,
                           rng, constants: Optional[WalkConstants] = None,
                           M: Optional[int] = None) -> WeightedWalkRecord:
    """
    Beta-shorted weighted walk from `start` as a list of first occurrences
    and the approximate weight of each segment between them.
    """
    if not (0 < beta < 1):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    constants = constants or walk_constants()
    record = WeightedWalkRecord(start)
    if start in terminals:
        record.L_w, record.L_s = [start], [0.0]
        record.status, record.terminal = WalkStatus.REACHED, start
        return record
    if g.degree(start) == 0:
        record.status = WalkStatus.COVERED
        return record

    event_cap = math.ceil(constants.c_dist / beta * math.log(max(g.n, 2)))
    sub_eps = epsilon / event_cap
    bound = M if M is not None else cover_bound(g, constants)
    cover_tol = max(g.n, 2) ** -constants.cover_delta
    component = g.component_size(start)
    U = [start]
    current = start
    for _ in range(event_cap):
        kernel = ExitKernel(g, U, current)
        X = sample_exit_time(kernel, bound, rng, cover_tol)
        exit_from, exit_to, edge_id = sample_exit_edge(g, kernel, X, rng)
        s = sample_confined_weight(g, U, current, exit_from, X - 1, sub_eps, rng)
        record.L_w.append(exit_to)
        record.L_s.append(s + 1.0 / g.edge(edge_id).weight)
        record.exit_times.append(X)
        record.events += 1
        current = exit_to
        if exit_to in terminals:
            record.status, record.terminal = WalkStatus.REACHED, exit_to
            return record
        U.append(exit_to)
        if len(U) >= component:
            record.status = WalkStatus.COVERED
            return record
    return record
