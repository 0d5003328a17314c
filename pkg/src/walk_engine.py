"""
DynSC - Walk Engine
Truncated random walks and the store that indexes them. A sample consists of two
half-walks started from the endpoints of an origin edge; when both halves stop on
terminals the sample contributes one edge between those terminals to the sampled
Schur complement. Promoting a vertex to terminal cuts every walk at its first
visit of that vertex, and the reverse vertex index makes that proportional to the
number of affected walks.
"""
import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, TextIO, Tuple
import logging

import numpy as np
from sortedcontainers import SortedDict

from config import WalkConstants, walk_constants
from graph_core import GraphError, MultiGraph

logger = logging.getLogger(__name__)


class WalkStatus(str, Enum):
    REACHED = "reached-terminal"
    TRUNCATED = "truncated"
    COVERED = "covered-component"


@dataclass
class Walk:
    """
    A stored half-walk.

    `vertices[i]` is the position after i recorded moves and `costs[i]` the
    cumulative cost up to it (number of edges when unweighted, approximate sum
    of reciprocal weights when weighted). Weighted walks record only first
    occurrences, so `edges` is empty for them.
    """
    vertices: List[int]
    costs: List[float]
    status: WalkStatus
    edges: List[int] = field(default_factory=list)
    terminal: Optional[int] = None
    walk_id: int = -1
    origin_edge: int = -1
    side: int = 0

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def cost(self) -> float:
        return self.costs[-1]

    @property
    def steps(self) -> List[Tuple[int, Optional[int]]]:
        if not self.edges:
            return [(v, None) for v in self.vertices]
        return [(self.vertices[0], None)] + list(zip(self.vertices[1:], self.edges))

    @property
    def reached(self) -> bool:
        return self.status == WalkStatus.REACHED


@dataclass(frozen=True, order=True)
class HEdge:
    t1: int
    t2: int
    weight: float

    @classmethod
    def between(cls, a: int, b: int, weight: float) -> "HEdge":
        return cls(a, b, weight) if a <= b else cls(b, a, weight)

    @property
    def is_loop(self) -> bool:
        return self.t1 == self.t2


@dataclass
class Sample:
    sample_id: int
    origin_edge: int
    copy: int
    edge_cost: float
    walks: Tuple[int, int]


@dataclass(frozen=True)
class HEdgeDelta:
    sample_id: int
    old: Optional[HEdge]
    new: Optional[HEdge]


def hedge_weight(rho: int, cost1: float, cost2: float, edge_cost: float) -> float:
    return 1.0 / (rho * (cost1 + cost2 + edge_cost))


def truncation_caps(n: int, beta: float, constants: WalkConstants) -> Tuple[int, int]:
    """(distinct-edge cap, hard step cap) for an n-vertex graph."""
    log_n = math.log(max(n, 2))
    cap_distinct = math.ceil(constants.c_dist / beta * log_n)
    cap_steps = math.ceil(constants.c_bf * constants.c_len * log_n ** 3 / beta ** 2)
    return cap_distinct, max(cap_steps, cap_distinct)


def generate_unweighted_walk(g: MultiGraph, terminals: Set[int], start: int, beta: float, rng,
                             constants: Optional[WalkConstants] = None) -> Walk:
    """
    Walk from `start` until it reaches a terminal, has seen the distinct-edge
    cap, has seen every edge of its component, or exceeds the step cap.
    """
    if not (0 < beta < 1):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    constants = constants or walk_constants()
    if start in terminals:
        return Walk([start], [0.0], WalkStatus.REACHED, terminal=start)
    if g.degree(start) == 0:
        return Walk([start], [0.0], WalkStatus.COVERED)

    cap_distinct, cap_steps = truncation_caps(g.n, beta, constants)
    component_edges = g.component_edge_count(start)
    vertices, edges = [start], []
    seen: Set[int] = set()
    current = start
    status = WalkStatus.TRUNCATED
    terminal = None
    while len(edges) < cap_steps:
        current, edge_id = g.weighted_random_neighbor(current, rng)
        vertices.append(current)
        edges.append(edge_id)
        seen.add(edge_id)
        if current in terminals:
            status, terminal = WalkStatus.REACHED, current
            break
        if len(seen) >= component_edges:
            status = WalkStatus.COVERED
            break
        if len(seen) >= cap_distinct:
            break
    return Walk(vertices, [float(i) for i in range(len(vertices))], status, edges=edges, terminal=terminal)


class WalkStore:
    """
    All half-walks of one data structure plus reverse indices.

    by_vertex[v] maps walk_id -> first position of v in that walk; by_edge
    does the same for edge ids. Work counters back the amortization check:
    index_work never exceeds init_work within one build.
    """

    def __init__(self, rho: int):
        self.rho = rho
        self.walks: Dict[int, Walk] = {}
        self.samples: Dict[int, Sample] = {}
        self.by_vertex: Dict[int, SortedDict] = {}
        self.by_edge: Dict[int, SortedDict] = {}
        self.by_origin: Dict[int, Set[int]] = {}
        self.pair_links: Dict[int, int] = {}
        self.sample_of: Dict[int, int] = {}
        self._next_walk = 0
        self._next_sample = 0
        self.init_work = 0
        self.index_work = 0

    def __len__(self) -> int:
        return len(self.walks)

    def _index_walk(self, walk: Walk):
        wid = walk.walk_id
        for pos, v in enumerate(walk.vertices):
            self.by_vertex.setdefault(v, SortedDict()).setdefault(wid, pos)
        for pos, e in enumerate(walk.edges):
            self.by_edge.setdefault(e, SortedDict()).setdefault(wid, pos)
        self.init_work += len(walk.vertices)

    def _unindex_walk(self, walk: Walk, after: int = -1):
        """Drop index entries whose first position lies beyond `after`."""
        wid = walk.walk_id
        removed = 0
        for pos in range(after + 1, len(walk.vertices)):
            v = walk.vertices[pos]
            entries = self.by_vertex.get(v)
            if entries is not None and entries.get(wid) == pos:
                del entries[wid]
                if not entries:
                    del self.by_vertex[v]
            removed += 1
        for pos in range(max(after, 0), len(walk.edges)):
            e = walk.edges[pos]
            entries = self.by_edge.get(e)
            if entries is not None and entries.get(wid) == pos:
                del entries[wid]
                if not entries:
                    del self.by_edge[e]
        return removed

    def add_sample(self, origin_edge: int, copy_index: int, edge_cost: float,
                   first: Walk, second: Walk) -> int:
        sample_id = self._next_sample
        self._next_sample += 1
        ids = []
        for side, walk in ((1, first), (2, second)):
            walk.walk_id = self._next_walk
            walk.origin_edge = origin_edge
            walk.side = side
            self._next_walk += 1
            self.walks[walk.walk_id] = walk
            self.sample_of[walk.walk_id] = sample_id
            self._index_walk(walk)
            ids.append(walk.walk_id)
        self.pair_links[ids[0]] = ids[1]
        self.pair_links[ids[1]] = ids[0]
        self.samples[sample_id] = Sample(sample_id, origin_edge, copy_index, edge_cost, (ids[0], ids[1]))
        self.by_origin.setdefault(origin_edge, set()).add(sample_id)
        return sample_id

    def remove_sample(self, sample_id: int) -> Optional[HEdge]:
        sample = self.samples.pop(sample_id)
        old = self._hedge(sample)
        for wid in sample.walks:
            walk = self.walks.pop(wid)
            self.index_work += self._unindex_walk(walk)
            del self.pair_links[wid]
            del self.sample_of[wid]
        origin = self.by_origin[sample.origin_edge]
        origin.discard(sample_id)
        if not origin:
            del self.by_origin[sample.origin_edge]
        return old

    def samples_for_edge(self, edge_id: int) -> List[int]:
        return sorted(self.by_origin.get(edge_id, ()))

    def _hedge(self, sample: Sample) -> Optional[HEdge]:
        w1, w2 = (self.walks[wid] for wid in sample.walks)
        if not (w1.reached and w2.reached):
            return None
        return HEdge.between(w1.terminal, w2.terminal, hedge_weight(self.rho, w1.cost, w2.cost, sample.edge_cost))

    def hedge(self, sample_id: int) -> Optional[HEdge]:
        return self._hedge(self.samples[sample_id])

    def hedges(self) -> Dict[int, HEdge]:
        out = {}
        for sample_id, sample in self.samples.items():
            h = self._hedge(sample)
            if h is not None:
                out[sample_id] = h
        return out

    def walks_through(self, v: int) -> List[Tuple[int, int]]:
        return list(self.by_vertex.get(v, {}).items())

    def walks_through_edge(self, e: int) -> List[Tuple[int, int]]:
        return list(self.by_edge.get(e, {}).items())

    def shorten_at(self, u: int) -> List[HEdgeDelta]:
        """
        Cut every walk at its first visit of u, which becomes its terminal.

        Returns the H-edge changes of every sample whose edge changed.
        """
        entries = self.walks_through(u)
        before: Dict[int, Optional[HEdge]] = {}
        for wid, pos in entries:
            walk = self.walks[wid]
            if walk.reached and walk.terminal == u and pos == walk.length:
                continue
            sample_id = self.sample_of[wid]
            if sample_id not in before:
                before[sample_id] = self._hedge(self.samples[sample_id])
            self.index_work += self._unindex_walk(walk, after=pos)
            del walk.vertices[pos + 1:]
            del walk.costs[pos + 1:]
            del walk.edges[pos:]
            walk.status = WalkStatus.REACHED
            walk.terminal = u
        deltas = []
        for sample_id in sorted(before):
            new = self._hedge(self.samples[sample_id])
            if new != before[sample_id]:
                deltas.append(HEdgeDelta(sample_id, before[sample_id], new))
        return deltas

    def snapshot(self) -> Dict[int, Tuple[Walk, Walk, float]]:
        """Deep copy of every sample's two walks, for coupled regeneration."""
        return {
            sid: (copy.deepcopy(self.walks[s.walks[0]]), copy.deepcopy(self.walks[s.walks[1]]), s.edge_cost)
            for sid, s in self.samples.items()
        }

    def audit(self, terminals: Set[int]) -> List[str]:
        """Invariant violations (first-hit semantics and index completeness)."""
        issues = []
        expected_v: Dict[int, Dict[int, int]] = {}
        expected_e: Dict[int, Dict[int, int]] = {}
        for wid, walk in self.walks.items():
            interior = walk.vertices[:-1] if walk.reached else walk.vertices
            hit = [v for v in interior if v in terminals]
            if hit:
                issues.append(f"walk {wid} passes terminal {hit[0]} before stopping")
            if walk.reached and walk.vertices[-1] != walk.terminal:
                issues.append(f"walk {wid} does not end on its terminal")
            for pos, v in enumerate(walk.vertices):
                expected_v.setdefault(v, {}).setdefault(wid, pos)
            for pos, e in enumerate(walk.edges):
                expected_e.setdefault(e, {}).setdefault(wid, pos)
        actual_v = {v: dict(d) for v, d in self.by_vertex.items()}
        actual_e = {e: dict(d) for e, d in self.by_edge.items()}
        if actual_v != expected_v:
            issues.append("vertex index disagrees with a full scan")
        if actual_e != expected_e:
            issues.append("edge index disagrees with a full scan")
        if self.index_work > self.init_work:
            issues.append(f"index work {self.index_work} exceeds initialization work {self.init_work}")
        return issues


def coupled_regeneration(snapshot: Dict[int, Tuple[Walk, Walk, float]], terminals: Set[int],
                         rho: int) -> List[HEdge]:
    """
    H-edge multiset obtained by re-running every snapshot walk against
    `terminals` with its trajectory fixed, i.e. truncated at its first terminal.
    """
    out = []
    for sid in sorted(snapshot):
        w1, w2, edge_cost = snapshot[sid]
        ends = []
        for walk in (w1, w2):
            first = next((i for i, v in enumerate(walk.vertices) if v in terminals), None)
            if first is None:
                break
            ends.append((walk.vertices[first], walk.costs[first]))
        if len(ends) == 2:
            (t1, c1), (t2, c2) = ends
            out.append(HEdge.between(t1, t2, hedge_weight(rho, c1, c2, edge_cost)))
    return sorted(out)


def dump_walks(store: WalkStore, fp: TextIO):
    """One walk per line: id, status, vertex sequence."""
    for wid in sorted(store.walks):
        walk = store.walks[wid]
        fp.write(f"{wid} {walk.status.value} {' '.join(map(str, walk.vertices))}\n")


@dataclass
class NaiveWalk:
    trajectory: List[int]
    first_occurrences: List[int]
    steps: int
    finished: bool


def simulate_until_distinct(g: MultiGraph, start: int, target: int, rng,
                            max_steps: Optional[int] = None, stop_at: Optional[Set[int]] = None,
                            count_edges: bool = False) -> NaiveWalk:
    """
    Step-by-step weighted walk until `target` distinct vertices (or edges)
    have been seen, a vertex of `stop_at` is reached, or max_steps expires.
    """
    trajectory = [start]
    first = [start]
    seen_v = {start}
    seen_e: Set[int] = set()
    current = start
    steps = 0
    if stop_at and start in stop_at:
        return NaiveWalk(trajectory, first, 0, True)
    if g.degree(start) == 0:
        return NaiveWalk(trajectory, first, 0, False)
    while max_steps is None or steps < max_steps:
        current, edge_id = g.weighted_random_neighbor(current, rng)
        steps += 1
        trajectory.append(current)
        seen_e.add(edge_id)
        if current not in seen_v:
            seen_v.add(current)
            first.append(current)
        if stop_at and current in stop_at:
            return NaiveWalk(trajectory, first, steps, True)
        if (len(seen_e) if count_edges else len(seen_v)) >= target:
            return NaiveWalk(trajectory, first, steps, True)
    return NaiveWalk(trajectory, first, steps, False)


def steps_to_distinct_edges(g: MultiGraph, start: int, target: int, rng, max_steps: int = 10 ** 7) -> int:
    """Number of steps until the walk has traversed `target` distinct edges."""
    if target > g.component_edge_count(start):
        raise GraphError(f"component of {start} has fewer than {target} edges")
    return simulate_until_distinct(g, start, target, rng, max_steps=max_steps, count_edges=True).steps
