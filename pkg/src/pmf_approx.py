"""
DynSC - Walk Weight Distributions
Bucketed approximations of the distribution of s(w), the sum of reciprocal edge
weights along a walk of fixed length. Bucket k with precision j stands for the
interval [(1+eps0)^k, (1+eps0)^(k+j)); convolving two bucketed distributions
widens j by one, so a doubling recursion over the walk length keeps j
logarithmic in the length. Sampling returns the right end of the drawn
interval, which over-estimates the latent walk weight by at most (1+eps0)^j.
"""
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np

from config import PMF_DROP
from graph_core import DynSCError, MultiGraph

logger = logging.getLogger(__name__)

DEFAULT_J_MAX = 64


class PrecisionExhaustedError(DynSCError):
    """Convolution would push the bucket width past its allowed maximum."""


class UnreachableError(DynSCError):
    """No walk of the requested length joins the two vertices."""


def bucket_index(value: float, eps0: float) -> int:
    """Largest k with (1+eps0)^k <= value."""
    base = math.log1p(eps0)
    k = math.floor(math.log(value) / base)
    while math.exp(k * base) > value:
        k -= 1
    while math.exp((k + 1) * base) <= value:
        k += 1
    return k


def eps0_for(epsilon: float, length: int) -> float:
    """Base ratio such that (1+eps0)^(ceil(log2 length)+1) <= 1+epsilon."""
    return epsilon / (4 * max(1, math.ceil(math.log2(max(length, 1)))))


@dataclass
class BucketedPmf:
    eps0: float
    j: int
    keys: np.ndarray
    mass: np.ndarray
    j_max: int = DEFAULT_J_MAX

    @classmethod
    def empty(cls, eps0: float, j: int = 1, j_max: int = DEFAULT_J_MAX) -> "BucketedPmf":
        return cls(eps0, j, np.zeros(0, dtype=np.int64), np.zeros(0), j_max)

    @classmethod
    def point(cls, value: float, eps0: float, j_max: int = DEFAULT_J_MAX) -> "BucketedPmf":
        return cls(eps0, 1, np.array([bucket_index(value, eps0)], dtype=np.int64), np.ones(1), j_max)

    @classmethod
    def from_masses(cls, masses: Dict[int, float], eps0: float, j: int = 1,
                    j_max: int = DEFAULT_J_MAX) -> "BucketedPmf":
        keys = np.array(sorted(masses), dtype=np.int64)
        return cls(eps0, j, keys, np.array([masses[k] for k in keys], dtype=float), j_max)

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    @property
    def is_empty(self) -> bool:
        return len(self.keys) == 0

    def interval(self, k: int) -> Tuple[float, float]:
        base = math.log1p(self.eps0)
        return math.exp(k * base), math.exp((k + self.j) * base)

    def as_dict(self) -> Dict[int, float]:
        return {int(k): float(m) for k, m in zip(self.keys, self.mass)}

    def right_endpoints(self) -> np.ndarray:
        return np.exp((self.keys + self.j) * math.log1p(self.eps0))


def _aggregate(keys: np.ndarray, mass: np.ndarray, drop: float) -> Tuple[np.ndarray, np.ndarray]:
    if len(keys) == 0:
        return keys.astype(np.int64), mass
    uniq, inverse = np.unique(keys, return_inverse=True)
    summed = np.bincount(inverse.ravel(), weights=mass.ravel())
    keep = summed >= drop
    return uniq[keep].astype(np.int64), summed[keep]


def _same_base(g1: BucketedPmf, g2: BucketedPmf):
    if not math.isclose(g1.eps0, g2.eps0, rel_tol=1e-12):
        raise ValueError(f"bucket bases differ: {g1.eps0} vs {g2.eps0}")


def convolute(g1: BucketedPmf, g2: BucketedPmf, drop: float = PMF_DROP) -> BucketedPmf:
    """
    Distribution of the sum of independent draws from g1 and g2.

    Each pair of buckets (k1, k2) lands in the bucket k3 with
    (1+eps0)^k1 + (1+eps0)^k2 in [(1+eps0)^k3, (1+eps0)^(k3+1)); the result
    has precision max(j1, j2) + 1.
    """
    _same_base(g1, g2)
    j = max(g1.j, g2.j) + 1
    j_max = min(g1.j_max, g2.j_max)
    if j > j_max:
        raise PrecisionExhaustedError(f"bucket precision {j} exceeds {j_max}")
    if g1.is_empty or g2.is_empty:
        return BucketedPmf.empty(g1.eps0, j, j_max)
    base = math.log1p(g1.eps0)
    sums = np.exp(g1.keys * base)[:, None] + np.exp(g2.keys * base)[None, :]
    k3 = np.floor(np.log(sums) / base).astype(np.int64)
    k3 -= np.exp(k3 * base) > sums
    k3 += np.exp((k3 + 1) * base) <= sums
    masses = np.outer(g1.mass, g2.mass)
    keys, mass = _aggregate(k3, masses, drop)
    return BucketedPmf(g1.eps0, j, keys, mass, j_max)


def mix(parts: Sequence[Tuple[float, BucketedPmf]], eps0: Optional[float] = None,
        drop: float = PMF_DROP) -> BucketedPmf:
    """Bucketwise weighted sum; precision is the largest among the parts."""
    if not parts:
        if eps0 is None:
            raise ValueError("mixing nothing needs an explicit eps0")
        return BucketedPmf.empty(eps0)
    first = parts[0][1]
    for weight, g in parts:
        if weight < 0:
            raise ValueError(f"negative mixing weight {weight}")
        _same_base(first, g)
    j = max(g.j for _, g in parts)
    j_max = min(g.j_max for _, g in parts)
    keys = np.concatenate([g.keys for _, g in parts])
    mass = np.concatenate([w * g.mass for w, g in parts])
    keys, mass = _aggregate(keys, mass, drop)
    return BucketedPmf(first.eps0, j, keys, mass, j_max)


@dataclass
class DistribEntry:
    j: int
    pmf: BucketedPmf
    p: float


class DistribTable:
    """
    Memoized doubling recursion over walk length.

    Transition probabilities are w_uv / d(u) with d taken from `degrees`
    (default: weighted degrees in the full graph), restricted to `vertices`.
    Restricting to a vertex subset therefore describes walks of the full graph
    that stay inside the subset. Entry pmfs are conditioned on the endpoint
    and `p` carries the (possibly sub-stochastic) reach probability.
    """

    def __init__(self, g: MultiGraph, eps0: float, vertices: Optional[Iterable[int]] = None,
                 degrees: Optional[Sequence[float]] = None, max_length: Optional[int] = None,
                 drop: float = PMF_DROP):
        self.eps0 = eps0
        self.drop = drop
        self.vertices = list(vertices) if vertices is not None else list(range(g.n))
        self._pos = {v: i for i, v in enumerate(self.vertices)}
        k = len(self.vertices)
        if degrees is None:
            degrees = [g.weighted_degree(v) for v in self.vertices]
        self.degrees = np.asarray(degrees, dtype=float)
        self._parallel: Dict[Tuple[int, int], List[float]] = defaultdict(list)
        W = np.zeros((k, k))
        for e in g.edges.values():
            a, b = self._pos.get(e.u), self._pos.get(e.v)
            if a is None or b is None:
                continue
            W[a, b] += e.weight
            W[b, a] += e.weight
            self._parallel[(a, b)].append(e.weight)
            self._parallel[(b, a)].append(e.weight)
        safe = np.where(self.degrees > 0, self.degrees, 1.0)
        self._reach: Dict[int, np.ndarray] = {1: W / safe[:, None]}
        self._entries: Dict[Tuple[int, int, int], DistribEntry] = {}
        depth = math.ceil(math.log2(max_length)) if max_length and max_length > 1 else 62
        self.j_max = depth + 1

    def reach_matrix(self, ell: int) -> np.ndarray:
        if ell < 1:
            raise ValueError(f"walk length must be positive, got {ell}")
        cached = self._reach.get(ell)
        if cached is None:
            half = ell // 2
            cached = self.reach_matrix(half) @ self.reach_matrix(ell - half)
            self._reach[ell] = cached
        return cached

    def _empty(self) -> DistribEntry:
        return DistribEntry(1, BucketedPmf.empty(self.eps0, 1, self.j_max), 0.0)

    def _entry(self, a: int, b: int, ell: int) -> DistribEntry:
        key = (a, b, ell)
        cached = self._entries.get(key)
        if cached is not None:
            return cached
        if ell == 1:
            p = float(self._reach[1][a, b])
            if p <= 0:
                entry = self._empty()
            else:
                weights = self._parallel[(a, b)]
                total_w = sum(weights)
                parts = [(w / total_w, BucketedPmf.point(1.0 / w, self.eps0, self.j_max)) for w in weights]
                pmf = mix(parts, drop=self.drop)
                entry = DistribEntry(pmf.j, pmf, p)
        else:
            first = ell // 2
            second = ell - first
            through = self.reach_matrix(first)[a, :] * self.reach_matrix(second)[:, b]
            p = float(through.sum())
            if p <= 0:
                entry = self._empty()
            else:
                parts = []
                for y in np.nonzero(through > self.drop * p)[0]:
                    left = self._entry(a, int(y), first)
                    right = self._entry(int(y), b, second)
                    parts.append((float(through[y]) / p, convolute(left.pmf, right.pmf, self.drop)))
                pmf = mix(parts, eps0=self.eps0, drop=self.drop)
                entry = DistribEntry(pmf.j, pmf, p)
        self._entries[key] = entry
        return entry

    def entry(self, u: int, v: int, ell: int) -> DistribEntry:
        return self._entry(self._pos[u], self._pos[v], ell)

    def reach(self, u: int, v: int, ell: int) -> float:
        return float(self.reach_matrix(ell)[self._pos[u], self._pos[v]])

    def _cdf(self, u: int, v: int, ell: int) -> Tuple[DistribEntry, np.ndarray]:
        entry = self.entry(u, v, ell)
        if entry.p <= 0 or entry.pmf.is_empty:
            raise UnreachableError(f"no length-{ell} walk from {u} to {v}")
        cdf = np.cumsum(entry.pmf.mass)
        return entry, cdf / cdf[-1]

    def sample(self, u: int, v: int, ell: int, rng) -> float:
        entry, cdf = self._cdf(u, v, ell)
        k0 = min(int(np.searchsorted(cdf, rng.random(), side='right')), len(cdf) - 1)
        return math.exp((int(entry.pmf.keys[k0]) + entry.j) * math.log1p(self.eps0))

    def sample_many(self, u: int, v: int, ell: int, rng: np.random.Generator, size: int) -> np.ndarray:
        entry, cdf = self._cdf(u, v, ell)
        idx = np.minimum(np.searchsorted(cdf, rng.random(size), side='right'), len(cdf) - 1)
        return np.exp((entry.pmf.keys[idx] + entry.j) * math.log1p(self.eps0))


def compute_distrib(g: MultiGraph, ell: int, eps0: float, vertices: Optional[Iterable[int]] = None,
                    degrees: Optional[Sequence[float]] = None) -> DistribTable:
    """Table with every (u, v) entry at length `ell` computed."""
    table = DistribTable(g, eps0, vertices=vertices, degrees=degrees, max_length=ell)
    for u in table.vertices:
        for v in table.vertices:
            table.entry(u, v, ell)
    return table


def sample_weight(g: MultiGraph, u: int, v: int, ell: int, epsilon: float, rng,
                  vertices: Optional[Iterable[int]] = None, degrees: Optional[Sequence[float]] = None,
                  table: Optional[DistribTable] = None) -> float:
    """
    Approximate draw of s(w) for a length-`ell` walk from u conditioned on
    ending at v; the value is within [s, (1+epsilon) s] of the latent draw s.
    """
    if ell == 0:
        if u != v:
            raise UnreachableError(f"empty walk cannot join {u} and {v}")
        return 0.0
    if table is None:
        table = DistribTable(g, eps0_for(epsilon, ell), vertices=vertices, degrees=degrees, max_length=ell)
    return table.sample(u, v, ell, rng)


def exact_walk_weights(g: MultiGraph, u: int, ell: int,
                       vertices: Optional[Iterable[int]] = None) -> Dict[int, Dict[float, float]]:
    """
    Enumerate every length-`ell` walk from u (inside `vertices` if given).

    Returns end vertex -> {s(w): total probability}; practical for n <= 5, ell <= 6.
    """
    allowed = set(vertices) if vertices is not None else set(range(g.n))
    out: Dict[int, Dict[float, float]] = defaultdict(lambda: defaultdict(float))
    frontier = [(u, 0.0, 1.0)]
    for _ in range(ell):
        nxt = []
        for x, s, prob in frontier:
            d = g.weighted_degree(x)
            for nb, _, w in g.neighbors(x):
                if nb in allowed:
                    nxt.append((nb, s + 1.0 / w, prob * w / d))
        frontier = nxt
    for x, s, prob in frontier:
        out[x][round(s, 12)] += prob
    return {x: dict(vals) for x, vals in out.items()}
