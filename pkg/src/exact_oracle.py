"""
DynSC - Exact Oracle
Dense linear algebra ground truth for everything the randomized structures
approximate: Laplacian pseudoinverse, Schur complements, effective resistances,
projection matrices, absorbing-walk hitting probabilities, electrical energies,
spectral approximation certificates and a Jacobi-preconditioned conjugate
gradient Laplacian solver. Everything here is a pure function over numpy arrays.
"""
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np
import scipy.linalg as la
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from config import ORACLE_TOL, PINV_CUTOFF, CG_ITER_FACTOR
from graph_core import DynSCError, MultiGraph

logger = logging.getLogger(__name__)


class SingularBlockError(DynSCError):
    """The non-terminal block is singular: some component has no terminal."""


class NotInRangeError(DynSCError):
    """Demand vector has a nonzero sum on some connected component."""


class SolverDivergenceError(DynSCError):
    """Conjugate gradient stopped at its iteration cap without converging."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass
class SpectralCertificate:
    epsilon: float
    ok: bool
    lower: float
    upper: float
    witness: Optional[np.ndarray] = field(default=None, repr=False)


def laplacian_components(L: np.ndarray) -> Tuple[int, np.ndarray]:
    """Connected components of the graph underlying a dense Laplacian."""
    A = np.abs(L) > 0
    np.fill_diagonal(A, False)
    return connected_components(csr_matrix(A), directed=False)


def pinv(L: np.ndarray, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """Moore-Penrose pseudoinverse via symmetric eigendecomposition."""
    n = L.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    vals, vecs = la.eigh(L)
    lam_max = vals.max() if n else 0.0
    if lam_max <= 0:
        return np.zeros_like(L, dtype=float)
    keep = vals > cutoff * lam_max
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / vals[keep]
    return (vecs * inv) @ vecs.T


def solve_grounded(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    L^+ b through one Cholesky solve per component with its smallest vertex
    grounded. Unlike pinv this keeps the light modes of graphs whose weights
    span many orders of magnitude. b may hold several right-hand sides as columns.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros(b.shape)
    if L.shape[0] == 0:
        return x
    count, labels = laplacian_components(L)
    for c in range(count):
        members = np.nonzero(labels == c)[0]
        if len(members) < 2:
            continue
        rhs = b[members] - b[members].mean(axis=0)
        rest = members[1:]
        x_c = np.zeros(rhs.shape)
        x_c[1:] = la.solve(L[np.ix_(rest, rest)], rhs[1:], assume_a='pos')
        x[members] = x_c - x_c.mean(axis=0)
    return x


def _terminal_free_vertices(L: np.ndarray, terminals: Sequence[int]) -> np.ndarray:
    _, labels = laplacian_components(L)
    with_terminal = set(labels[list(terminals)]) if len(terminals) else set()
    return np.array([v for v in range(L.shape[0]) if labels[v] not in with_terminal], dtype=int)


def _split(n: int, terminals: Iterable[int], drop: Iterable[int] = ()) -> Tuple[List[int], List[int]]:
    T = sorted(set(terminals))
    skip = set(T) | set(drop)
    F = [v for v in range(n) if v not in skip]
    return T, F


def exact_schur(L: np.ndarray, terminals: Iterable[int], drop_free_components: bool = True) -> np.ndarray:
    """
    Schur complement onto the terminals, ordered by sorted vertex id.

    Components of the graph without any terminal contribute nothing and are
    dropped; with drop_free_components=False they raise SingularBlockError.
    """
    T = sorted(set(terminals))
    free = _terminal_free_vertices(L, T)
    if len(free) and not drop_free_components:
        raise SingularBlockError(f"{len(free)} vertices lie in components without terminals")
    T, F = _split(L.shape[0], T, free)
    L_TT = L[np.ix_(T, T)]
    if not F:
        return L_TT.copy()
    L_FF = L[np.ix_(F, F)]
    L_FT = L[np.ix_(F, T)]
    X = la.solve(L_FF, L_FT, assume_a='pos')
    S = L_TT - L_FT.T @ X
    return (S + S.T) / 2


def exact_er(L: np.ndarray, u: int, v: int, L_pinv: Optional[np.ndarray] = None) -> float:
    """Effective resistance chi^T L^+ chi; math.inf across components."""
    if u == v:
        return 0.0
    _, labels = laplacian_components(L)
    if labels[u] != labels[v]:
        return math.inf
    if L_pinv is not None:
        P = L_pinv
        return float(P[u, u] + P[v, v] - 2 * P[u, v])
    chi = np.zeros(L.shape[0])
    chi[u], chi[v] = 1.0, -1.0
    x = solve_grounded(L, chi)
    return float(x[u] - x[v])


def exact_projection(L: np.ndarray, terminals: Iterable[int], strict: bool = True) -> np.ndarray:
    """
    |T| x n matrix [-L_TF L_FF^{-1}, I_T], rows in sorted terminal order.

    Columns of vertices in terminal-free components are zero when strict is False.
    """
    n = L.shape[0]
    T = sorted(set(terminals))
    free = _terminal_free_vertices(L, T)
    if len(free) and strict:
        raise SingularBlockError(f"{len(free)} vertices cannot reach a terminal")
    T, F = _split(n, T, free)
    P = np.zeros((len(T), n))
    P[np.arange(len(T)), T] = 1.0
    if F:
        L_FF = L[np.ix_(F, F)]
        L_TF = L[np.ix_(T, F)]
        P[:, F] = -la.solve(L_FF, L_TF.T, assume_a='pos').T
    return P


def hitting_probabilities(g: MultiGraph, terminals: Iterable[int], u: int) -> np.ndarray:
    """
    Distribution over sorted terminals of where a walk from u first hits T.

    Solved as an absorbing chain on the transition matrix D^{-1}A.
    """
    T = sorted(set(terminals))
    if u in T:
        out = np.zeros(len(T))
        out[T.index(u)] = 1.0
        return out
    if not any(g.same_component(u, t) for t in T):
        raise SingularBlockError(f"no terminal reachable from {u}")
    A = g.adjacency_matrix()
    labels = g.components()[1]
    F = [v for v in range(g.n) if v not in set(T) and labels[v] == labels[u]]
    deg = A.sum(axis=1)
    P_FF = A[np.ix_(F, F)] / deg[F, None]
    P_FT = A[np.ix_(F, T)] / deg[F, None]
    H = la.solve(np.eye(len(F)) - P_FF, P_FT)
    return H[F.index(u)]


def _check_range(L: np.ndarray, b: np.ndarray, tol: float):
    _, labels = laplacian_components(L)
    scale = max(1.0, float(np.abs(b).max())) if len(b) else 1.0
    sums = np.bincount(labels, weights=b)
    if np.any(np.abs(sums) > tol * scale * max(1, len(b))):
        raise NotInRangeError(f"component sums {sums[np.abs(sums) > tol].tolist()} are not zero")


def exact_energy(L: np.ndarray, b: np.ndarray, tol: float = ORACLE_TOL) -> float:
    """Energy b^T L^+ b of the electrical flow routing b."""
    b = np.asarray(b, dtype=float)
    _check_range(L, b, tol)
    if not np.any(b):
        return 0.0
    return float(b @ solve_grounded(L, b))


def lnorm(L: np.ndarray, x: np.ndarray) -> float:
    return math.sqrt(max(0.0, float(x @ L @ x)))


def pinv_norm(L: np.ndarray, b: np.ndarray, L_pinv: Optional[np.ndarray] = None) -> float:
    b = np.asarray(b, dtype=float)
    value = b @ solve_grounded(L, b) if L_pinv is None else b @ L_pinv @ b
    return math.sqrt(max(0.0, float(value)))


def check_spectral(L_G: np.ndarray, L_H: np.ndarray, epsilon: float,
                   tol: float = ORACLE_TOL) -> SpectralCertificate:
    """
    Decide (1-eps) L_G <= L_H <= (1+eps) L_G on range(L_G) through the extreme
    generalized eigenvalues; a mismatched null space is reported as not ok.
    """
    if L_G.shape != L_H.shape:
        raise ValueError(f"shape mismatch {L_G.shape} vs {L_H.shape}")
    n = L_G.shape[0]
    if n == 0:
        return SpectralCertificate(epsilon, True, 1.0, 1.0)
    vals, vecs = la.eigh(L_G)
    lam_max = max(vals.max(), 0.0)
    keep = vals > PINV_CUTOFF * lam_max if lam_max > 0 else np.zeros(n, dtype=bool)
    Q, lam = vecs[:, keep], vals[keep]
    N = vecs[:, ~keep]

    scale_h = max(1.0, float(np.abs(L_H).max()))
    if N.shape[1]:
        leak = L_H @ N
        if np.abs(leak).max() > tol * scale_h * 10:
            col = int(np.argmax(np.abs(leak).max(axis=0)))
            return SpectralCertificate(epsilon, False, 0.0, math.inf, witness=N[:, col])
    if Q.shape[1] == 0:
        return SpectralCertificate(epsilon, True, 1.0, 1.0)

    scaled = Q / np.sqrt(lam)
    M = scaled.T @ L_H @ scaled
    mu, V = la.eigh((M + M.T) / 2)
    lower, upper = float(mu.min()), float(mu.max())
    ok = lower >= 1 - epsilon - tol and upper <= 1 + epsilon + tol
    witness = None
    if not ok:
        worst = 0 if (1 - lower) >= (upper - 1) else len(mu) - 1
        witness = scaled @ V[:, worst]
    return SpectralCertificate(epsilon, ok, lower, upper, witness)


def solve_lap(L: np.ndarray, b: np.ndarray, epsilon: float,
              max_iter: Optional[int] = None) -> np.ndarray:
    """
    Approximate L^+ b by Jacobi-preconditioned conjugate gradient.

    The right-hand side is projected onto range(L) per component and the
    returned solution has zero mean on every component.

    Raises:
        SolverDivergenceError: iteration cap reached with a large residual
    """
    b = np.asarray(b, dtype=float)
    n = L.shape[0]
    x = np.zeros(n)
    if n == 0 or not np.any(b):
        return x
    _, labels = laplacian_components(L)
    counts = np.bincount(labels)
    b = b - (np.bincount(labels, weights=b) / counts)[labels]

    rtol = max(min(epsilon, 1e-2) * 1e-3, 1e-13)
    cap = max_iter if max_iter is not None else CG_ITER_FACTOR * n
    diag = np.diag(L).copy()
    diag[diag <= 0] = 1.0
    inv_diag = 1.0 / diag

    b_norm = np.linalg.norm(b)
    if b_norm == 0:
        return x
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for _ in range(cap):
        Ap = L @ p
        denom = p @ Ap
        if denom <= 0:
            break
        alpha = rz / denom
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * b_norm:
            break
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new

    residual = float(np.linalg.norm(b - L @ x) / b_norm)
    if residual > max(rtol, 1e-10) * 10:
        raise SolverDivergenceError(f"conjugate gradient stalled at relative residual {residual:.3e}", residual)
    x -= (np.bincount(labels, weights=x) / counts)[labels]
    return x


def lift_solution(L: np.ndarray, terminals: Iterable[int], x_T: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Extend terminal potentials by x_F = L_FF^{-1}(b_F - L_FT x_T).

    Components without terminals get x = 0 when they carry no demand.
    """
    n = L.shape[0]
    b = np.asarray(b, dtype=float)
    T = sorted(set(terminals))
    free = _terminal_free_vertices(L, T)
    if len(free) and np.any(b[free]):
        raise SingularBlockError(f"demand on {len(free)} vertices that cannot reach a terminal")
    T, F = _split(n, T, free)
    x = np.zeros(n)
    x[T] = x_T
    if F:
        try:
            x[F] = la.solve(L[np.ix_(F, F)], b[F] - L[np.ix_(F, T)] @ x_T, assume_a='pos')
        except la.LinAlgError as e:
            raise SingularBlockError(f"cannot lift: {e}") from e
    return x


def energy_split(L: np.ndarray, terminals: Iterable[int], b: np.ndarray) -> Tuple[float, float, float]:
    """
    (energy of b_F on L_FF, energy of Proj b on the Schur complement, total energy).
    """
    T, F = _split(L.shape[0], terminals)
    b = np.asarray(b, dtype=float)
    e_f = 0.0
    if F:
        b_F = b[F]
        e_f = float(b_F @ pinv(L[np.ix_(F, F)]) @ b_F)
    proj_b = exact_projection(L, T) @ b
    e_proj = float(proj_b @ pinv(exact_schur(L, T)) @ proj_b)
    return e_f, e_proj, exact_energy(L, b)


def terminal_free_walk_schur(g: MultiGraph, terminals: Iterable[int], max_len: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Schur complement assembled from terminal-free walks of length <= max_len.

    A walk t1, f_1, ..., f_k, t2 with interior in F contributes an edge of
    weight prod(w) / prod(d(f_i)). Returns (partial Laplacian on sorted T,
    exact remainder of all longer walks), so partial + remainder equals the
    true off-diagonal mass.
    """
    A = g.adjacency_matrix()
    T, F = _split(g.n, terminals)
    deg = A.sum(axis=1)
    A_TT = A[np.ix_(T, T)]
    if not F:
        return np.diag(A_TT.sum(axis=1)) - A_TT, np.zeros_like(A_TT)
    A_TF = A[np.ix_(T, F)]
    P_FF = A[np.ix_(F, F)] / deg[F, None]
    right = A[np.ix_(F, T)] / deg[F, None]
    walks = A_TT.copy()
    term = right
    for _ in range(max(0, max_len - 1)):
        walks += A_TF @ term
        term = P_FF @ term
    remainder = A_TF @ la.solve(np.eye(len(F)) - P_FF, term)
    np.fill_diagonal(walks, 0.0)
    np.fill_diagonal(remainder, 0.0)
    return np.diag(walks.sum(axis=1)) - walks, remainder
