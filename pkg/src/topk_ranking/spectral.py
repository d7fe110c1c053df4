"""
Spectral Ranking Module

Rank Centrality: turn empirical win rates into a random walk whose
stationary distribution scores the items.

Usage:
    from topk_ranking.spectral import spectral_rank

    result = spectral_rank(data, K=10)
    result.topk        # frozenset of the 10 selected items
    result.estimate    # stationary distribution π
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eig
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from topk_ranking.errors import (
    Disconnected,
    EmptyGraph,
    InvalidArgument,
    NoConvergence,
    NormalizationTooSmall,
    check_k,
)
from topk_ranking.metrics import RankingResult
from topk_ranking.model import ComparisonData, ComparisonGraph

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12


def default_max_iters(n: int) -> int:
    return 100 * n + 10_000


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic n×n matrix with P_ij = y_ij / d on edges."""

    n: int
    d: float
    P: np.ndarray
    graph: Optional[ComparisonGraph] = None

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.shape != (self.n, self.n):
            raise InvalidArgument(f"Transition matrix must be {self.n}x{self.n}, got {P.shape}")
        if np.any(P < 0):
            raise InvalidArgument("Transition matrix has negative entries")
        if not np.allclose(P.sum(axis=1), 1.0, rtol=0.0, atol=1e-12):
            raise InvalidArgument("Transition matrix rows must sum to 1")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @classmethod
    def from_matrix(cls, P) -> "TransitionMatrix":
        """Wrap an arbitrary row-stochastic matrix (no graph attached)."""
        P = np.asarray(P, dtype=float)
        return cls(P.shape[0], float("nan"), P)

    def support_graph(self) -> ComparisonGraph:
        """Graph of the off-diagonal support (i, j) with P_ij > 0 or P_ji > 0."""
        if self.graph is not None:
            return self.graph
        mask = (self.P > 0) | (self.P.T > 0)
        rows, cols = np.nonzero(np.triu(mask, 1))
        return ComparisonGraph(self.n, np.column_stack((rows, cols)))

    def strong_components(self) -> np.ndarray:
        """Strongly connected component label of each state of the directed chain."""
        _, labels = connected_components(csr_matrix(self.P > 0), directed=True, connection="strong")
        return labels

    def is_irreducible(self) -> bool:
        return bool(np.all(self.strong_components() == 0))


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray
    iterations: int
    residual: float


def build_transition(data: ComparisonData, d: float) -> TransitionMatrix:
    """
    P_ij = y_ij / d for (i, j) in E, P_ii = 1 − (1/d) Σ_k y_ik, zero elsewhere.

    Requires d ≥ d_max so the diagonal stays nonnegative.
    """
    graph = data.graph
    n = graph.n
    if not d > 0:
        raise InvalidArgument(f"d must be positive, got {d}")
    if graph.num_edges and d < graph.d_max:
        raise NormalizationTooSmall(
            f"d={d} is below the maximum degree {graph.d_max}",
            {"d": d, "d_max": graph.d_max},
        )
    P = np.zeros((n, n))
    if graph.num_edges:
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        P[i, j] = data.y / d
        P[j, i] = (1.0 - data.y) / d
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    # rounding can leave -1e-17 on the diagonal when d == d_max
    np.clip(P, 0.0, None, out=P)
    return TransitionMatrix(n, float(d), P, graph)


def default_d(graph: ComparisonGraph) -> float:
    """2 · d_max."""
    if graph.num_edges == 0:
        raise EmptyGraph("Cannot choose d for a graph with no edges")
    return 2.0 * graph.d_max


def cd_np_d(graph: ComparisonGraph, c_d: float = 2.0, p: Optional[float] = None) -> float:
    """
    d = c_d · n · p, falling back to the observed edge density when p is unknown.

    Raised to d_max if the product lands below it.
    """
    if graph.num_edges == 0:
        raise EmptyGraph("Cannot choose d for a graph with no edges")
    if c_d <= 0:
        raise InvalidArgument(f"c_d must be positive, got {c_d}")
    p = graph.edge_density if p is None else p
    d = c_d * graph.n * p
    if d < graph.d_max:
        logger.warning(f"c_d*n*p = {d:.3f} is below d_max = {graph.d_max}; using d_max")
        d = float(graph.d_max)
    return float(d)


def stationary(
    P: TransitionMatrix,
    tol: float = DEFAULT_TOL,
    max_iters: Optional[int] = None,
) -> StationaryDistribution:
    """Leading left eigenvector of P by power iteration from the uniform vector."""
    if P.graph is not None:
        components = P.graph.num_components()
    else:
        components = P.support_graph().num_components()
    if components != 1:
        raise Disconnected(
            f"Comparison graph has {components} connected components",
            {"components": components},
        )
    labels = P.strong_components()
    strong = int(labels.max()) + 1
    if strong != 1:
        # an item that won (or lost) every comparison it took part in
        isolated = np.flatnonzero(np.bincount(labels)[labels] == 1).tolist()
        logger.warning(f"Comparison chain is reducible: {strong} strong components, singleton states {isolated[:10]}")
        raise Disconnected(
            f"Comparison chain is reducible ({strong} strongly connected components)",
            {"components": 1, "strong_components": strong, "singletons": isolated},
        )
    max_iters = default_max_iters(P.n) if max_iters is None else max_iters

    pi = np.full(P.n, 1.0 / P.n)
    residual = float("inf")
    for iteration in range(1, max_iters + 1):
        nxt = pi @ P.P
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual <= tol:
            logger.debug(f"Power iteration converged in {iteration} iterations (residual {residual:.3e})")
            pi.setflags(write=False)
            return StationaryDistribution(pi, iteration, residual)

    logger.warning(f"Power iteration stopped after {max_iters} iterations with residual {residual:.3e}")
    raise NoConvergence(
        f"Power iteration did not reach tol={tol} in {max_iters} iterations",
        iterations=max_iters,
        residual=residual,
    )


def spectral_rank(
    data: ComparisonData,
    K: int,
    d: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    max_iters: Optional[int] = None,
) -> RankingResult:
    """Top-K items by the stationary distribution of the comparison chain."""
    check_k(K, data.n)
    if data.graph.num_edges == 0:
        raise Disconnected("Comparison graph has no edges", {"components": data.n})
    d = default_d(data.graph) if d is None else d
    result = stationary(build_transition(data, d), tol=tol, max_iters=max_iters)
    return RankingResult.from_estimate(result.pi, K, scale="pi", iterations=result.iterations)


def dense_stationary(P) -> np.ndarray:
    """Stationary distribution from a dense eigendecomposition of Pᵀ (reference solver)."""
    M = np.asarray(getattr(P, "P", P), dtype=float)
    eigenvalues, vectors = eig(M.T)
    leading = vectors[:, int(np.argmin(np.abs(eigenvalues - 1.0)))].real
    return leading / leading.sum()
