"""
Metrics Module

Error norms, π-weighted geometry, separation measures, Laplacian spectra
and top-K accuracy scoring.

All separation measures sort an internal copy of the scores, so callers may
pass scores in any order.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Union

import numpy as np
from scipy.linalg import null_space

from topk_ranking.errors import (
    BadK,
    DimensionMismatch,
    InvalidArgument,
    NotReversible,
    NotSymmetric,
    ZeroTruth,
    check_k,
)
from topk_ranking.model import ComparisonGraph, ScoreVector, descending_order

if TYPE_CHECKING:
    from topk_ranking.spectral import TransitionMatrix

logger = logging.getLogger(__name__)

REVERSIBILITY_TOL = 1e-10


def _pair(est, truth):
    est = np.asarray(est, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if est.shape != truth.shape:
        raise DimensionMismatch(
            f"Estimate has length {est.size}, truth has length {truth.size}",
            {"estimate": int(est.size), "truth": int(truth.size)},
        )
    if not np.any(truth):
        raise ZeroTruth("Reference vector is identically zero")
    return est, truth


def rel_linf_error(est, truth) -> float:
    """‖est − truth‖∞ / ‖truth‖∞."""
    est, truth = _pair(est, truth)
    return float(np.max(np.abs(est - truth)) / np.max(np.abs(truth)))


def rel_l2_error(est, truth) -> float:
    """‖est − truth‖₂ / ‖truth‖₂."""
    est, truth = _pair(est, truth)
    return float(np.linalg.norm(est - truth) / np.linalg.norm(truth))


# ---------------------------------------------------------------------------
# π-weighted geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiNormSpace:
    """Inner-product space ⟨x, y⟩_π = Σ π_i x_i y_i for a positive probability vector π."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float).reshape(-1)
        if pi.size == 0 or np.any(pi <= 0) or not np.all(np.isfinite(pi)):
            raise InvalidArgument("π must have strictly positive finite entries")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise InvalidArgument(f"π must sum to 1, got {pi.sum()!r}")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return int(self.pi.size)

    def _vec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise DimensionMismatch(f"Vector has length {x.size}, space has dimension {self.n}")
        return x

    def inner(self, x, y) -> float:
        return float(np.sum(self.pi * self._vec(x) * self._vec(y)))

    def vec_norm(self, x) -> float:
        x = self._vec(x)
        return float(np.sqrt(np.sum(self.pi * x * x)))

    def mat_norm(self, A) -> float:
        """
        sup over x of ‖xᵀA‖_π / ‖x‖_π.

        Substituting u = Π^{1/2} x turns the ratio into ‖Π^{1/2} Aᵀ Π^{-1/2} u‖₂ / ‖u‖₂,
        so the supremum is the largest singular value of that matrix.
        """
        A = np.asarray(A, dtype=float)
        if A.shape != (self.n, self.n):
            raise DimensionMismatch(f"Matrix has shape {A.shape}, space has dimension {self.n}")
        root = np.sqrt(self.pi)
        similar = root[:, None] * A.T / root[None, :]
        return float(np.linalg.norm(similar, ord=2))


def pi_inner(space: PiNormSpace, x, y) -> float:
    return space.inner(x, y)


def pi_vec_norm(space: PiNormSpace, x) -> float:
    return space.vec_norm(x)


def pi_mat_norm(space: PiNormSpace, A) -> float:
    return space.mat_norm(A)


# ---------------------------------------------------------------------------
# Rankings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankingResult:
    """
    An estimated score vector with its induced ordering and top-K set.

    `scale` tags what the estimate is: "pi" for a stationary distribution,
    "theta" for fitted log-scores.
    """

    estimate: np.ndarray
    order: np.ndarray
    topk: frozenset
    scale: str
    iterations: int = 0

    @classmethod
    def from_estimate(cls, estimate, K: int, scale: str, iterations: int = 0) -> "RankingResult":
        estimate = np.array(estimate, dtype=float).reshape(-1)
        check_k(K, estimate.size)
        order = descending_order(estimate)
        estimate.setflags(write=False)
        order.setflags(write=False)
        return cls(estimate, order, frozenset(int(i) for i in order[:K]), scale, iterations)

    @property
    def K(self) -> int:
        return len(self.topk)

    @property
    def n(self) -> int:
        return int(self.estimate.size)

    def ranked_items(self):
        """Yield (rank, item, score) with rank starting at 1."""
        for rank, item in enumerate(self.order, start=1):
            yield rank, int(item), float(self.estimate[item])


def topk_accuracy(result: RankingResult, true_topk: Iterable[int]) -> float:
    """1.0 if the selected set equals the true top-K set exactly, else 0.0."""
    truth = frozenset(int(i) for i in true_topk)
    if len(truth) != result.K:
        raise BadK(f"True top-K set has {len(truth)} items, result selected {result.K}")
    return 1.0 if truth == result.topk else 0.0


def batch_topk_accuracy(results: Iterable[RankingResult], true_topk: Iterable[int]) -> float:
    """Mean exact-recovery rate over Monte-Carlo trials."""
    truth = frozenset(true_topk)
    hits = [topk_accuracy(r, truth) for r in results]
    if not hits:
        raise InvalidArgument("No results to score")
    return float(np.mean(hits))


# ---------------------------------------------------------------------------
# Separation measures
# ---------------------------------------------------------------------------


def _sorted_scores(scores: Union[ScoreVector, np.ndarray], K: int) -> np.ndarray:
    w = scores.w if isinstance(scores, ScoreVector) else ScoreVector(scores).w
    check_k(K, w.size)
    return np.sort(w)[::-1]


def separation_dk(scores: Union[ScoreVector, np.ndarray], K: int) -> float:
    """Δ_K = (w_(K) − w_(K+1)) / w_max on the descending order statistics."""
    w = _sorted_scores(scores, K)
    return float((w[K - 1] - w[K]) / w[0])


def generalized_separation(scores: Union[ScoreVector, np.ndarray], K: int) -> float:
    """
    Δ*_K = ((w_K − w_{K+1}) / w_{K+1}) · sqrt((1/n) Σ_i w_{K+1} w_i / (w_K + w_i)²).

    The sum runs over every item present in `scores`. To drop items from the
    sum, pass the reduced score vector.
    """
    w = _sorted_scores(scores, K)
    w_k, w_next = w[K - 1], w[K]
    spread = np.mean(w_next * w / (w_k + w) ** 2)
    return float((w_k - w_next) / w_next * np.sqrt(spread))


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------


def laplacian(graph: ComparisonGraph) -> np.ndarray:
    """L_G = Σ over edges of (e_i − e_j)(e_i − e_j)ᵀ."""
    A = graph.adjacency_matrix()
    return np.diag(A.sum(axis=1)) - A


def lambda_min_perp(A) -> float:
    """Smallest eigenvalue of symmetric A restricted to the complement of the all-ones vector."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"Expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-10 * scale):
        raise NotSymmetric("Matrix is not symmetric")
    n = A.shape[0]
    if n < 2:
        raise InvalidArgument("Need at least a 2x2 matrix")
    basis = null_space(np.ones((1, n)))
    restricted = basis.T @ A @ basis
    return float(np.linalg.eigvalsh((restricted + restricted.T) / 2).min())


def _matrix(P) -> np.ndarray:
    return np.asarray(getattr(P, "P", P), dtype=float)


def reversibility_defect(P, pi) -> float:
    """max_ij |π_i P_ij − π_j P_ji|."""
    M = _matrix(P)
    pi = np.asarray(pi, dtype=float).reshape(-1)
    if M.shape != (pi.size, pi.size):
        raise DimensionMismatch(f"Matrix shape {M.shape} does not match π of length {pi.size}")
    flow = pi[:, None] * M
    return float(np.max(np.abs(flow - flow.T)))


def reversible_spectrum(P, pi) -> np.ndarray:
    """
    Eigenvalues (ascending) of a chain reversible with respect to π.

    Uses the symmetric similarity transform Π^{1/2} P Π^{-1/2}.
    """
    defect = reversibility_defect(P, pi)
    if defect > REVERSIBILITY_TOL:
        raise NotReversible(f"Detailed balance fails by {defect:.3e}", {"defect": defect})
    M = _matrix(P)
    root = np.sqrt(np.asarray(pi, dtype=float))
    S = root[:, None] * M / root[None, :]
    return np.linalg.eigvalsh((S + S.T) / 2)


def second_eigen_modulus(P, pi) -> float:
    """max{λ₂(P), −λ_n(P)} for a reversible chain."""
    eigenvalues = reversible_spectrum(P, pi)
    return float(max(eigenvalues[-2], -eigenvalues[0]))


def spectral_gap_gamma(P: "Union[TransitionMatrix, np.ndarray]", Pstar, pistar) -> float:
    """γ = 1 − max{λ₂(P*), −λ_n(P*)} − ‖P − P*‖_{π*}. May be ≤ 0."""
    M, Mstar = _matrix(P), _matrix(Pstar)
    if M.shape != Mstar.shape:
        raise DimensionMismatch(f"P has shape {M.shape}, P* has shape {Mstar.shape}")
    modulus = second_eigen_modulus(Mstar, pistar)
    perturbation = PiNormSpace(pistar).mat_norm(M - Mstar)
    gamma = 1.0 - modulus - perturbation
    logger.debug(f"Spectral gap: modulus={modulus:.6f} perturbation={perturbation:.6f} gamma={gamma:.6f}")
    return float(gamma)


def kappa_gap_floor(kappa: float) -> float:
    """The spectral-gap lower bound 1 / (6κ²)."""
    return 1.0 / (6.0 * kappa ** 2)


def laplacian_floor(n: int, p: float) -> float:
    """np/2, the high-probability floor of λ_min,⊥(L_G) for G(n, p)."""
    return n * p / 2
