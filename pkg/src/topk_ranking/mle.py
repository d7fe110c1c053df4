"""
Regularized MLE Module

Negative log-likelihood of the BTL model, its gradient and Hessian, and a
constant-step gradient-descent solver for

    L_λ(θ) = Σ_{(i,j) ∈ E} [−y_ij (θ_j − θ_i) + log(1 + e^{θ_j − θ_i})] + (λ/2)‖θ‖²

where y_ij is the fraction of comparisons on (i, j) won by j.

Usage:
    from topk_ranking.mle import MleConfig, mle_rank

    result = mle_rank(data, K=10)                        # λ from auto_lambda
    result = mle_rank(data, K=10, config=MleConfig(lambda_=0.0))
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import expit

from topk_ranking.errors import (
    Disconnected,
    DimensionMismatch,
    InvalidArgument,
    NoConvergence,
    check_k,
)
from topk_ranking.metrics import RankingResult
from topk_ranking.model import ComparisonData

logger = logging.getLogger(__name__)

IterationCallback = Callable[[int, np.ndarray, float], None]


@dataclass(frozen=True)
class MleConfig:
    """
    Solver settings. Fields left as None are derived from the data:
    lambda_ from auto_lambda, step from 1/(λ + max(n·p_est, d_max/2)),
    grad_tol as 1e-8·n.
    """

    lambda_: Optional[float] = None
    step: Optional[float] = None
    grad_tol: Optional[float] = None
    max_iters: int = 10**6
    c_lambda: float = 2.0

    def __post_init__(self):
        if self.lambda_ is not None and self.lambda_ < 0:
            raise InvalidArgument(f"lambda must be nonnegative, got {self.lambda_}")
        if self.step is not None and self.step <= 0:
            raise InvalidArgument(f"step must be positive, got {self.step}")
        if self.grad_tol is not None and self.grad_tol <= 0:
            raise InvalidArgument(f"grad_tol must be positive, got {self.grad_tol}")
        if self.max_iters < 1:
            raise InvalidArgument(f"max_iters must be positive, got {self.max_iters}")
        if self.c_lambda <= 0:
            raise InvalidArgument(f"c_lambda must be positive, got {self.c_lambda}")

    def resolve(self, data: ComparisonData) -> "MleConfig":
        """Return a copy with every derived field filled in for `data`."""
        graph = data.graph
        lam = self.lambda_
        if lam is None:
            if data.L is None:
                lam = 0.0
            else:
                lam = auto_lambda(graph.n, graph.edge_density, data.L, self.c_lambda)
        step = self.step
        if step is None:
            step = 1.0 / (lam + max(graph.n * graph.edge_density, graph.d_max / 2))
        grad_tol = 1e-8 * graph.n if self.grad_tol is None else self.grad_tol
        return replace(self, lambda_=float(lam), step=float(step), grad_tol=float(grad_tol))


@dataclass(frozen=True)
class MleFit:
    theta: np.ndarray
    iterations: int
    final_grad_norm: float
    objective: float
    lambda_: float = 0.0

    @property
    def exp_theta(self) -> np.ndarray:
        return np.exp(self.theta)


def auto_lambda(n: int, p_est: float, L: int, c_lambda: float = 2.0) -> float:
    """λ = c_λ · sqrt(n · p · ln n / L)."""
    if n < 2 or not 0 < p_est <= 1 or L < 1:
        raise InvalidArgument(f"Need n >= 2, 0 < p <= 1, L >= 1; got n={n}, p={p_est}, L={L}")
    return c_lambda * math.sqrt(n * p_est * math.log(n) / L)


def kappa_scaled_lambda(n: int, p: float, L: int, kappa: float, c_lambda: float = 2.0) -> float:
    """λ = c_λ · (1 / log κ) · sqrt(n · p · ln n / L), for score ranges with κ > 1."""
    if kappa <= 1:
        raise InvalidArgument(f"kappa_scaled_lambda needs kappa > 1, got {kappa}")
    return auto_lambda(n, p, L, c_lambda) / math.log(kappa)


def _edge_terms(theta, data: ComparisonData) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != data.n:
        raise DimensionMismatch(
            f"theta has length {theta.size}, data has {data.n} items",
            {"theta": int(theta.size), "n": data.n},
        )
    i, j = data.graph.edges[:, 0], data.graph.edges[:, 1]
    return theta, i, j, theta[j] - theta[i]


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def nll(theta, data: ComparisonData) -> float:
    """Unregularized negative log-likelihood."""
    _, _, _, x = _edge_terms(theta, data)
    return float(np.sum(-data.y * x + _softplus(x)))


def reg_objective(theta, data: ComparisonData, lambda_: float) -> float:
    theta = np.asarray(theta, dtype=float)
    return nll(theta, data) + 0.5 * lambda_ * float(theta @ theta)


def grad_nll(theta, data: ComparisonData) -> np.ndarray:
    theta, i, j, x = _edge_terms(theta, data)
    r = expit(x) - data.y
    n = theta.size
    return np.bincount(j, weights=r, minlength=n) - np.bincount(i, weights=r, minlength=n)


def grad_reg(theta, data: ComparisonData, lambda_: float) -> np.ndarray:
    return grad_nll(theta, data) + lambda_ * np.asarray(theta, dtype=float)


def hessian(theta, data: ComparisonData, lambda_: float = 0.0) -> np.ndarray:
    """Σ σ(x)(1−σ(x)) (e_i − e_j)(e_i − e_j)ᵀ + λI."""
    theta, i, j, x = _edge_terms(theta, data)
    s = expit(x)
    weights = s * (1.0 - s)
    n = theta.size
    H = np.zeros((n, n))
    H[i, j] = -weights
    H[j, i] = -weights
    degrees = np.bincount(i, weights=weights, minlength=n) + np.bincount(j, weights=weights, minlength=n)
    H[np.diag_indices(n)] = degrees + lambda_
    return H


def fit_mle(
    data: ComparisonData,
    config: Optional[MleConfig] = None,
    callback: Optional[IterationCallback] = None,
) -> MleFit:
    """
    Gradient descent from θ = 0 with a constant step.

    `callback(iteration, theta, grad_norm)` is invoked after every update.
    """
    components = data.graph.num_components()
    if components != 1:
        raise Disconnected(
            f"Comparison graph has {components} connected components",
            {"components": components},
        )
    cfg = (config or MleConfig()).resolve(data)
    lam, step, tol = cfg.lambda_, cfg.step, cfg.grad_tol

    theta = np.zeros(data.n)
    grad = grad_reg(theta, data, lam)
    grad_norm = float(np.linalg.norm(grad))
    iteration = 0
    while grad_norm > tol:
        if iteration >= cfg.max_iters:
            logger.warning(f"Gradient descent stopped after {iteration} iterations, |grad| = {grad_norm:.3e}")
            raise NoConvergence(
                f"MLE did not reach grad_tol={tol:.3e} in {cfg.max_iters} iterations",
                iterations=iteration,
                residual=grad_norm,
            )
        theta = theta - step * grad
        iteration += 1
        grad = grad_reg(theta, data, lam)
        grad_norm = float(np.linalg.norm(grad))
        if callback is not None:
            callback(iteration, theta, grad_norm)

    logger.debug(f"MLE converged: lambda={lam:.4g} step={step:.4g} iterations={iteration} |grad|={grad_norm:.3e}")
    theta.setflags(write=False)
    return MleFit(theta, iteration, grad_norm, reg_objective(theta, data, lam), lam)


def mle_rank(data: ComparisonData, K: int, config: Optional[MleConfig] = None) -> RankingResult:
    """Top-K items by fitted θ."""
    check_k(K, data.n)
    fit = fit_mle(data, config)
    return RankingResult.from_estimate(fit.theta, K, scale="theta", iterations=fit.iterations)
