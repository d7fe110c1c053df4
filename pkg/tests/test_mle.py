#!/usr/bin/env python3
"""
Tests for the regularized MLE module.

Tests:
- Negative log-likelihood values and shift invariance
- Gradient and Hessian against finite differences
- Gradient descent: convergence, mean-zero iterates, monotone objective
- Regularization parameter rules
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from topk_ranking.errors import BadK, DimensionMismatch, Disconnected, InvalidArgument, NoConvergence
from topk_ranking.metrics import lambda_min_perp, laplacian
from topk_ranking.mle import (
    MleConfig,
    auto_lambda,
    fit_mle,
    grad_nll,
    grad_reg,
    hessian,
    kappa_scaled_lambda,
    mle_rank,
    nll,
    reg_objective,
)
from topk_ranking.model import (
    ComparisonData,
    ComparisonGraph,
    complete_graph,
    generate_er_graph,
    make_scores,
    population_frequencies,
    sample_comparisons,
    uniform_scores,
)


def random_instance(rng, n_max=10, L=5):
    """A connected random graph with sampled comparisons and a random θ."""
    while True:
        n = int(rng.integers(2, n_max + 1))
        graph = generate_er_graph(n, float(rng.uniform(0.4, 1.0)), seed=rng)
        if graph.num_edges and graph.is_connected():
            break
    data = sample_comparisons(graph, uniform_scores(n, seed=rng), L, seed=rng)
    theta = rng.normal(scale=0.5, size=n)
    return data, theta


def single_edge(y):
    return ComparisonData(complete_graph(2), [y])


class TestObjective:
    """Test the negative log-likelihood."""

    def test_zero_theta(self):
        for y in (0.0, 0.3, 1.0):
            assert nll(np.zeros(2), single_edge(y)) == pytest.approx(math.log(2))

    def test_single_edge_formula(self):
        """Item 0 wins every comparison: loss is −t + log(1 + e^t) at θ = (t, 0)."""
        data = single_edge(0.0)
        for t in (-3.0, 0.0, 0.7, 5.0):
            assert nll(np.array([t, 0.0]), data) == pytest.approx(-t + math.log1p(math.exp(t)))

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        data, theta = random_instance(rng)
        assert nll(theta + 3.7, data) == pytest.approx(nll(theta, data), rel=1e-12)

    def test_no_overflow(self):
        value = nll(np.array([0.0, 800.0]), single_edge(0.0))
        assert value == pytest.approx(800.0)

    def test_regularizer(self):
        data = single_edge(0.5)
        theta = np.array([1.0, -1.0])
        assert reg_objective(theta, data, 2.0) == pytest.approx(nll(theta, data) + 2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            nll(np.zeros(3), single_edge(0.5))
        with pytest.raises(DimensionMismatch):
            grad_nll(np.zeros(3), single_edge(0.5))


class TestGradient:
    """Test the gradient against finite differences."""

    def test_population_gradient_vanishes_at_truth(self):
        scores = make_scores([0.9, 0.6, 0.75, 0.5, 1.0])
        data = population_frequencies(complete_graph(5), scores)
        np.testing.assert_allclose(grad_nll(scores.theta, data), 0.0, atol=1e-12)
        np.testing.assert_allclose(grad_reg(scores.theta, data, 0.3), 0.3 * scores.theta, atol=1e-12)

    def test_sums_to_zero(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            data, theta = random_instance(rng)
            assert abs(grad_nll(theta, data).sum()) <= 1e-12

    def test_central_differences(self):
        """grad_reg matches central differences (h=1e-6) to relative error 1e-6 on 100 instances."""
        rng = np.random.default_rng(2)
        h = 1e-6
        for _ in range(100):
            data, theta = random_instance(rng)
            lam = float(rng.uniform(0.0, 2.0))
            grad = grad_reg(theta, data, lam)
            numeric = np.array([
                (reg_objective(theta + h * e, data, lam) - reg_objective(theta - h * e, data, lam)) / (2 * h)
                for e in np.eye(theta.size)
            ])
            scale = max(np.linalg.norm(grad), 1.0)
            assert np.linalg.norm(numeric - grad) / scale <= 1e-6


class TestHessian:
    """Test the Hessian."""

    def test_quarter_laplacian_at_zero(self):
        graph = complete_graph(3)
        data = ComparisonData(graph, [0.2, 0.5, 0.9])
        np.testing.assert_allclose(hessian(np.zeros(3), data), laplacian(graph) / 4)

    def test_annihilates_ones(self):
        rng = np.random.default_rng(3)
        data, theta = random_instance(rng)
        H = hessian(theta, data, 0.7)
        np.testing.assert_allclose(H @ np.ones(data.n), 0.7, atol=1e-12)
        np.testing.assert_allclose(H, H.T)

    def test_matches_gradient_differences(self):
        """Hessian columns match central differences of the gradient to 1e-5 on 100 instances."""
        rng = np.random.default_rng(4)
        h = 1e-5
        for _ in range(100):
            data, theta = random_instance(rng)
            lam = float(rng.uniform(0.0, 2.0))
            H = hessian(theta, data, lam)
            numeric = np.column_stack([
                (grad_reg(theta + h * e, data, lam) - grad_reg(theta - h * e, data, lam)) / (2 * h)
                for e in np.eye(theta.size)
            ])
            assert np.max(np.abs(numeric - H)) <= 1e-5 * max(1.0, np.max(np.abs(H)))

    def test_smoothness_bound(self):
        """λ_max of the regularized Hessian is at most λ + d_max / 2."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            data, theta = random_instance(rng, n_max=15)
            H = hessian(theta, data, 0.5)
            assert np.linalg.eigvalsh(H).max() <= 0.5 + data.graph.d_max / 2 + 1e-12

    def test_strong_convexity_floor(self):
        """λ_min,⊥ ≥ λ + λ_min,⊥(L_G) / (4κe^{2C}) for θ within ℓ∞ distance C of θ*."""
        rng = np.random.default_rng(6)
        for _ in range(20):
            n = int(rng.integers(3, 16))
            graph = generate_er_graph(n, 0.7, seed=rng)
            if not graph.is_connected():
                continue
            scores = uniform_scores(n, seed=rng)
            data = sample_comparisons(graph, scores, 10, seed=rng)
            C = 0.5
            theta = scores.theta + rng.uniform(-C, C, size=n)
            lam = 0.3
            floor = lam + lambda_min_perp(laplacian(graph)) / (4 * scores.kappa * math.exp(2 * C))
            assert lambda_min_perp(hessian(theta, data, lam)) >= floor - 1e-12


class TestFitMle:
    """Test gradient descent."""

    def test_two_items_population(self):
        """w=(2,1), λ=1e-8: θ ≈ (ln2/2, −ln2/2)."""
        data = population_frequencies(complete_graph(2), make_scores([2, 1]))
        fit = fit_mle(data, MleConfig(lambda_=1e-8))
        np.testing.assert_allclose(fit.theta, [math.log(2) / 2, -math.log(2) / 2], atol=1e-4)

    def test_matches_tight_reference(self):
        """Default tolerance lands within 1e-6 of a much tighter reference fit."""
        rng = np.random.default_rng(7)
        data, _ = random_instance(rng, n_max=12, L=20)
        loose = fit_mle(data, MleConfig(lambda_=0.5))
        tight = fit_mle(data, MleConfig(lambda_=0.5, grad_tol=1e-13))
        np.testing.assert_allclose(loose.theta, tight.theta, atol=1e-6)

    def test_matches_quasi_newton(self):
        """Agrees with BFGS on the same objective."""
        rng = np.random.default_rng(17)
        data, _ = random_instance(rng, n_max=10, L=10)
        lam = 0.3
        fit = fit_mle(data, MleConfig(lambda_=lam))
        reference = minimize(
            reg_objective, np.zeros(data.n), args=(data, lam), jac=grad_reg, method="BFGS", options={"gtol": 1e-10}
        )
        np.testing.assert_allclose(fit.theta, reference.x, atol=1e-5)

    def test_even_split_gives_zero(self):
        graph = complete_graph(12)
        data = ComparisonData(graph, np.full(graph.num_edges, 0.5))
        fit = fit_mle(data, MleConfig(lambda_=1.0))
        np.testing.assert_array_equal(fit.theta, 0.0)
        assert fit.iterations == 0

    def test_mean_zero_and_monotone(self):
        """Every iterate is mean-zero and the objective never increases."""
        rng = np.random.default_rng(8)
        data, _ = random_instance(rng, n_max=10, L=10)
        lam = 0.4
        objectives, sums = [], []

        def record(iteration, theta, grad_norm):
            objectives.append(reg_objective(theta, data, lam))
            sums.append(abs(theta.sum()))

        fit_mle(data, MleConfig(lambda_=lam), callback=record)
        assert objectives
        assert max(sums) <= 1e-10
        assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))

    def test_geometric_convergence(self):
        """‖θᵗ − θ̂‖ ≤ ρᵗ‖θ⁰ − θ̂‖ with ρ = 1 − λ / (λ + np)."""
        graph = generate_er_graph(20, 0.5, seed=10)
        data = sample_comparisons(graph, uniform_scores(20, seed=11), 10, seed=12)
        lam = 1.0
        config = MleConfig(lambda_=lam, step=1 / (lam + 20 * 0.5))
        ref = fit_mle(data, MleConfig(lambda_=lam, grad_tol=1e-13)).theta
        rho = 1 - lam / (lam + 20 * 0.5)
        start = np.linalg.norm(ref)
        distances = []
        fit_mle(data, config, callback=lambda t, theta, g: distances.append((t, np.linalg.norm(theta - ref))))
        for t, distance in distances:
            assert distance <= rho ** t * start + 1e-9

    def test_unregularized(self):
        graph = generate_er_graph(15, 0.8, seed=13)
        data = sample_comparisons(graph, uniform_scores(15, seed=14), 50, seed=15)
        fit = fit_mle(data, MleConfig(lambda_=0.0))
        assert fit.lambda_ == 0.0
        assert abs(fit.theta.sum()) <= 1e-10
        assert np.linalg.norm(grad_nll(fit.theta, data)) <= 1e-8 * 15

    def test_disconnected(self):
        graph = ComparisonGraph.from_edges(4, [(0, 1), (2, 3)])
        with pytest.raises(Disconnected):
            fit_mle(ComparisonData(graph, [0.4, 0.6]))

    def test_no_convergence(self):
        graph = generate_er_graph(10, 0.8, seed=1)
        data = sample_comparisons(graph, uniform_scores(10, seed=2), 5, seed=3)
        with pytest.raises(NoConvergence) as excinfo:
            fit_mle(data, MleConfig(lambda_=0.1, max_iters=3))
        assert excinfo.value.iterations == 3

    def test_population_data_defaults_to_zero_lambda(self):
        data = population_frequencies(complete_graph(3), make_scores([3, 2, 1]))
        config = MleConfig().resolve(data)
        assert config.lambda_ == 0.0
        assert config.step == pytest.approx(1 / 3)
        assert config.grad_tol == pytest.approx(3e-8)


class TestMleRank:
    """Test top-K selection by fitted scores."""

    def test_population_top_two(self):
        data = population_frequencies(complete_graph(3), make_scores([3, 2, 1]))
        result = mle_rank(data, 2)
        assert result.topk == frozenset({0, 1})
        assert result.scale == "theta"

    def test_bad_k(self):
        data = population_frequencies(complete_graph(3), make_scores([3, 2, 1]))
        with pytest.raises(BadK):
            mle_rank(data, 0)


class TestLambdaRules:
    """Test the regularization parameter rules."""

    def test_auto_lambda_value(self):
        assert auto_lambda(200, 0.25, 20) == pytest.approx(7.279, abs=1e-3)

    def test_auto_lambda_scaling(self):
        assert auto_lambda(200, 0.25, 80) == pytest.approx(auto_lambda(200, 0.25, 20) / 2)
        assert auto_lambda(200, 0.25, 10**12) < 1e-4

    def test_auto_lambda_validation(self):
        with pytest.raises(InvalidArgument):
            auto_lambda(200, 0.0, 20)
        with pytest.raises(InvalidArgument):
            auto_lambda(200, 0.25, 0)

    def test_kappa_scaled_lambda(self):
        assert kappa_scaled_lambda(200, 0.25, 20, math.e) == pytest.approx(auto_lambda(200, 0.25, 20))
        with pytest.raises(InvalidArgument):
            kappa_scaled_lambda(200, 0.25, 20, 1.0)

    def test_config_validation(self):
        with pytest.raises(InvalidArgument):
            MleConfig(lambda_=-1.0)
        with pytest.raises(InvalidArgument):
            MleConfig(step=0.0)
        with pytest.raises(InvalidArgument):
            MleConfig(max_iters=0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
