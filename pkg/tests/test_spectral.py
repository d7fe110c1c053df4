#!/usr/bin/env python3
"""
Tests for the spectral ranking module.

Tests:
- Transition matrix construction and validation
- Choice of the normalization d
- Power iteration against detailed balance and a dense eigensolver
- Top-K selection by stationary distribution
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from topk_ranking.errors import (
    BadK,
    Disconnected,
    EmptyGraph,
    InvalidArgument,
    NoConvergence,
    NormalizationTooSmall,
)
from topk_ranking.model import (
    ComparisonData,
    ComparisonGraph,
    complete_graph,
    generate_er_graph,
    make_scores,
    population_frequencies,
    sample_comparisons,
    two_level_scores,
    uniform_scores,
)
from topk_ranking.spectral import (
    TransitionMatrix,
    build_transition,
    cd_np_d,
    default_d,
    default_max_iters,
    dense_stationary,
    spectral_rank,
    stationary,
)


def star_graph(n):
    return ComparisonGraph.from_edges(n, [(0, j) for j in range(1, n)])


class TestBuildTransition:
    """Test the comparison chain P."""

    def test_two_node_matrix(self):
        """y_01 = 1/3, d = 2: P = [[5/6, 1/6], [1/3, 2/3]]."""
        data = ComparisonData(complete_graph(2), [1 / 3])
        P = build_transition(data, 2).P
        np.testing.assert_allclose(P, [[5 / 6, 1 / 6], [1 / 3, 2 / 3]])

    def test_empty_graph_is_identity(self):
        data = ComparisonData(ComparisonGraph.from_edges(4, []), [])
        np.testing.assert_array_equal(build_transition(data, 3).P, np.eye(4))

    def test_rows_sum_to_one(self):
        graph = generate_er_graph(40, 0.3, seed=2)
        data = sample_comparisons(graph, uniform_scores(40, seed=3), 5, seed=4)
        P = build_transition(data, default_d(graph)).P
        np.testing.assert_allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-15)
        assert np.all(P >= 0)

    def test_d_equal_to_dmax_keeps_diagonal_nonnegative(self):
        graph = star_graph(5)
        data = ComparisonData(graph, [1.0, 1.0, 1.0, 1.0])
        P = build_transition(data, graph.d_max).P
        assert P[0, 0] == 0.0
        assert np.all(P >= 0)

    def test_d_below_dmax(self):
        graph = star_graph(5)
        data = population_frequencies(graph, make_scores([1, 1, 1, 1, 1]))
        with pytest.raises(NormalizationTooSmall):
            build_transition(data, 3)

    def test_nonpositive_d(self):
        data = ComparisonData(complete_graph(2), [0.5])
        with pytest.raises(InvalidArgument):
            build_transition(data, 0)

    def test_read_only(self):
        P = build_transition(ComparisonData(complete_graph(2), [0.5]), 2)
        with pytest.raises(ValueError):
            P.P[0, 0] = 1.0

    def test_from_matrix_validates(self):
        with pytest.raises(InvalidArgument):
            TransitionMatrix.from_matrix([[0.5, 0.4], [0.5, 0.5]])
        with pytest.raises(InvalidArgument):
            TransitionMatrix.from_matrix([[1.5, -0.5], [0.5, 0.5]])


class TestChooseD:
    """Test the normalization rules."""

    def test_complete_and_star(self):
        assert default_d(complete_graph(5)) == 8
        assert default_d(star_graph(5)) == 8

    def test_empty_graph(self):
        with pytest.raises(EmptyGraph):
            default_d(ComparisonGraph.from_edges(3, []))

    def test_er_graph_within_degree_band(self):
        """n=200, p=0.25: 2·d_max lies in [2np, 3np] when the degree event holds."""
        graph = generate_er_graph(200, 0.25, seed=8)
        d = default_d(graph)
        assert 2 * 50 <= d <= 3 * 50

    def test_cd_np(self):
        graph = complete_graph(10)
        assert cd_np_d(graph, 2.0, p=1.0) == 20.0
        assert cd_np_d(graph, 2.0) == 20.0

    def test_cd_np_raised_to_dmax(self):
        graph = star_graph(10)
        assert cd_np_d(graph, 2.0, p=0.1) == 9.0


class TestStationary:
    """Test power iteration."""

    def test_two_items(self):
        """Population chain for w=(2,1) on the complete graph: π = (2/3, 1/3)."""
        data = population_frequencies(complete_graph(2), make_scores([2, 1]))
        result = stationary(build_transition(data, 2))
        np.testing.assert_allclose(result.pi, [2 / 3, 1 / 3], atol=1e-11)
        assert result.residual <= 1e-12

    def test_three_items(self):
        data = population_frequencies(complete_graph(3), make_scores([3, 2, 1]))
        result = stationary(build_transition(data, 4))
        np.testing.assert_allclose(result.pi, [1 / 2, 1 / 3, 1 / 6], atol=1e-10)

    def test_identity_is_disconnected(self):
        with pytest.raises(Disconnected):
            stationary(TransitionMatrix.from_matrix(np.eye(3)))

    def test_disconnected_graph(self):
        graph = ComparisonGraph.from_edges(4, [(0, 1), (2, 3)])
        data = population_frequencies(graph, make_scores([1, 2, 3, 4]))
        with pytest.raises(Disconnected):
            stationary(build_transition(data, 2))

    def test_unbeaten_item_is_reducible(self):
        """Item 0 wins every comparison: the chain has an absorbing state."""
        data = ComparisonData(complete_graph(3), [0.0, 0.0, 0.5])
        P = build_transition(data, 4)
        assert not P.is_irreducible()
        with pytest.raises(Disconnected) as excinfo:
            stationary(P, max_iters=10)
        assert excinfo.value.data["strong_components"] == 2
        assert excinfo.value.data["singletons"] == [0]

    def test_winless_item_is_reducible(self):
        data = ComparisonData(complete_graph(3), [0.5, 0.0, 0.0])
        with pytest.raises(Disconnected):
            spectral_rank(data, 1)

    def test_sampled_chain_is_irreducible(self):
        graph = generate_er_graph(25, 0.4, seed=5)
        data = sample_comparisons(graph, uniform_scores(25, seed=6), 10, seed=7)
        assert build_transition(data, default_d(graph)).is_irreducible()

    def test_no_convergence(self):
        graph = generate_er_graph(30, 0.3, seed=1)
        data = sample_comparisons(graph, uniform_scores(30, seed=2), 5, seed=3)
        with pytest.raises(NoConvergence) as excinfo:
            stationary(build_transition(data, default_d(graph)), tol=1e-15, max_iters=2)
        assert excinfo.value.iterations == 2
        assert excinfo.value.residual > 1e-15

    def test_matches_dense_solver(self):
        graph = generate_er_graph(25, 0.4, seed=5)
        data = sample_comparisons(graph, uniform_scores(25, seed=6), 10, seed=7)
        P = build_transition(data, default_d(graph))
        np.testing.assert_allclose(stationary(P).pi, dense_stationary(P), atol=1e-10)

    def test_detailed_balance_oracle(self):
        """Population chains on random connected graphs recover w / sum(w) within 1e-10."""
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 100:
            n = int(rng.integers(3, 51))
            graph = generate_er_graph(n, float(rng.uniform(0.3, 0.9)), seed=rng)
            if not graph.is_connected():
                continue
            scores = uniform_scores(n, seed=rng)
            result = stationary(build_transition(population_frequencies(graph, scores), default_d(graph)))
            assert np.max(np.abs(result.pi - scores.pi_star)) <= 1e-10
            checked += 1

    def test_scale_invariance(self):
        """Scaling every score by c leaves the population chain and π bit-identical."""
        graph = complete_graph(6)
        base = make_scores([0.8, 1.0, 0.5, 0.7, 0.9, 0.6])
        scaled = make_scores(base.w * 4.0)
        a = stationary(build_transition(population_frequencies(graph, base), 10))
        b = stationary(build_transition(population_frequencies(graph, scaled), 10))
        np.testing.assert_array_equal(a.pi, b.pi)

    def test_default_max_iters(self):
        assert default_max_iters(200) == 30_000


class TestSpectralRank:
    """Test top-K selection."""

    def test_population_top_one(self):
        data = population_frequencies(complete_graph(3), make_scores([3, 2, 1]))
        assert spectral_rank(data, 1).topk == frozenset({0})
        data = population_frequencies(complete_graph(3), make_scores([1, 1, 2]))
        assert spectral_rank(data, 1).topk == frozenset({2})

    def test_ordering_and_scale(self):
        data = population_frequencies(complete_graph(4), make_scores([1, 4, 3, 2]))
        result = spectral_rank(data, 2)
        assert result.order.tolist() == [1, 2, 3, 0]
        assert result.scale == "pi"
        assert result.estimate.sum() == pytest.approx(1.0)
        assert result.iterations >= 1

    def test_bad_k(self):
        data = population_frequencies(complete_graph(3), make_scores([3, 2, 1]))
        with pytest.raises(BadK):
            spectral_rank(data, 3)
        with pytest.raises(BadK):
            spectral_rank(data, 0)

    def test_empty_graph(self):
        data = ComparisonData(ComparisonGraph.from_edges(3, []), [])
        with pytest.raises(Disconnected):
            spectral_rank(data, 1)

    @pytest.mark.slow
    def test_two_level_recovery(self):
        """n=200, Δ=0.4, p=0.25, L=20: top-10 set recovered in at least 95 of 100 trials."""
        scores = two_level_scores(200, 10, 0.4)
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            graph = generate_er_graph(200, 0.25, seed=rng)
            if not graph.is_connected():
                continue
            data = sample_comparisons(graph, scores, 20, seed=rng)
            hits += spectral_rank(data, 10).topk == frozenset(range(10))
        assert hits >= 95


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
