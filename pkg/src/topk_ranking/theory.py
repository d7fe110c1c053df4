"""
Theory Module

Numerically checkable pieces of the ranking theory:

- eigenvector perturbation bounds for transition matrices
- Bernoulli KL / χ² divergences and the Pinsker TV bound
- sample-complexity thresholds (upper bounds for the spectral method and
  the MLE, minimax lower bounds in Δ_K and Δ*_K)
- a randomized falsification harness for the perturbation bound

All thresholds are order-wise statements; the unspecified constants are
explicit parameters defaulting to 1 and every report carries its formula.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.special import rel_entr

from topk_ranking.errors import (
    BadEps,
    BadRegime,
    DegenerateQ,
    DimensionMismatch,
    InvalidArgument,
    NotReversible,
)
from topk_ranking.metrics import (
    REVERSIBILITY_TOL,
    PiNormSpace,
    generalized_separation,
    reversibility_defect,
    second_eigen_modulus,
    separation_dk,
)
from topk_ranking.model import (
    ScoreVector,
    generate_er_graph,
    population_frequencies,
    sample_comparisons,
    spawn_seeds,
    uniform_scores,
)
from topk_ranking.spectral import (
    TransitionMatrix,
    build_transition,
    default_d,
    stationary,
)

logger = logging.getLogger(__name__)

# Absolute slack when comparing a bound against its left-hand side; covers
# the power-iteration tolerance on the three stationary distributions.
VIOLATION_SLACK = 1e-10


# ---------------------------------------------------------------------------
# Eigenvector perturbation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationReport:
    """
    ‖π − π̂‖_{π*} against two forms of the perturbation bound.

    Stated form (lhs, rhs, denom, applicable):
        rhs = ‖πᵀ(P − P̂)‖_{π*} / (1 − max{λ₂(P*), −λ_n(P*)} − ‖P − P̂‖_{π*})

    Derivation form (rhs_proof, denom_proof, applicable_proof):
        rhs_proof = ‖πᵀ(P − P̂)‖_{π*} / (1 − ‖P* − 1π*ᵀ‖_{π*} − ‖P̂ − P*‖_{π*})

    The derivation form holds in any induced norm. The stated form replaces
    ‖P* − 1π*ᵀ‖_{π*} by the eigenvalue modulus, which is exact only when
    the left action of P* is self-adjoint in the π*-norm (uniform π*).
    """

    lhs: float
    rhs: float
    denom: float
    applicable: bool
    numerator: float
    modulus: float
    rhs_proof: float
    denom_proof: float
    applicable_proof: bool

    @property
    def violated(self) -> bool:
        return self.applicable and self.lhs > self.rhs + VIOLATION_SLACK

    @property
    def violated_proof(self) -> bool:
        return self.applicable_proof and self.lhs > self.rhs_proof + VIOLATION_SLACK


def _as_transition(P) -> TransitionMatrix:
    return P if isinstance(P, TransitionMatrix) else TransitionMatrix.from_matrix(P)


def check_perturbation(P, Phat, Pstar) -> PerturbationReport:
    """Evaluate both perturbation bounds for the triple (P, P̂, P*)."""
    P, Phat, Pstar = _as_transition(P), _as_transition(Phat), _as_transition(Pstar)
    if not P.n == Phat.n == Pstar.n:
        raise DimensionMismatch(f"Matrix sizes differ: {P.n}, {Phat.n}, {Pstar.n}")

    pi_star = stationary(Pstar).pi
    defect = reversibility_defect(Pstar, pi_star)
    if defect > REVERSIBILITY_TOL:
        raise NotReversible(f"P* fails detailed balance by {defect:.3e}", {"defect": defect})
    pi = stationary(P).pi
    pi_hat = stationary(Phat).pi

    space = PiNormSpace(pi_star)
    lhs = space.vec_norm(pi - pi_hat)
    numerator = space.vec_norm(pi @ (P.P - Phat.P))

    modulus = second_eigen_modulus(Pstar, pi_star)
    denom = 1.0 - modulus - space.mat_norm(P.P - Phat.P)

    contraction = space.mat_norm(Pstar.P - np.outer(np.ones(Pstar.n), pi_star))
    denom_proof = 1.0 - contraction - space.mat_norm(Phat.P - Pstar.P)

    def bound(d: float) -> float:
        if d <= 0:
            return math.inf
        return numerator / d

    return PerturbationReport(
        lhs=lhs,
        rhs=bound(denom),
        denom=denom,
        applicable=denom > 0,
        numerator=numerator,
        modulus=modulus,
        rhs_proof=bound(denom_proof),
        denom_proof=denom_proof,
        applicable_proof=denom_proof > 0,
    )


@dataclass
class FalsificationSummary:
    """Counts from a randomized perturbation-bound campaign."""

    trials: int = 0
    applicable: int = 0
    violations: int = 0
    applicable_proof: int = 0
    violations_proof: int = 0
    worst_ratio: float = 0.0
    worst_ratio_proof: float = 0.0

    def add(self, report: PerturbationReport):
        self.trials += 1
        if report.applicable:
            self.applicable += 1
            self.violations += int(report.violated)
            if report.rhs > 0:
                self.worst_ratio = max(self.worst_ratio, report.lhs / report.rhs)
        if report.applicable_proof:
            self.applicable_proof += 1
            self.violations_proof += int(report.violated_proof)
            if report.rhs_proof > 0:
                self.worst_ratio_proof = max(self.worst_ratio_proof, report.lhs / report.rhs_proof)

    def to_dict(self) -> Dict[str, Union[int, float]]:
        return {
            "trials": self.trials,
            "applicable": self.applicable,
            "violations": self.violations,
            "worst_ratio": self.worst_ratio,
            "applicable_proof": self.applicable_proof,
            "violations_proof": self.violations_proof,
            "worst_ratio_proof": self.worst_ratio_proof,
        }


def random_perturbation_triple(
    seed,
    n_max: int = 20,
    L_values: Sequence[int] = (5, 10, 20, 50, 100),
    score_range=(0.5, 1.0),
    hat_is_population: bool = False,
):
    """
    One random (P, P̂, P*) instance.

    P* is the population chain of random scores on a random connected graph;
    P and P̂ are built from independent samples with L drawn from `L_values`
    (P̂ = P* when `hat_is_population`). All three share d = 2·d_max.
    Samples whose chain is reducible (an item won or lost every comparison)
    are redrawn.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    p = float(rng.uniform(0.3, 0.9))
    for _ in range(100):
        graph = generate_er_graph(n, p, seed=rng)
        if graph.num_edges and graph.is_connected():
            break
    else:
        raise InvalidArgument(f"Could not draw a connected G({n}, {p:.2f})")
    scores = uniform_scores(n, seed=rng, low=score_range[0], high=score_range[1])
    d = default_d(graph)
    Pstar = build_transition(population_frequencies(graph, scores), d)

    def irreducible_sample():
        for _ in range(100):
            L = int(rng.choice(L_values))
            M = build_transition(sample_comparisons(graph, scores, L, seed=rng), d)
            if M.is_irreducible():
                return M
        raise InvalidArgument(f"Could not draw an irreducible chain on G({n}, {p:.2f})")

    P = irreducible_sample()
    Phat = Pstar if hat_is_population else irreducible_sample()
    return P, Phat, Pstar


def falsify_perturbation(
    trials: int = 1000,
    seed: int = 0,
    n_max: int = 20,
    L_values: Sequence[int] = (5, 10, 20, 50, 100),
    score_range=(0.5, 1.0),
    hat_is_population: bool = False,
    threads: int = 1,
    min_applicable: Optional[int] = None,
    max_trials: Optional[int] = None,
) -> FalsificationSummary:
    """
    Run random triples through check_perturbation and tally violations.

    Without `min_applicable` exactly `trials` triples are drawn. With it,
    triples are drawn in batches of `trials` until `min_applicable` of them
    satisfy the stated-form precondition, or `max_trials` (default
    20 · min_applicable) have been drawn.
    """
    if trials < 1:
        raise InvalidArgument(f"trials must be positive, got {trials}")
    if min_applicable is not None and min_applicable < 1:
        raise InvalidArgument(f"min_applicable must be positive, got {min_applicable}")
    if max_trials is None:
        max_trials = trials if min_applicable is None else 20 * min_applicable
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)

    def one(child):
        triple = random_perturbation_triple(child, n_max, L_values, score_range, hat_is_population)
        return check_perturbation(*triple)

    summary = FalsificationSummary()
    while summary.trials < max_trials:
        seeds = spawn_seeds(root, min(trials, max_trials - summary.trials))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                reports = list(pool.map(one, seeds))
        else:
            reports = [one(child) for child in seeds]
        for report in reports:
            if min_applicable is not None and summary.applicable >= min_applicable:
                break
            summary.add(report)
        if min_applicable is None or summary.applicable >= min_applicable:
            break

    if min_applicable is not None and summary.applicable < min_applicable:
        logger.warning(
            f"Only {summary.applicable} of {summary.trials} triples were applicable "
            f"(wanted {min_applicable})"
        )
    logger.info(
        f"Perturbation falsification: {summary.trials} trials, "
        f"{summary.violations}/{summary.applicable} stated-form violations, "
        f"{summary.violations_proof}/{summary.applicable_proof} derivation-form violations"
    )
    return summary


# ---------------------------------------------------------------------------
# Divergences
# ---------------------------------------------------------------------------


def _check_pq(p: float, q: float):
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument(f"p must lie in [0, 1], got {p}")
    if not 0.0 < q < 1.0:
        raise DegenerateQ(f"q must lie strictly inside (0, 1), got {q}", {"q": q})


def kl_bernoulli(p: float, q: float) -> float:
    """KL(Bern(p) ‖ Bern(q)) with 0·log 0 = 0."""
    _check_pq(p, q)
    return float(rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q))


def chi2_bernoulli(p: float, q: float) -> float:
    """χ²(Bern(p) ‖ Bern(q)) = (p − q)² / (q(1 − q))."""
    _check_pq(p, q)
    return (p - q) ** 2 / (q * (1.0 - q))


def tv_upper_via_pinsker(kl: float) -> float:
    """TV ≤ sqrt(KL / 2)."""
    if kl < 0:
        raise InvalidArgument(f"KL divergence must be nonnegative, got {kl}")
    return math.sqrt(kl / 2.0)


# ---------------------------------------------------------------------------
# Sample-complexity thresholds
# ---------------------------------------------------------------------------


class Regime(str, Enum):
    UPPER_FIXED_KAPPA = "upper_fixed_kappa"
    UPPER_SPECTRAL_KAPPA = "upper_spectral_kappa"
    UPPER_MLE_KAPPA = "upper_mle_kappa"
    LOWER_DK = "lower_dk"
    LOWER_DKSTAR = "lower_dkstar"


@dataclass(frozen=True)
class ThresholdReport:
    """
    Sample sizes are in units of N = n²pL/2 distinct comparisons.

    For upper-bound regimes `satisfied` means the instance meets the
    sufficient condition; for lower-bound regimes it means the instance is
    not inside the region where every method fails.
    """

    which: Regime
    required_samples: float
    available_samples: float
    satisfied: bool
    formula: str
    connectivity_ok: Optional[bool] = None
    sparsity_ok: Optional[bool] = None
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def required_total(self) -> float:
        """The threshold expressed in n²pL."""
        return 2.0 * self.required_samples

    def to_dict(self) -> dict:
        return {
            "which": self.which.value,
            "required_samples": self.required_samples,
            "available_samples": self.available_samples,
            "required_total": self.required_total,
            "satisfied": self.satisfied,
            "formula": self.formula,
            "connectivity_ok": self.connectivity_ok,
            "sparsity_ok": self.sparsity_ok,
            "params": dict(self.params),
        }


def available_samples(n: int, p: float, L: int) -> float:
    return n * n * p * L / 2.0


def _checked_scores(n: int, p: float, L: int, scores) -> ScoreVector:
    scores = scores if isinstance(scores, ScoreVector) else ScoreVector(scores)
    if scores.n != n:
        raise DimensionMismatch(f"Scores have {scores.n} items, expected n={n}", {"n": n, "scores_n": scores.n})
    if not 0 < p <= 1 or L < 1:
        raise InvalidArgument(f"Need 0 < p <= 1 and L >= 1, got p={p}, L={L}")
    return scores


def _check_eps(eps: float):
    if not 0 < eps < 0.5:
        raise BadEps(f"eps must lie in (0, 1/2), got {eps}", {"eps": eps})


def _report(which: Regime, required: float, n: int, p: float, L: int, formula: str, **extra) -> ThresholdReport:
    available = available_samples(n, p, L)
    return ThresholdReport(
        which=which,
        required_samples=required,
        available_samples=available,
        satisfied=available >= required,
        formula=formula,
        **extra,
    )


def lower_bound_dk(n: int, p: float, L: int, scores, K: int, eps: float) -> ThresholdReport:
    """Below n²pL ≤ 2c₂((1 − ε) n log n − 2)/Δ_K², every method fails with probability ≥ ε."""
    _check_eps(eps)
    scores = _checked_scores(n, p, L, scores)
    delta = separation_dk(scores, K)
    c2 = scores.w_min ** 4 / (4.0 * scores.w_max ** 4)
    core = max((1.0 - eps) * n * math.log(n) - 2.0, 0.0)
    total = math.inf if delta == 0 else 2.0 * c2 * core / delta ** 2
    return _report(
        Regime.LOWER_DK,
        total / 2.0,
        n,
        p,
        L,
        "n^2 p L <= 2 c2 ((1-eps) n log n - 2) / Delta_K^2, c2 = w_min^4 / (4 w_max^4)",
        params={"delta_k": delta, "c2": c2, "eps": eps},
    )


def lower_bound_dkstar(n: int, p: float, L: int, scores, K: int, eps: float) -> ThresholdReport:
    """Below n²pL ≤ (ε²/2) n / (Δ*_K)², every method errs with probability ≥ (1 − ε)/2."""
    _check_eps(eps)
    scores = _checked_scores(n, p, L, scores)
    delta_star = generalized_separation(scores, K)
    total = math.inf if delta_star == 0 else (eps ** 2 / 2.0) * n / delta_star ** 2
    return _report(
        Regime.LOWER_DKSTAR,
        total / 2.0,
        n,
        p,
        L,
        "n^2 p L <= (eps^2 / 2) n / Delta*_K^2",
        params={"delta_k_star": delta_star, "eps": eps},
    )


def upper_bound_requirements(
    n: int,
    p: float,
    L: int,
    scores,
    K: int,
    regime: Union[Regime, str],
    c0: float = 1.0,
    c1: float = 1.0,
) -> ThresholdReport:
    """
    Sufficient sample size for exact top-K recovery.

    upper_fixed_kappa:    n²pL/2 ≥ c₁ n log n / Δ_K²,      p > c₀ log n / n
    upper_spectral_kappa: n²pL/2 ≥ c₁ κ² n log n / Δ_K²,   p > c₀ κ⁵ log n / n
    upper_mle_kappa:      n²pL/2 ≥ c₁ κ⁴ n log n / Δ_K²,   p ≥ c₀ κ⁴ log n / n
    """
    try:
        regime = Regime(regime)
    except ValueError:
        raise BadRegime(f"Unknown regime {regime!r}", {"regime": str(regime)})
    if regime not in (Regime.UPPER_FIXED_KAPPA, Regime.UPPER_SPECTRAL_KAPPA, Regime.UPPER_MLE_KAPPA):
        raise BadRegime(f"{regime.value} is not an upper-bound regime", {"regime": regime.value})
    scores = _checked_scores(n, p, L, scores)
    delta = separation_dk(scores, K)
    kappa = scores.kappa
    base = c1 * n * math.log(n)
    log_ratio = math.log(n) / n
    connectivity_ok = p > c0 * log_ratio

    if regime is Regime.UPPER_FIXED_KAPPA:
        factor, sparsity_ok = 1.0, connectivity_ok
        formula = "n^2 p L / 2 >= c1 n log n / Delta_K^2; p > c0 log n / n"
    elif regime is Regime.UPPER_SPECTRAL_KAPPA:
        factor, sparsity_ok = kappa ** 2, p > c0 * kappa ** 5 * log_ratio
        formula = "n^2 p L / 2 >= c1 kappa^2 n log n / Delta_K^2; p > c0 kappa^5 log n / n"
    else:
        factor, sparsity_ok = kappa ** 4, p >= c0 * kappa ** 4 * log_ratio
        formula = "n^2 p L / 2 >= c1 kappa^4 n log n / Delta_K^2; p >= c0 kappa^4 log n / n"

    required = math.inf if delta == 0 else factor * base / delta ** 2
    return _report(
        regime,
        required,
        n,
        p,
        L,
        formula,
        connectivity_ok=connectivity_ok,
        sparsity_ok=sparsity_ok,
        params={"delta_k": delta, "kappa": kappa, "c0": c0, "c1": c1},
    )


def all_threshold_reports(n: int, p: float, L: int, scores, K: int, eps: float = 0.25) -> List[ThresholdReport]:
    """Every threshold for one instance, in Regime order."""
    return [
        upper_bound_requirements(n, p, L, scores, K, Regime.UPPER_FIXED_KAPPA),
        upper_bound_requirements(n, p, L, scores, K, Regime.UPPER_SPECTRAL_KAPPA),
        upper_bound_requirements(n, p, L, scores, K, Regime.UPPER_MLE_KAPPA),
        lower_bound_dk(n, p, L, scores, K, eps),
        lower_bound_dkstar(n, p, L, scores, K, eps),
    ]
