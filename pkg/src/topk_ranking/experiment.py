"""
Experiment Harness Module

Monte-Carlo runner for the spectral method and the (regularized) MLE on
Erdős–Rényi comparison graphs, with named presets for the standard
experiments and a long-format CSV writer.

Usage:
    from topk_ranking.experiment import load_config, run_experiment, write_csv

    config = load_config(preset="fig1a", overrides={"trials": 10})
    records = run_experiment(config)
    write_csv(records, "fig1a.csv", config)
"""

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import yaml

from topk_ranking.env_config import get_int_env
from topk_ranking.errors import ConfigError, Disconnected, NoConvergence, RankingError
from topk_ranking.metrics import RankingResult, rel_l2_error, rel_linf_error, topk_accuracy
from topk_ranking.mle import MleConfig, fit_mle, kappa_scaled_lambda
from topk_ranking.model import (
    ScoreVector,
    generate_er_graph,
    make_scores,
    sample_comparisons,
    two_level_scores,
    uniform_scores,
)
from topk_ranking.spectral import build_transition, cd_np_d, default_d, stationary

logger = logging.getLogger(__name__)

METHODS = ("spectral", "mle", "mle_unregularized")
SCORE_MODES = ("uniform_half_one", "two_level", "explicit")
D_RULES = ("two_dmax", "cd_np")
LAMBDA_RULES = ("auto", "kappa", "fixed", "zero")

CSV_COLUMNS = [
    "n", "p", "L", "K", "delta", "method", "trial",
    "rel_linf", "rel_l2", "topk_exact", "iters", "seconds", "seed", "status",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One Monte-Carlo experiment.

    The sweep is the product p × L (or the explicit `pairs` list when given),
    crossed with `delta` for two-level scores.
    """

    name: str = "custom"
    n: int = 200
    p: Tuple[float, ...] = (0.25,)
    L: Tuple[int, ...] = (20,)
    pairs: Optional[Tuple[Tuple[float, int], ...]] = None
    K: int = 10
    trials: int = 100
    seed: int = 0
    score_mode: str = "uniform_half_one"
    delta: Tuple[float, ...] = (0.4,)
    scores: Optional[Tuple[float, ...]] = None
    methods: Tuple[str, ...] = METHODS
    d_rule: str = "two_dmax"
    c_d: float = 2.0
    lambda_rule: str = "auto"
    c_lambda: float = 2.0
    lambda_value: Optional[float] = None
    max_iters: int = 10**6
    threads: Optional[int] = None
    timings: bool = False

    def __post_init__(self):
        for name in ("p", "L", "delta", "methods", "scores"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value) if isinstance(value, (list, tuple)) else (value,))
        if self.pairs is not None:
            object.__setattr__(self, "pairs", tuple((float(p), int(L)) for p, L in self.pairs))
        self.validate()

    def validate(self):
        """Raise ConfigError on any inconsistent setting."""
        problems = []
        if not isinstance(self.n, int) or self.n < 2:
            problems.append(f"n must be an integer >= 2, got {self.n!r}")
        if self.pairs is not None:
            if not self.pairs:
                problems.append("pairs must be nonempty when given")
            sweep_p = [p for p, _ in self.pairs]
            sweep_L = [L for _, L in self.pairs]
        else:
            if not self.p or not self.L:
                problems.append("p and L sweep lists must be nonempty")
            sweep_p, sweep_L = list(self.p), list(self.L)
        if any(not 0 < p <= 1 for p in sweep_p):
            problems.append(f"every p must lie in (0, 1], got {sweep_p}")
        if any(int(L) != L or L < 1 for L in sweep_L):
            problems.append(f"every L must be a positive integer, got {sweep_L}")
        if not isinstance(self.K, int) or not 1 <= self.K < self.n:
            problems.append(f"K must satisfy 1 <= K < n, got {self.K!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            problems.append(f"trials must be a positive integer, got {self.trials!r}")
        if self.score_mode not in SCORE_MODES:
            problems.append(f"score_mode must be one of {SCORE_MODES}, got {self.score_mode!r}")
        if self.score_mode == "two_level":
            if not self.delta or any(not 0 <= d < 1 for d in self.delta):
                problems.append(f"two_level scores need delta values in [0, 1), got {self.delta}")
        if self.score_mode == "explicit":
            if self.scores is None or len(self.scores) != self.n:
                problems.append(f"explicit scores need exactly n={self.n} values")
            elif any(w <= 0 for w in self.scores):
                problems.append("explicit scores must be positive")
        if not self.methods or any(m not in METHODS for m in self.methods):
            problems.append(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        if self.d_rule not in D_RULES:
            problems.append(f"d_rule must be one of {D_RULES}, got {self.d_rule!r}")
        if self.c_d <= 0:
            problems.append(f"c_d must be positive, got {self.c_d}")
        if self.lambda_rule not in LAMBDA_RULES:
            problems.append(f"lambda_rule must be one of {LAMBDA_RULES}, got {self.lambda_rule!r}")
        if self.lambda_rule == "fixed" and (self.lambda_value is None or self.lambda_value < 0):
            problems.append("lambda_rule 'fixed' needs a nonnegative lambda_value")
        if self.c_lambda <= 0:
            problems.append(f"c_lambda must be positive, got {self.c_lambda}")
        if self.threads is not None and self.threads < 1:
            problems.append(f"threads must be positive, got {self.threads}")
        if problems:
            raise ConfigError("; ".join(problems), {"problems": problems})

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}", {"unknown": unknown})
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"Bad config value: {e}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = [list(v) if isinstance(v, tuple) else v for v in value]
        return data

    @property
    def worker_count(self) -> int:
        if self.threads is not None:
            return self.threads
        return max(1, get_int_env("TOPK_RANKING_THREADS", 1))


@dataclass(frozen=True)
class SweepPoint:
    index: int
    p: float
    L: int
    delta: Optional[float] = None


def sweep_points(config: ExperimentConfig) -> List[SweepPoint]:
    if config.pairs is not None:
        grid = list(config.pairs)
    else:
        grid = [(p, L) for p in config.p for L in config.L]
    deltas: Sequence[Optional[float]] = config.delta if config.score_mode == "two_level" else (None,)
    points = []
    for p, L in grid:
        for delta in deltas:
            points.append(SweepPoint(len(points), float(p), int(L), delta))
    return points


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

# The p and L grids behind the published plots are not stated; these span
# the plotted ranges.
PRESETS: Dict[str, Dict[str, Any]] = {
    "fig1a": {"p": [0.25], "L": [5, 10, 20, 40, 80]},
    "fig1b": {"p": [0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5], "L": [20]},
    "fig1c": {"pairs": [[0.1, 50], [0.125, 40], [0.2, 25], [0.25, 20], [0.5, 10]]},
    "fig2": {"p": [0.25], "L": [5, 10, 20, 40, 80]},
    "fig3": {
        "p": [0.25],
        "L": [20],
        "K": 10,
        "score_mode": "two_level",
        "delta": [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
    },
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    values = {"name": name, **PRESETS[name], **overrides}
    return ExperimentConfig.from_dict(values)


def _parse_key_value(text: str) -> Dict[str, Any]:
    """Fallback for `key = value` lines; values are parsed as YAML scalars/lists."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno}: expected `key = value`, got {line!r}")
        key, raw = line.split("=", 1)
        try:
            values[key.strip()] = yaml.safe_load(raw.strip())
        except yaml.YAMLError as e:
            raise ConfigError(f"Line {lineno}: cannot parse value {raw.strip()!r}: {e}")
    return values


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse a YAML mapping, or `key = value` lines when the text is not a YAML mapping."""
    try:
        loaded = yaml.safe_load(text)
    except yaml.YAMLError:
        loaded = None
    if loaded is None and not text.strip():
        return {}
    if isinstance(loaded, dict):
        return loaded
    return _parse_key_value(text)


def load_config(
    path: Optional[Union[str, Path]] = None,
    preset: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a preset, a config file and explicit overrides.

    Args:
        path: YAML (or `key = value`) config file; may name a `preset:` itself
        preset: Preset name used when the file does not name one
        overrides: Values applied last (e.g. from CLI flags); None values are ignored

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: unreadable file, unknown keys or invalid values
    """
    values: Dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}", {"path": str(path)})
        values = parse_config_text(text)
        logger.info(f"Loaded experiment config from {path}")

    preset_name = values.pop("preset", None) or preset
    base: Dict[str, Any] = {}
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(f"Unknown preset {preset_name!r}; choose from {', '.join(sorted(PRESETS))}")
        base = {"name": preset_name, **PRESETS[preset_name]}

    merged = {**base, **values, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    return ExperimentConfig.from_dict(merged)


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    n: int
    p: float
    L: int
    K: int
    delta: Optional[float]
    method: str
    trial: int
    rel_linf: Optional[float]
    rel_l2: Optional[float]
    topk_exact: Optional[int]
    iterations: int
    seconds: Optional[float]
    seed: int
    status: str = "ok"
    point: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def csv_row(self) -> List[str]:
        return [
            str(self.n),
            _fmt(self.p),
            str(self.L),
            str(self.K),
            _fmt(self.delta),
            self.method,
            str(self.trial),
            _fmt(self.rel_linf),
            _fmt(self.rel_l2),
            "" if self.topk_exact is None else str(self.topk_exact),
            str(self.iterations),
            _fmt(self.seconds),
            str(self.seed),
            self.status,
        ]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def trial_seed(child: np.random.SeedSequence) -> int:
    """Collapse a spawned seed into one integer that replays the trial."""
    return int(child.generate_state(1, dtype=np.uint64)[0])


def _scores_for(config: ExperimentConfig, point: SweepPoint, seed) -> ScoreVector:
    if config.score_mode == "two_level":
        return two_level_scores(config.n, config.K, point.delta)
    if config.score_mode == "explicit":
        return make_scores(config.scores)
    return uniform_scores(config.n, seed=seed)


def _mle_config(config: ExperimentConfig, method: str, point: SweepPoint, scores: ScoreVector) -> MleConfig:
    if method == "mle_unregularized" or config.lambda_rule == "zero":
        return MleConfig(lambda_=0.0, max_iters=config.max_iters)
    if config.lambda_rule == "fixed":
        return MleConfig(lambda_=config.lambda_value, max_iters=config.max_iters)
    if config.lambda_rule == "kappa" and scores.kappa > 1:
        lam = kappa_scaled_lambda(config.n, point.p, point.L, scores.kappa, config.c_lambda)
        return MleConfig(lambda_=lam, max_iters=config.max_iters)
    return MleConfig(c_lambda=config.c_lambda, max_iters=config.max_iters)


def run_trial(config: ExperimentConfig, point: SweepPoint, trial: int, seed: int) -> List[TrialRecord]:
    """
    Run every configured method on one shared draw of scores, graph and comparisons.

    Disconnected graphs and solver failures become records with a non-ok
    status instead of exceptions.
    """
    graph_seed, score_seed, data_seed = np.random.SeedSequence(seed).spawn(3)
    scores = _scores_for(config, point, score_seed)
    graph = generate_er_graph(config.n, point.p, seed=graph_seed)
    common = dict(
        n=config.n, p=point.p, L=point.L, K=config.K, delta=point.delta,
        trial=trial, seed=seed, point=point.index,
    )

    if graph.num_edges == 0 or not graph.is_connected():
        return [
            TrialRecord(method=m, rel_linf=None, rel_l2=None, topk_exact=None,
                        iterations=0, seconds=None, status="disconnected", **common)
            for m in config.methods
        ]

    data = sample_comparisons(graph, scores, point.L, seed=data_seed)
    truth_topk = scores.true_topk(config.K)
    records = []
    for method in config.methods:
        started = time.perf_counter()
        try:
            if method == "spectral":
                if config.d_rule == "cd_np":
                    d = cd_np_d(graph, config.c_d, point.p)
                else:
                    d = default_d(graph)
                solution = stationary(build_transition(data, d))
                estimate, iterations = solution.pi, solution.iterations
                errors_against, ranked = scores.pi_star, solution.pi
            else:
                fit = fit_mle(data, _mle_config(config, method, point, scores))
                estimate, iterations = fit.exp_theta, fit.iterations
                errors_against, ranked = scores.centered_exp_theta, fit.theta
        except NoConvergence as e:
            records.append(TrialRecord(
                method=method, rel_linf=None, rel_l2=None, topk_exact=None,
                iterations=e.iterations, seconds=None, status="no_convergence", **common,
            ))
            continue
        except Disconnected as e:
            status = "reducible" if "strong_components" in e.data else "disconnected"
            records.append(TrialRecord(
                method=method, rel_linf=None, rel_l2=None, topk_exact=None,
                iterations=0, seconds=None, status=status, **common,
            ))
            continue
        elapsed = time.perf_counter() - started

        result = RankingResult.from_estimate(ranked, config.K, scale="pi" if method == "spectral" else "theta")
        records.append(TrialRecord(
            method=method,
            rel_linf=rel_linf_error(estimate, errors_against),
            rel_l2=rel_l2_error(estimate, errors_against),
            topk_exact=int(topk_accuracy(result, truth_topk)),
            iterations=iterations,
            seconds=elapsed if config.timings else None,
            **common,
        ))
    return records


def iter_experiment(config: ExperimentConfig) -> Iterator[List[TrialRecord]]:
    """
    Yield the records of each sweep point in order.

    Every (point, trial) pair gets its own child of the root seed, so results
    do not depend on the worker count or scheduling.
    """
    points = sweep_points(config)
    point_seeds = np.random.SeedSequence(config.seed).spawn(len(points))
    workers = config.worker_count

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for point, point_seed in zip(points, point_seeds):
            seeds = [trial_seed(child) for child in point_seed.spawn(config.trials)]
            jobs = [pool.submit(run_trial, config, point, t, s) for t, s in enumerate(seeds)]
            records = [record for job in jobs for record in job.result()]
            excluded = sum(1 for r in records if not r.ok)
            logger.info(
                f"Sweep point {point.index + 1}/{len(points)} (p={point.p}, L={point.L}, "
                f"delta={point.delta}): {config.trials} trials"
            )
            if excluded:
                logger.warning(f"Sweep point {point.index + 1}: {excluded} method runs excluded (disconnected or not converged)")
            yield records


def run_experiment(config: ExperimentConfig, out: Optional[Union[str, Path]] = None) -> List[TrialRecord]:
    """
    Run the full sweep; when `out` is given the CSV is written point by point.

    Returns:
        All TrialRecords ordered by (sweep point, trial, method)
    """
    records: List[TrialRecord] = []
    if out is None:
        for chunk in iter_experiment(config):
            records.extend(chunk)
        return records

    path = Path(out)
    try:
        with open(path, "w", newline="") as handle:
            writer = _start_csv(handle, config)
            for chunk in iter_experiment(config):
                writer.writerows(r.csv_row() for r in chunk)
                handle.flush()
                records.extend(chunk)
    except OSError as e:
        raise RankingError(f"Cannot write results to {path}: {e}", {"path": str(path)})
    logger.info(f"Wrote {len(records)} records to {path}")
    return records


def _start_csv(handle: TextIO, config: ExperimentConfig):
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    handle.write(f"# topk-ranking experiment {config.name} seed={config.seed} generated {stamp}\n")
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    return writer


def write_csv(records: Sequence[TrialRecord], out: Union[str, Path, TextIO], config: ExperimentConfig):
    """Write records as CSV; the first line is a `#` comment with a timestamp."""
    if isinstance(out, (str, Path)):
        try:
            with open(out, "w", newline="") as handle:
                write_csv(records, handle, config)
        except OSError as e:
            raise RankingError(f"Cannot write results to {out}: {e}", {"path": str(out)})
        return
    writer = _start_csv(out, config)
    writer.writerows(r.csv_row() for r in records)


def csv_text(records: Sequence[TrialRecord], config: ExperimentConfig) -> str:
    buffer = io.StringIO()
    write_csv(records, buffer, config)
    return buffer.getvalue()


def csv_body(text: str) -> str:
    """Strip the timestamp comment line."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def read_csv(path: Union[str, Path]) -> List[TrialRecord]:
    """Load records written by write_csv / run_experiment."""
    def num(value: str, cast=float):
        return None if value == "" else cast(value)

    with open(path, newline="") as handle:
        rows = csv.DictReader(line for line in handle if not line.startswith("#"))
        records = []
        for row in rows:
            records.append(TrialRecord(
                n=int(row["n"]), p=float(row["p"]), L=int(row["L"]), K=int(row["K"]),
                delta=num(row["delta"]), method=row["method"], trial=int(row["trial"]),
                rel_linf=num(row["rel_linf"]), rel_l2=num(row["rel_l2"]),
                topk_exact=num(row["topk_exact"], int), iterations=int(row["iters"]),
                seconds=num(row["seconds"]), seed=int(row["seed"]), status=row["status"],
            ))
    return records
