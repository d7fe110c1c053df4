#!/usr/bin/env python3
"""
Command-line interface for topk-ranking.

Usage:
  topk-ranking simulate --n 200 --p 0.25 --L 20 --seed 1 --out data.txt
  topk-ranking simulate --n 200 --scores two_level --K 10 --delta 0.4 --truth truth.json
  topk-ranking rank data.txt --method spectral --K 10        # JSON lines
  topk-ranking rank data.txt --method mle --lambda 0.5
  topk-ranking experiment --preset fig1a --out fig1a.csv --summary fig1a.md
  topk-ranking experiment --config sweep.yaml --threads 8 --seed 7
  topk-ranking check-theory --trials 1000 --threads 4
  topk-ranking check-theory --n 200 --p 0.25 --L 20 --K 10 --delta 0.4 --format text

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure,
130 interrupted.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO

import sentry_sdk

from topk_ranking import __version__
from topk_ranking.env_config import get_env
from topk_ranking.errors import ConfigError, DataFormatError, RankingError
from topk_ranking.response import ErrorCodes, ResponseEnvelope

logger = logging.getLogger("topk-ranking-cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INTERRUPTED = 130


def init_sentry() -> bool:
    """Enable Sentry error reporting when SENTRY_DSN is configured."""
    dsn = get_env("SENTRY_DSN")
    if not dsn:
        return False
    sentry_sdk.init(
        dsn=dsn,
        traces_sample_rate=0.0,
        environment=get_env("SENTRY_ENVIRONMENT", "development"),
        release=get_env("SENTRY_RELEASE", f"topk-ranking@{__version__}"),
    )
    logger.info("Sentry monitoring enabled")
    return True


class RankingCLI:
    """Dispatches parsed arguments to the library and formats the output."""

    def __init__(self, args, stdout: TextIO = None):
        self.args = args
        self.stdout = stdout or sys.stdout

    def run(self) -> int:
        handler = getattr(self, f"cmd_{self.args.command.replace('-', '_')}")
        return handler()

    def emit(self, text: str = ""):
        print(text, file=self.stdout)

    # ------------------------------------------------------------------
    # simulate
    # ------------------------------------------------------------------

    def cmd_simulate(self) -> int:
        from topk_ranking.model import (
            dumps_comparisons,
            generate_er_graph,
            sample_comparisons,
            save_comparisons,
            spawn_seeds,
            two_level_scores,
            uniform_scores,
        )

        args = self.args
        graph_seed, score_seed, data_seed = spawn_seeds(args.seed, 3)
        if args.scores == "two_level":
            scores = two_level_scores(args.n, args.K, args.delta)
        else:
            scores = uniform_scores(args.n, seed=score_seed)
        graph = generate_er_graph(args.n, args.p, seed=graph_seed)
        if not graph.is_connected():
            logger.warning(f"Generated graph has {graph.num_components()} components; rankers will reject it")
        data = sample_comparisons(graph, scores, args.L, seed=data_seed)

        if args.truth:
            truth = {"w": scores.w.tolist(), "kappa": scores.kappa, "seed": args.seed}
            Path(args.truth).write_text(json.dumps(truth, indent=2))
        if args.out:
            save_comparisons(data, args.out)
        else:
            self.stdout.write(dumps_comparisons(data))
        return EXIT_OK

    # ------------------------------------------------------------------
    # rank
    # ------------------------------------------------------------------

    def cmd_rank(self) -> int:
        from topk_ranking.mle import MleConfig, mle_rank
        from topk_ranking.model import load_comparisons, loads_comparisons
        from topk_ranking.spectral import spectral_rank

        args = self.args
        if args.data == "-":
            data = loads_comparisons(sys.stdin.read())
        else:
            data = load_comparisons(args.data)

        K = args.K if args.K is not None else 1
        if args.method == "spectral":
            result = spectral_rank(data, K, d=args.d)
        else:
            lam = 0.0 if args.method == "mle_unregularized" else args.lambda_
            result = mle_rank(data, K, MleConfig(lambda_=lam))

        limit = args.K if args.K is not None else result.n
        lines = [
            json.dumps({"rank": rank, "item": item, "score": score})
            for rank, item, score in result.ranked_items()
        ][:limit]
        output = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(output)
        else:
            self.stdout.write(output)
        logger.info(f"{args.method}: top-{K} = {sorted(result.topk)} after {result.iterations} iterations")
        return EXIT_OK

    # ------------------------------------------------------------------
    # experiment
    # ------------------------------------------------------------------

    def cmd_experiment(self) -> int:
        from topk_ranking.experiment import load_config, run_experiment, write_csv
        from topk_ranking.export import build_summary_export, gnuplot_script, save_export
        from topk_ranking.errors import InsufficientData
        from topk_ranking.trends import error_slopes, summarize

        args = self.args
        if args.config is None and args.preset is None:
            raise ConfigError("experiment needs --config or --preset")
        overrides = {"seed": args.seed, "threads": args.threads, "trials": args.trials}
        if args.timings:
            overrides["timings"] = True
        config = load_config(args.config, preset=args.preset, overrides=overrides)
        logger.info(f"Running experiment {config.name}: {config.trials} trials per point")

        if args.out:
            records = run_experiment(config, out=args.out)
        else:
            records = run_experiment(config)
            write_csv(records, self.stdout, config)

        summaries = summarize(records)
        slopes = {}
        for axis in ("L", "p", "samples"):
            try:
                slopes[axis] = error_slopes(summaries, against=axis)
            except InsufficientData:
                continue

        if args.summary:
            export_data = build_summary_export(config, summaries, slopes)
            save_export(export_data, args.summary, format=_format_for(args.summary, args.summary_format))
        if args.gnuplot:
            x_column = "delta" if config.score_mode == "two_level" else ("p" if len(config.p) > 1 else "L")
            y_column = "topk_exact" if config.score_mode == "two_level" else "rel_linf"
            script = gnuplot_script(args.out or "results.csv", x_column, y_column, config.methods,
                                    logscale=config.score_mode != "two_level")
            Path(args.gnuplot).write_text(script)

        if not args.quiet and args.out:
            self.print_summary(summaries, slopes)
        return EXIT_OK

    def print_summary(self, summaries, slopes: Dict[str, Any]):
        self.emit(f"{'method':<18} {'p':>6} {'L':>5} {'delta':>6} {'trials':>6} {'rel_linf':>10} {'rel_l2':>10} {'acc':>6}")
        for s in summaries:
            delta = "-" if s.delta is None else f"{s.delta:.3g}"
            self.emit(
                f"{s.method:<18} {s.p:>6.3g} {s.L:>5} {delta:>6} {s.trials:>6} "
                f"{s.mean_rel_linf:>10.4g} {s.mean_rel_l2:>10.4g} {s.accuracy:>6.3f}"
            )
        for axis, fits in slopes.items():
            for method, fit in fits.items():
                self.emit(f"slope vs log {axis} ({method}): {fit.slope:.3f} ± {fit.stderr:.3f}")

    # ------------------------------------------------------------------
    # check-theory
    # ------------------------------------------------------------------

    def cmd_check_theory(self) -> int:
        from topk_ranking.metrics import generalized_separation, separation_dk
        from topk_ranking.model import two_level_scores, uniform_scores
        from topk_ranking.export import sanitize
        from topk_ranking.theory import all_threshold_reports, falsify_perturbation

        args = self.args
        falsification = falsify_perturbation(
            trials=args.trials, seed=args.seed, n_max=args.n_max, threads=args.threads or 1,
            min_applicable=args.applicable,
        )

        if args.delta is not None:
            scores = two_level_scores(args.n, args.K, args.delta)
        else:
            scores = uniform_scores(args.n, seed=args.seed)
        reports = all_threshold_reports(args.n, args.p, args.L, scores, args.K, args.eps)

        data = {
            "perturbation": falsification.to_dict(),
            "instance": {
                "n": args.n, "p": args.p, "L": args.L, "K": args.K, "eps": args.eps,
                "delta_k": separation_dk(scores, args.K),
                "delta_k_star": generalized_separation(scores, args.K),
                "kappa": scores.kappa,
            },
            "thresholds": [r.to_dict() for r in reports],
        }
        violations = falsification.violations_proof
        envelope = ResponseEnvelope.success(
            f"{falsification.trials} perturbation trials, {violations} violations of the derived bound",
            data,
        )

        if args.format == "json":
            self.emit(json.dumps(sanitize(envelope), indent=2))
        else:
            self.print_theory(data)
        return EXIT_OK if violations == 0 else EXIT_RUNTIME

    def print_theory(self, data: Dict[str, Any]):
        p = data["perturbation"]
        self.emit("=" * 72)
        self.emit("Perturbation bound falsification")
        self.emit("=" * 72)
        self.emit(f"Trials: {p['trials']}")
        self.emit(f"Stated form:     {p['violations']} violations / {p['applicable']} applicable "
                  f"(worst lhs/rhs {p['worst_ratio']:.3f})")
        self.emit(f"Derivation form: {p['violations_proof']} violations / {p['applicable_proof']} applicable "
                  f"(worst lhs/rhs {p['worst_ratio_proof']:.3f})")
        self.emit()
        inst = data["instance"]
        self.emit("=" * 72)
        self.emit(f"Thresholds for n={inst['n']} p={inst['p']} L={inst['L']} K={inst['K']} "
                  f"(Delta_K={inst['delta_k']:.4g}, Delta*_K={inst['delta_k_star']:.4g}, kappa={inst['kappa']:.4g})")
        self.emit("=" * 72)
        for report in data["thresholds"]:
            status = "✓" if report["satisfied"] else "✗"
            self.emit(f"{status} {report['which']:<22} required {report['required_samples']:.4g} "
                      f"available {report['available_samples']:.4g}")
            self.emit(f"    {report['formula']}")


def _format_for(path: str, explicit: Optional[str]) -> str:
    if explicit:
        return explicit
    suffix = Path(path).suffix.lower()
    return {".md": "markdown", ".yaml": "yaml", ".yml": "yaml"}.get(suffix, "json")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", "-q", action="store_true", help="Only show errors")
    common.add_argument("--verbose", "-v", action="store_true", help="Show progress logs")
    # subcommand copies must not reset a flag given before the subcommand
    sub_common = argparse.ArgumentParser(add_help=False)
    sub_common.add_argument("--quiet", "-q", action="store_true", default=argparse.SUPPRESS,
                            help="Only show errors")
    sub_common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS,
                            help="Show progress logs")

    parser = argparse.ArgumentParser(
        prog="topk-ranking",
        description="Top-K ranking from pairwise comparisons: spectral method and regularized MLE",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[sub_common], help="Sample comparison data under the BTL model")
    simulate.add_argument("--n", type=int, default=200, help="Number of items (default: 200)")
    simulate.add_argument("--p", type=float, default=0.25, help="Edge probability (default: 0.25)")
    simulate.add_argument("--L", type=int, default=20, help="Comparisons per edge (default: 20)")
    simulate.add_argument("--scores", choices=["uniform", "two_level"], default="uniform",
                          help="uniform on [0.5, 1] or two-level 1 / 1-delta (default: uniform)")
    simulate.add_argument("--K", type=int, default=10, help="Top-set size for two-level scores")
    simulate.add_argument("--delta", type=float, default=0.4, help="Gap for two-level scores")
    simulate.add_argument("--seed", type=int, default=0, help="Root seed")
    simulate.add_argument("--out", help="Comparison file (default: stdout)")
    simulate.add_argument("--truth", help="Write the true scores as JSON to this path")

    rank = sub.add_parser("rank", parents=[sub_common], help="Rank items from a comparison file")
    rank.add_argument("data", help="Comparison file, or - for stdin")
    rank.add_argument("--method", choices=["spectral", "mle", "mle_unregularized"], default="spectral")
    rank.add_argument("--K", type=int, help="Only print the top K items")
    rank.add_argument("--d", type=float, help="Spectral normalization (default: 2 * d_max)")
    rank.add_argument("--lambda", dest="lambda_", type=float,
                      help="MLE ridge weight (default: 2 sqrt(n p log n / L))")
    rank.add_argument("--out", help="Output file (default: stdout)")

    experiment = sub.add_parser("experiment", parents=[sub_common], help="Run a Monte-Carlo experiment")
    experiment.add_argument("--config", help="YAML or key = value experiment file")
    experiment.add_argument("--preset", choices=["fig1a", "fig1b", "fig1c", "fig2", "fig3"],
                            help="Named experiment preset")
    experiment.add_argument("--out", help="CSV output path (default: stdout)")
    experiment.add_argument("--threads", type=int, help="Worker threads (default: $TOPK_RANKING_THREADS or 1)")
    experiment.add_argument("--seed", type=int, help="Root seed (overrides the config)")
    experiment.add_argument("--trials", type=int, help="Trials per sweep point (overrides the config)")
    experiment.add_argument("--timings", action="store_true", help="Record wall-clock seconds per run")
    experiment.add_argument("--summary", help="Write aggregates and slope fits to this path")
    experiment.add_argument("--summary-format", choices=["json", "yaml", "markdown"],
                            help="Summary format (default: from the file suffix)")
    experiment.add_argument("--gnuplot", help="Write a gnuplot script for the CSV to this path")

    theory = sub.add_parser("check-theory", parents=[sub_common],
                            help="Perturbation-bound falsification and sample-complexity thresholds")
    theory.add_argument("--trials", type=int, default=1000, help="Random perturbation triples (default: 1000)")
    theory.add_argument("--applicable", type=int,
                        help="Keep drawing batches of --trials until this many triples are applicable")
    theory.add_argument("--n-max", type=int, default=20, help="Largest instance size (default: 20)")
    theory.add_argument("--threads", type=int, help="Worker threads")
    theory.add_argument("--seed", type=int, default=0, help="Root seed")
    theory.add_argument("--n", type=int, default=200)
    theory.add_argument("--p", type=float, default=0.25)
    theory.add_argument("--L", type=int, default=20)
    theory.add_argument("--K", type=int, default=10)
    theory.add_argument("--delta", type=float, help="Use two-level scores with this gap (default: uniform scores)")
    theory.add_argument("--eps", type=float, default=0.25, help="Lower-bound failure probability (default: 0.25)")
    theory.add_argument("--format", choices=["json", "text"], default="json")

    return parser


def configure_logging(args):
    level = logging.WARNING
    if getattr(args, "verbose", False):
        level = logging.INFO
    if getattr(args, "quiet", False):
        level = logging.ERROR
    logging.basicConfig(level=level, format='%(levelname)s: %(message)s')
    logging.getLogger().setLevel(level)


def _report_error(error: RankingError):
    print(json.dumps(error.to_response(), default=str), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args)
    init_sentry()

    try:
        return RankingCLI(args).run()
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        return EXIT_INTERRUPTED
    except (ConfigError, DataFormatError) as e:
        logger.error(e.message)
        _report_error(e)
        return EXIT_CONFIG
    except RankingError as e:
        logger.error(e.message)
        _report_error(e)
        return EXIT_RUNTIME
    except OSError as e:
        logger.error(f"I/O error: {e}")
        print(json.dumps(ResponseEnvelope.error(ErrorCodes.IO_ERROR, str(e))), file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        sentry_sdk.capture_exception(e)
        print(json.dumps(ResponseEnvelope.error(ErrorCodes.UNEXPECTED_EXCEPTION, str(e))), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
