"""
Summary Export Module

Exports experiment summaries for archiving and plotting. Supports JSON,
YAML and Markdown, plus a gnuplot script that plots the long-format CSV.

Usage:
    from topk_ranking.export import build_summary_export, save_export

    export_data = build_summary_export(config, summaries, slopes)
    save_export(export_data, "fig1a.md", format="markdown")
"""

import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import yaml

from topk_ranking import __version__
from topk_ranking.errors import InvalidArgument, RankingError
from topk_ranking.experiment import CSV_COLUMNS
from topk_ranking.trends import PointSummary, SlopeFit

logger = logging.getLogger(__name__)

FORMATS = ("json", "yaml", "markdown")


def sanitize(value: Any) -> Any:
    """Replace NaN / inf with None so every format round-trips."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    return value


def build_summary_export(
    config: Any,
    summaries: Sequence[PointSummary],
    slopes: Optional[Dict[str, Dict[str, SlopeFit]]] = None,
) -> Dict[str, Any]:
    """
    Collect config, per-point summaries and slope fits into one document.

    Args:
        config: ExperimentConfig that produced the records
        summaries: Output of trends.summarize
        slopes: Optional {axis: {method: SlopeFit}} from trends.error_slopes

    Returns:
        Plain dictionary ready for export_to_json / yaml / markdown
    """
    return sanitize({
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "source": "topk-ranking",
        "version": __version__,
        "experiment": config.name,
        "config": config.to_dict(),
        "points": [s.to_dict() for s in summaries],
        "slopes": {
            axis: {method: fit.to_dict() for method, fit in fits.items()}
            for axis, fits in (slopes or {}).items()
        },
    })


def export_to_json(export_data: Dict[str, Any], indent: int = 2) -> str:
    return json.dumps(export_data, indent=indent, ensure_ascii=False)


def export_to_yaml(export_data: Dict[str, Any]) -> str:
    return yaml.safe_dump(export_data, default_flow_style=False, sort_keys=False, allow_unicode=True)


def _cell(value: Any, digits: int = 4) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


def export_to_markdown(export_data: Dict[str, Any]) -> str:
    """Render the export as a Markdown report with one results table."""
    md_lines = []

    md_lines.append(f"# Experiment `{export_data.get('experiment', 'unknown')}`")
    md_lines.append(f"\n**Generated**: {export_data.get('timestamp', 'unknown')}")
    md_lines.append(f"**Source**: {export_data.get('source', 'unknown')} {export_data.get('version', '')}")
    md_lines.append("")

    config = export_data.get("config", {})
    if config:
        md_lines.append("## Configuration")
        md_lines.append("")
        md_lines.append("| Key | Value |")
        md_lines.append("|-----|-------|")
        for key, value in config.items():
            if value is None:
                continue
            md_lines.append(f"| `{key}` | `{value}` |")
        md_lines.append("")

    points = export_data.get("points", [])
    md_lines.append("## Results")
    md_lines.append("")
    md_lines.append("| method | p | L | delta | trials | excluded | rel_linf | rel_l2 | accuracy |")
    md_lines.append("|--------|---|---|-------|--------|----------|----------|--------|----------|")
    for point in points:
        md_lines.append(
            f"| {point['method']} | {_cell(point['p'])} | {point['L']} | {_cell(point.get('delta'))} "
            f"| {point['trials']} | {point['excluded']} | {_cell(point['mean_rel_linf'])} "
            f"| {_cell(point['mean_rel_l2'])} | {_cell(point['accuracy'], 3)} |"
        )
    md_lines.append("")

    slopes = export_data.get("slopes", {})
    if slopes:
        md_lines.append("## Log-log slopes")
        md_lines.append("")
        md_lines.append("| axis | method | slope | stderr | points |")
        md_lines.append("|------|--------|-------|--------|--------|")
        for axis, fits in slopes.items():
            for method, fit in fits.items():
                md_lines.append(
                    f"| {axis} | {method} | {_cell(fit['slope'])} | {_cell(fit['stderr'])} | {fit['points']} |"
                )
        md_lines.append("")

    return "\n".join(md_lines)


def render(export_data: Dict[str, Any], format: str = "json") -> str:
    if format == "json":
        return export_to_json(export_data)
    if format == "yaml":
        return export_to_yaml(export_data)
    if format == "markdown":
        return export_to_markdown(export_data)
    raise InvalidArgument(f"Unsupported export format: {format}; choose from {', '.join(FORMATS)}")


def save_export(export_data: Dict[str, Any], output_path: Union[str, Path], format: str = "json"):
    """Write the export to a file, raising RankingError on I/O failure."""
    content = render(export_data, format)
    try:
        Path(output_path).write_text(content)
    except OSError as e:
        raise RankingError(f"Failed to save export to {output_path}: {e}", {"path": str(output_path)})
    logger.info(f"Exported summary to {output_path} ({format} format)")


def gnuplot_script(csv_path: Union[str, Path], x_column: str = "L", y_column: str = "rel_linf",
                   methods: Sequence[str] = ("spectral", "mle", "mle_unregularized"),
                   logscale: bool = True) -> str:
    """
    A gnuplot script plotting per-trial `y_column` against `x_column` for each method.

    gnuplot's `smooth unique` averages trials that share an x value, so the
    lines trace the per-point means.
    """
    for column in (x_column, y_column):
        if column not in CSV_COLUMNS:
            raise InvalidArgument(f"Unknown CSV column {column!r}")
    x_idx = CSV_COLUMNS.index(x_column) + 1
    y_idx = CSV_COLUMNS.index(y_column) + 1
    method_idx = CSV_COLUMNS.index("method") + 1

    lines: List[str] = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key top right",
        f"set xlabel '{x_column}'",
        f"set ylabel '{y_column}'",
    ]
    if logscale:
        lines.append("set logscale xy")
    plots = [
        f"'{csv_path}' every ::1 using (strcol({method_idx}) eq '{m}' ? ${x_idx} : 1/0):{y_idx} "
        f"smooth unique with linespoints title '{m}'"
        for m in methods
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
