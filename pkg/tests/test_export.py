"""
Tests for topk_ranking.export module

Tests summary export to JSON, YAML and Markdown, and gnuplot script generation.
"""

import json
import math
import sys
from pathlib import Path

import pytest
import yaml

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from topk_ranking import __version__, export, trends
from topk_ranking.errors import InvalidArgument, RankingError
from topk_ranking.experiment import ExperimentConfig, TrialRecord


def record(method, L, rel_linf, status="ok"):
    ok = status == "ok"
    return TrialRecord(
        n=50, p=0.3, L=L, K=5, delta=None, method=method, trial=0,
        rel_linf=rel_linf if ok else None, rel_l2=rel_linf / 2 if ok else None,
        topk_exact=1 if ok else None, iterations=7, seconds=None, seed=1, status=status,
    )


@pytest.fixture
def export_data():
    """Export built from two sweep points per method, one method fully excluded at L=5."""
    config = ExperimentConfig.from_dict({"name": "demo", "n": 50, "p": [0.3], "L": [5, 20], "K": 5, "trials": 1})
    records = [
        record("spectral", 5, 0.4),
        record("spectral", 20, 0.2),
        record("mle", 5, 0.0, status="disconnected"),
        record("mle", 20, 0.25),
    ]
    summaries = trends.summarize(records)
    slopes = {"L": trends.error_slopes(summaries, against="L")}
    return export.build_summary_export(config, summaries, slopes)


class TestSanitize:
    """Test sanitize function."""

    def test_nested(self):
        value = {"a": [1.0, math.nan, {"b": math.inf}], "c": (2, -math.inf), "d": "x"}
        assert export.sanitize(value) == {"a": [1.0, None, {"b": None}], "c": [2, None], "d": "x"}


class TestBuildSummaryExport:
    """Test build_summary_export function."""

    def test_fields(self, export_data):
        assert export_data["source"] == "topk-ranking"
        assert export_data["version"] == __version__
        assert export_data["experiment"] == "demo"
        assert export_data["config"]["L"] == [5, 20]
        assert len(export_data["points"]) == 4

    def test_excluded_point_has_no_nan(self, export_data):
        mle_short = next(p for p in export_data["points"] if p["method"] == "mle" and p["L"] == 5)
        assert mle_short["trials"] == 0
        assert mle_short["mean_rel_linf"] is None

    def test_slopes(self, export_data):
        fits = export_data["slopes"]["L"]
        assert set(fits) == {"spectral"}
        assert fits["spectral"]["slope"] == pytest.approx(-0.5)

    def test_without_slopes(self):
        config = ExperimentConfig()
        data = export.build_summary_export(config, [])
        assert data["slopes"] == {}
        assert data["points"] == []


class TestFormats:
    """Test the JSON, YAML and Markdown renderers."""

    def test_json(self, export_data):
        assert json.loads(export.export_to_json(export_data)) == export_data

    def test_yaml(self, export_data):
        assert yaml.safe_load(export.export_to_yaml(export_data)) == export_data

    def test_markdown(self, export_data):
        md = export.export_to_markdown(export_data)
        assert md.startswith("# Experiment `demo`")
        assert "## Configuration" in md
        assert "| spectral | 0.3 | 20 | - | 1 | 0 | 0.2 | 0.1 | 1 |" in md
        assert "| L | spectral | -0.5 |" in md

    def test_markdown_without_slopes(self):
        md = export.export_to_markdown({"experiment": "empty", "points": []})
        assert "## Results" in md
        assert "Log-log slopes" not in md

    def test_unknown_format(self, export_data):
        with pytest.raises(InvalidArgument):
            export.render(export_data, "csv")


class TestSaveExport:
    """Test save_export function."""

    @pytest.mark.parametrize("fmt", export.FORMATS)
    def test_writes_file(self, tmp_path, export_data, fmt):
        path = tmp_path / f"summary.{fmt}"
        export.save_export(export_data, path, format=fmt)
        assert path.read_text() == export.render(export_data, fmt)

    def test_unwritable(self, tmp_path, export_data):
        with pytest.raises(RankingError):
            export.save_export(export_data, tmp_path, format="json")


class TestGnuplotScript:
    """Test gnuplot_script function."""

    def test_default_plot(self):
        script = export.gnuplot_script("fig1a.csv")
        assert "set logscale xy" in script
        assert "set datafile commentschars '#'" in script
        assert script.count("smooth unique") == 3
        # L is column 3, rel_linf column 8, method column 6
        assert "strcol(6) eq 'spectral' ? $3 : 1/0):8" in script

    def test_linear_axes_and_methods(self):
        script = export.gnuplot_script("fig3.csv", x_column="delta", y_column="topk_exact",
                                       methods=["spectral"], logscale=False)
        assert "logscale" not in script
        assert "title 'spectral'" in script
        assert "title 'mle'" not in script

    def test_unknown_column(self):
        with pytest.raises(InvalidArgument):
            export.gnuplot_script("x.csv", x_column="lambda")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
