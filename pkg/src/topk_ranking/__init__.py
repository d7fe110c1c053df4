"""Top-K ranking from pairwise comparisons: spectral ranking and regularized MLE."""

__version__ = "0.1.0"
