"""
Exception hierarchy for topk-ranking.

Every error carries one of the ErrorCodes values so callers (and the CLI)
can turn it into a ResponseEnvelope without string matching.
"""

import numbers
from typing import Any, Dict, Optional

from topk_ranking.response import ErrorCodes, ResponseEnvelope


class RankingError(Exception):
    """Base class for all library errors."""

    code = ErrorCodes.UNEXPECTED_EXCEPTION

    def __init__(self, message: str, data: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.data = data or {}

    def to_response(self) -> dict:
        """Render as an error envelope."""
        return ResponseEnvelope.error(self.code, self.message, self.data)


class InvalidArgument(RankingError):
    code = ErrorCodes.INVALID_ARGUMENT


class DataFormatError(RankingError):
    code = ErrorCodes.DATA_FORMAT_ERROR


class ConfigError(RankingError):
    code = ErrorCodes.CONFIG_ERROR


class NonPositiveScore(RankingError):
    code = ErrorCodes.NON_POSITIVE_SCORE


class TooFewItems(RankingError):
    code = ErrorCodes.TOO_FEW_ITEMS


class DimensionMismatch(RankingError):
    code = ErrorCodes.DIMENSION_MISMATCH


class NormalizationTooSmall(RankingError):
    code = ErrorCodes.NORMALIZATION_TOO_SMALL


class EmptyGraph(RankingError):
    code = ErrorCodes.EMPTY_GRAPH


class Disconnected(RankingError):
    code = ErrorCodes.DISCONNECTED


class NoConvergence(RankingError):
    """Raised when an iterative solver exhausts its iteration budget."""

    code = ErrorCodes.NO_CONVERGENCE

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message, {"iterations": iterations, "residual": residual})
        self.iterations = iterations
        self.residual = residual


class BadK(RankingError):
    code = ErrorCodes.BAD_K


class ZeroTruth(RankingError):
    code = ErrorCodes.ZERO_TRUTH


class NotSymmetric(RankingError):
    code = ErrorCodes.NOT_SYMMETRIC


class NotReversible(RankingError):
    code = ErrorCodes.NOT_REVERSIBLE


class DegenerateQ(RankingError):
    code = ErrorCodes.DEGENERATE_Q


class BadEps(RankingError):
    code = ErrorCodes.BAD_EPS


class BadRegime(RankingError):
    code = ErrorCodes.BAD_REGIME


class InsufficientData(RankingError):
    code = ErrorCodes.INSUFFICIENT_DATA


def check_k(K: int, n: int):
    """Raise BadK unless 1 <= K < n."""
    if not isinstance(K, numbers.Integral) or isinstance(K, bool) or not (1 <= K < n):
        raise BadK(f"K must satisfy 1 <= K < n={n}, got {K!r}", {"K": K, "n": n})
