"""Standard response envelope and error codes."""

from typing import Any


class ResponseEnvelope:
    """Standard response envelope for CLI JSON output."""

    @staticmethod
    def success(message: str, data: Any = None) -> dict:
        """Create a success response."""
        return {
            "ok": True,
            "error": None,
            "message": message,
            "data": data or {}
        }

    @staticmethod
    def error(code: str, message: str, data: Any = None) -> dict:
        """Create an error response."""
        return {
            "ok": False,
            "error": code,
            "message": message,
            "data": data or {}
        }


class ErrorCodes:
    """Error codes shared by the library and the CLI."""
    UNEXPECTED_EXCEPTION = "unexpected_exception"
    INVALID_ARGUMENT = "invalid_argument"
    IO_ERROR = "io_error"
    CONFIG_ERROR = "config_error"
    DATA_FORMAT_ERROR = "data_format_error"

    # Model
    NON_POSITIVE_SCORE = "non_positive_score"
    TOO_FEW_ITEMS = "too_few_items"
    DIMENSION_MISMATCH = "dimension_mismatch"

    # Solvers
    NORMALIZATION_TOO_SMALL = "normalization_too_small"
    EMPTY_GRAPH = "empty_graph"
    DISCONNECTED = "disconnected"
    NO_CONVERGENCE = "no_convergence"
    BAD_K = "bad_k"

    # Metrics / theory
    ZERO_TRUTH = "zero_truth"
    NOT_SYMMETRIC = "not_symmetric"
    NOT_REVERSIBLE = "not_reversible"
    DEGENERATE_Q = "degenerate_q"
    BAD_EPS = "bad_eps"
    BAD_REGIME = "bad_regime"
    INSUFFICIENT_DATA = "insufficient_data"
