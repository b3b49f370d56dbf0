"""Exception types shared across the package."""


class RankcastError(Exception):
    """Base class for all package-specific errors."""


class CsvParseError(RankcastError):
    """Malformed input row; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class DuplicateRowError(RankcastError):
    """More than one row for the same (equity, quarter)."""


class ValidationError(RankcastError):
    """Input data violates a structural constraint."""


class InsufficientHistoryError(RankcastError):
    """Not enough quarters before the requested target."""


class ConvergenceError(RankcastError):
    """Iterative fit failed to reach its stopping criterion."""

    def __init__(self, message: str, params=None, gradient_norm=None):
        self.params = params
        self.gradient_norm = gradient_norm
        super().__init__(message)


class DegenerateInputError(RankcastError):
    """Input has no usable variation (constant series, identical curves)."""


class UndefinedMeasureError(RankcastError):
    """Statistic is undefined on this input (no pattern recurs)."""


class BacktestError(RankcastError):
    """Predictor or accounting failure during a backtest quarter."""
