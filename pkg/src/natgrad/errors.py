"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """Malformed input: chart mismatch, wrong shape, empty batch, ..."""


class DomainError(ValueError):
    """Parameters outside the valid region of a policy family."""


class ChartViolationError(DomainError):
    """An update left the valid region of the chart (e.g. sigma <= 0)."""


class SingularMatrixError(ArithmeticError):
    """Cholesky factorization met a non-positive pivot."""

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class NumericalBreakdownError(ArithmeticError):
    """An iterative method produced NaN or Inf."""


class DegenerateGradientError(ValueError):
    """Gradient quadratic form too small to define a step size."""


class BacktrackingError(RuntimeError):
    """Backtracking exhausted its halvings without meeting the KL budget."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
