"""Exception types shared across the package."""


class GradCraftError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateGradientSetError(GradCraftError, ValueError):
    """Raised when an operation receives a gradient set it cannot balance,
    e.g. magnitude adjustment on an all-zero set."""


class SingularSystemError(GradCraftError, ArithmeticError):
    """Raised when a positive-definite solve fails at every jitter level.

    Carries the final pivot value seen by the factorization and the jitter
    levels that were attempted.
    """

    def __init__(self, message: str, *, pivot: float, jitters: tuple[float, ...]):
        super().__init__(message)
        self.pivot = pivot
        self.jitters = jitters


class UndefinedMetricError(GradCraftError, ValueError):
    """Raised when a ranking metric is requested on degenerate input,
    e.g. AUC with a single class present."""


class DumpParseError(GradCraftError, ValueError):
    """Structural problem in a gradient dump file (bad JSON, missing or
    mistyped fields). Carries human-readable location context."""


class DumpValidationError(GradCraftError, ValueError):
    """Semantic problem in a gradient dump file (dimension mismatch,
    duplicate task names, non-finite values)."""


class ConfigError(GradCraftError, ValueError):
    """Invalid experiment configuration. The message includes the offending
    field path, e.g. ``strategies[1].tau``."""
