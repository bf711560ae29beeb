# lapinfer/errors.py
"""
Exception hierarchy shared by the library and the command line.

Each exception class carries the process exit code the CLI reports for it.
"""


class LaplacianError(Exception):
    """Base class for all errors raised by lapinfer."""

    exit_code = 1


class ValidationError(LaplacianError):
    """Input data or arguments violate a documented precondition."""

    exit_code = 3


class DimensionError(ValidationError):
    """Matrices or vectors have incompatible shapes."""


class ConfigError(ValidationError):
    """A simulation config field is missing or invalid."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


class NumericalError(LaplacianError):
    """A numerical routine failed (factorization, sampling)."""

    exit_code = 4


class ConvergenceError(NumericalError):
    """An iterative projection did not reach its tolerance."""

    def __init__(self, message: str, gap: float, iterations: int):
        super().__init__(f"{message} (gap={gap:.3e} after {iterations} iterations)")
        self.gap = gap
        self.iterations = iterations


def ensure(description: str, condition: bool, error: type = ValidationError) -> None:
    """
    Raise ``error(description)`` unless the condition holds.

    Args:
        description: Message describing the violated requirement.
        condition: Boolean outcome of the check.
        error: Exception class to raise.
    """
    if not condition:
        raise error(description)
