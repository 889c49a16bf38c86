"""
Error types raised by the simulator

Every error derives from ValueError so callers that already guard input
validation with ``except ValueError`` keep working.
"""
from typing import Optional


class VectorSimError(ValueError):
    """Base class for all simulator errors"""


class RejectedInputError(VectorSimError):
    """An argument is out of range or malformed"""


class SingularChannelError(VectorSimError):
    """The channel matrix is singular or numerically rank-deficient"""


class SingularDiagonalError(VectorSimError):
    """A diagonal entry is zero where diag(H) has to be inverted"""


class DegenerateChannelError(VectorSimError):
    """A triangular factor has a zero diagonal entry"""


class ConfigError(VectorSimError):
    """
    A scenario file could not be parsed or validated.

    Args:
        message: Human readable description
        line: 1-based line number in the scenario text, if known
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
