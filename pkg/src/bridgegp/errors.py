"""Shared exception types.

Every failure mode that callers are expected to branch on gets its own
class; anything else surfaces as a plain ValueError from the offending
module.
"""


class BridgeGpError(Exception):
    """Base class for all library-specific errors."""


class DomainError(BridgeGpError, ValueError):
    """A point lies outside the closed unit cube."""


class OrderMismatchError(BridgeGpError, ValueError):
    """Two spectral objects disagree on dimension or truncation order."""


class ResourceLimitError(BridgeGpError, ValueError):
    """A requested dimension/order pair exceeds the dense-storage budget."""


class ResonanceError(BridgeGpError, ValueError):
    """A Helmholtz eigenvalue n^2 pi^2 - omega^2 is not strictly positive."""


class SingularSystemError(BridgeGpError, ValueError):
    """A Gram system stayed non-positive-definite after one jitter retry."""


class NumericalError(BridgeGpError, ArithmeticError):
    """An iterative computation produced nothing finite to work with."""


class ExpressionError(BridgeGpError, ValueError):
    """A source expression failed to tokenize, parse, or evaluate."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ConfigError(BridgeGpError, ValueError):
    """A run configuration is malformed or contains unknown keys."""
