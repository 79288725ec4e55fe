"""Exception types shared across the package.

Each maps onto one CLI exit code (see :mod:`seelab.cli`).
"""


class SeelabError(Exception):
    """Base class for all package errors."""


class DomainError(SeelabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(SeelabError, ValueError):
    """Array dimensions do not agree."""


class ArgumentError(SeelabError, ValueError):
    """A precondition on the arguments is violated."""


class ConfigError(SeelabError, ValueError):
    """Invalid configuration (schema violation, unstable step size, ...)."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class NumericError(SeelabError, ArithmeticError):
    """Non-finite numbers appeared during a computation."""


class CapabilityError(SeelabError):
    """A candidate solution lacks a derivative needed by a check."""


class PreconditionError(SeelabError):
    """A verified precondition (e.g. a touching point) does not hold."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class RegressionWarning(UserWarning):
    """Least-squares design matrix was rank deficient; ridge fallback used."""
