"""Exception types shared across the package."""
from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class TrajectoryError(ValueError):
    """A trajectory violates one of its structural invariants.

    Parameters
    ----------
    message : str
        Human-readable description.
    row : int, optional
        Zero-based row (individual) index in the size-time matrix.
    individual_id : int, optional
        Identifier of the offending individual.
    """

    def __init__(self, message, row=None, individual_id=None):
        super().__init__(message)
        self.row = row
        self.individual_id = individual_id


class TrajectoryFormatError(TrajectoryError):
    """A trajectory file could not be parsed; ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None, individual_id=None):
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message, individual_id=individual_id)
        self.lineno = lineno


class FitError(ValueError):
    """The data cannot support the requested fit."""


class ConvergenceError(RuntimeError):
    """A truncated series or iteration failed to converge within its budget."""
