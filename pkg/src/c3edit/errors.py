"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: validation/parse problems -> 2,
phase-machine violations and lock conflicts -> 3, numeric faults -> 4.
"""


class C3EditError(Exception):
    """Base class for all package errors."""


class ValidationError(C3EditError, ValueError):
    """An input violates a documented invariant."""


class ParseError(C3EditError, ValueError):
    """A file could not be parsed; the message names the offending field."""


class PhaseError(C3EditError, RuntimeError):
    """An operation was requested in a session phase that does not admit it."""

    def __init__(self, message: str, required_phase: str | None = None):
        super().__init__(message)
        self.required_phase = required_phase


class NumericFault(C3EditError, ArithmeticError):
    """A NaN or divergence was detected during a numeric loop."""


class ConflictError(C3EditError, RuntimeError):
    """Another mutating job currently owns the session."""
