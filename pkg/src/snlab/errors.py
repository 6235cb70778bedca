"""Exception hierarchy.

Numerical invariant failures derive from :class:`InvariantViolation`; the CLI
maps them to exit status 3. Configuration problems derive from
:class:`ConfigError` (exit status 2).
"""


class SNLabError(Exception):
    """Base class for all package errors."""


class InvariantViolation(SNLabError, ValueError):
    """A numerical or structural invariant does not hold."""

    def __init__(self, message, branch_index=None):
        if branch_index is not None:
            message = f"branch {branch_index}: {message}"
        super().__init__(message)
        self.branch_index = branch_index


class GridTooCoarse(InvariantViolation):
    pass


class BoundaryClipping(InvariantViolation):
    pass


class NormDrift(InvariantViolation):
    pass


class GridMismatch(InvariantViolation):
    pass


class WeightSumViolation(InvariantViolation):
    pass


class ResolutionGuardViolation(InvariantViolation):
    pass


class FixedPointDiverged(InvariantViolation):
    pass


class UnsortedRadii(InvariantViolation):
    pass


class NegativeDensity(InvariantViolation):
    pass


class QuadratureNonConvergent(InvariantViolation):
    pass


class ConfigError(SNLabError):
    """Base class for configuration failures."""


class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    def __init__(self, field, constraint, line=None):
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{field}: {constraint}")
        self.field = field
        self.constraint = constraint
        self.line = line
