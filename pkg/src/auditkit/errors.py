"""Exception types shared across the toolkit.

Each class carries the CLI exit code used when the error escapes a command:
1 = configuration problem, 2 = data problem, 3 = runtime/numerical problem.
"""


class AuditError(Exception):
    exit_code = 3


class ConfigError(AuditError):
    exit_code = 1


class SchemaError(AuditError):
    """A named column/feature is missing or inconsistent with its schema."""

    exit_code = 2


class ParseError(AuditError):
    """A cell could not be parsed; the message names the row and column."""

    exit_code = 2


class EmptyInputError(AuditError):
    exit_code = 2


class StateError(AuditError):
    """Operation invoked on an object in the wrong lifecycle state."""


class ShapeError(AuditError):
    """Matrix dimensions disagree with what a fitted object expects."""


class DegenerateTrainingError(AuditError):
    """Training data cannot support a fit (e.g. only one class present)."""


class NumericalError(AuditError):
    """A linear solve or related numeric step failed."""


class DefenseInfeasibleError(AuditError):
    """Perturbation filtering never retained a sample within the recursion cap."""
