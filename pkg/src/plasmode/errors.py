"""Exception hierarchy.

``ValidationError`` marks bad inputs or configuration (CLI exit code 1);
``ComputationError`` marks failures while computing on valid inputs
(CLI exit code 2).
"""


class PlasmodeError(Exception):
    pass


class ValidationError(PlasmodeError, ValueError):
    pass


class ComputationError(PlasmodeError, RuntimeError):
    pass


# --- dataio ---------------------------------------------------------------

class MissingFile(ValidationError, FileNotFoundError):
    pass


class ParseError(ValidationError):
    def __init__(self, row, column, value=None):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"cannot parse {value!r} as a finite number at row {row}, column {column!r}")


class DuplicateColumn(ValidationError):
    pass


class OutcomeNotFound(ValidationError):
    pass


class TooFewRows(ValidationError):
    pass


class KOutOfRange(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class IoError(ComputationError, OSError):
    pass


# --- resampling / m selection --------------------------------------------

class MGreaterThanN(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class UnsupportedScheme(ValidationError):
    pass


class FloorAboveN(ValidationError):
    pass


class SingleCandidate(ValidationError):
    pass


class EmptySample(ValidationError):
    pass


# --- regression -------------------------------------------------------------

class SingularSystem(ComputationError):
    pass


class NoConvergence(ComputationError):
    def __init__(self, max_iter, max_change, lam=None):
        self.max_iter = max_iter
        self.max_change = max_change
        self.lam = lam
        super().__init__(
            f"coordinate descent did not converge in {max_iter} sweeps "
            f"(lambda={lam}, last max change={max_change:.3e})"
        )


class DegenerateKernel(ComputationError):
    pass


# --- ogm / harness ------------------------------------------------------------

class UnknownColumn(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class BadWindow(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class StageError(PlasmodeError):
    """Wraps a failure inside a pipeline stage with its location."""

    def __init__(self, stage, cause, replicate=None, completed=None):
        self.stage = stage
        self.cause = cause
        self.replicate = replicate
        self.completed = list(completed or [])
        where = f"stage {stage!r}" + (f", replicate {replicate}" if replicate is not None else "")
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
