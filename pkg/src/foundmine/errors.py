"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems (bad inputs,
schema mismatches, out-of-range parameters) exit with 2, numerical
failures (degenerate decompositions, non-finite distances) with 3.
"""


class FoundmineError(Exception):
    """Base class for all package errors."""


class ValidationError(FoundmineError):
    """Invalid inputs or parameters detected before any numeric work."""


class SchemaError(ValidationError):
    """Delimited input does not match the codebook header contract."""


class ParseError(ValidationError):
    """Malformed delimited input (ragged rows, undecodable content)."""


class DimensionError(ValidationError):
    """Shape or range mismatch between data and requested model sizes."""


class NumericalError(FoundmineError):
    """A numeric routine could not produce a usable result."""


class DegenerateFitError(NumericalError):
    """Decomposition collapsed (e.g. rank-0 residual, all-tied axes)."""


class PipelineError(FoundmineError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
