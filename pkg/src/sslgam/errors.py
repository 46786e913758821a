"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so raising the most specific
class matters more than the message text.
"""


class SslgamError(Exception):
    """Base class for all package errors."""


class SchemaError(SslgamError):
    """Input data does not match the expected shape, columns, or domain."""


class UnknownVariableError(SchemaError):
    """A declared predictor is missing from the dataset."""


class NonNumericColumnError(SchemaError):
    """A predictor column is not numeric."""


class MissingDataError(SchemaError):
    """NA values found; no imputation is performed."""


class ConformabilityError(SchemaError):
    """Matrix dimensions do not line up with the fitted model."""


class SpecParseError(SslgamError):
    """A smooth-specification row could not be parsed."""


class UnsupportedBasisError(SpecParseError):
    """A basis kind other than the cubic regression spline was requested."""


class DegenerateKnotsError(SchemaError):
    """Too few distinct predictor values to place the requested knots."""


class DegenerateBasisError(SchemaError):
    """A transformed design column has (numerically) zero variance."""


class NumericError(SslgamError):
    """The solver produced non-finite values."""


class StratificationError(SchemaError):
    """Could not produce cross-validation folds with every outcome class."""


class ConcordanceUndefinedError(SslgamError):
    """No usable pairs for the concordance index."""


class ArchiveError(SpecParseError):
    """A model archive is malformed or has an incompatible version."""


class GridBoundaryWarning(UserWarning):
    """The tuning grid's best value sits on an endpoint; widen the grid."""
