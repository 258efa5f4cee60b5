"""Exception types shared across the package.

The CLI maps these onto process exit codes: ``DataError`` -> 2,
``NumericFailure`` -> 3; any other ``ValueError`` is a usage error (1).
"""


class RankDiscError(Exception):
    """Base class for errors raised by rankdisc."""


class UnsupportedDimensionError(RankDiscError, ValueError):
    """Requested dimension exceeds the bundled direction-number table."""


class DataError(RankDiscError, ValueError):
    """Input observations are malformed (parse failure, non-finite values, too short)."""


class DegenerateMeasureError(RankDiscError, ValueError):
    """An empirical measure has zero norm where a ratio needs it to be positive."""


class NumericFailure(RankDiscError, ArithmeticError):
    """An iterative numerical routine failed to converge."""
