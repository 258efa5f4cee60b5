"""Nonparametric multivariate change-point detection with vector ranks and quadratic discrepancy."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .detect import (
    ChangePointReport,
    DetectionParams,
    detect,
    detect_single,
    multi_changepoints,
    sma_estimate,
)
from .discrepancy import mean_sliding_discrepancy, sliding_diphoragram, squared_discrepancy
from .kernels import KernelSpec
from .lds import sobol_point, sobol_prefix
from .nulldist import null_test, nystrom_spectrum, quantile, weighted_chisq_cdf
from .transport import RankedSample, optimal_assignment, vector_ranks

__all__ = [
    "ChangePointReport",
    "DetectionParams",
    "KernelSpec",
    "RankedSample",
    "__version__",
    "detect",
    "detect_single",
    "mean_sliding_discrepancy",
    "multi_changepoints",
    "null_test",
    "nystrom_spectrum",
    "optimal_assignment",
    "quantile",
    "sliding_diphoragram",
    "sma_estimate",
    "sobol_point",
    "sobol_prefix",
    "squared_discrepancy",
    "vector_ranks",
    "weighted_chisq_cdf",
]
