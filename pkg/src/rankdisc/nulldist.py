"""Null law of the scaled discrepancy: spectrum, weighted chi-square CDF, test.

Under uniformity ``n * D**2`` tends to ``sum_i lambda_i Z_i**2`` where the
``lambda_i`` are the eigenvalues of the integral operator with the centered
kernel. The eigenvalues are approximated by Nystrom on Sobol nodes, and the
CDF of the finite mixture by a midpoint-rule Gil-Pelaez inversion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NumericFailure
from .kernels import KernelSpec, gram_matrix
from .lds import sobol_prefix

# eigenvalues below this are treated as zero
EIG_FLOOR = 1e-12
# weights carrying less than this share of the total are dropped before CDF evaluation
WEIGHT_SHARE_FLOOR = 1e-3
# series length; the residual for a single chi-square(1) weight at x = 0 decays like K**-0.5
DEFAULT_K = 4000
TAIL_TOL = 1e-7
_CHUNK = 256
# aliasing guard: keep 2*pi/alpha >= x + ALIAS_MARGIN * mean; P(chi2_1 > 12) ~ 5e-4
ALIAS_MARGIN = 12.0


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    m: int
    spec: KernelSpec
    trace: float

    @property
    def d(self) -> int:
        return self.spec.d

    def positive(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues > 0]


@dataclass(frozen=True)
class NullTestParams:
    """Knobs of the acceptance test; ``a`` is the number of disjoint windows."""

    gamma: float = 0.1
    K: int = DEFAULT_K
    alpha: float = 0.5
    N: int = 50
    m: int = 512
    a: int = 2

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.K < 1:
            raise ValueError(f"series length K must be positive, got {self.K}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 1 <= self.N <= self.m:
            raise ValueError(f"need 1 <= N <= m, got N={self.N}, m={self.m}")
        if self.a < 1:
            raise ValueError(f"window count a must be positive, got {self.a}")


@dataclass(frozen=True)
class NullTestResult:
    statistic: float
    p_value: float
    reject: bool
    gamma: float
    weights: np.ndarray = field(repr=False)


def nystrom_eigenvalues(kernel_matrix: np.ndarray, N: int) -> np.ndarray:
    """Top ``N`` eigenvalues of ``kernel_matrix / m``, descending, negatives clamped."""
    m = kernel_matrix.shape[0]
    if N > m:
        raise ValueError(f"cannot extract {N} eigenvalues from {m} nodes")
    w = np.linalg.eigvalsh(kernel_matrix / m)[::-1][:N]
    w = np.where(w < EIG_FLOOR, 0.0, w)
    return np.ascontiguousarray(w)


@lru_cache(maxsize=64)
def _nystrom_cached(family: str, d: int, beta: float, m: int, N: int) -> Spectrum:
    spec = KernelSpec(family, d, beta)
    nodes = sobol_prefix(m, d)
    g = gram_matrix(spec, nodes)
    lam = nystrom_eigenvalues(g, N)
    lam.setflags(write=False)
    return Spectrum(eigenvalues=lam, m=m, spec=spec, trace=float(np.trace(g)) / m)


def nystrom_spectrum(spec: KernelSpec, m: int = 512, N: int = 50) -> Spectrum:
    """Approximate leading eigenvalues of the centered-kernel integral operator.

    Nodes are the first ``m`` Sobol points with equal weights ``1/m``. Results
    are memoized per ``(family, d, beta, m, N)``.
    """
    if not 1 <= N <= m:
        raise ValueError(f"need 1 <= N <= m, got N={N}, m={m}")
    return _nystrom_cached(spec.family, spec.d, float(spec.beta), int(m), int(N))


def _check_weights(lambdas) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("need at least one weight")
    if np.any(~(lam > 0)):
        raise ValueError("weights must be strictly positive")
    return lam


def weighted_chisq_cdf(lambdas, x, K: int = DEFAULT_K, alpha: float = 0.5):
    """Series approximation of ``P(sum_i lambda_i Z_i**2 <= x)``.

    Midpoint rule with step ``alpha`` on the Gil-Pelaez inversion integral,
    truncated after ``K + 1`` nodes. The rule aliases mass beyond
    ``2*pi/alpha - x`` back into the result, so ``alpha`` is an upper bound:
    per evaluation point it is reduced to ``2*pi / (x + ALIAS_MARGIN * sum(lambdas))``
    when that is smaller. Node magnitudes are decreasing in ``k``,
    so summation stops once ``|term_k| * (K - k)`` (a bound on everything
    left) falls below ``TAIL_TOL``. The truncated series can overshoot, so
    the result is clipped to ``[0, 1]``. ``x`` may be an array.
    """
    lam = _check_weights(lambdas)
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise ValueError("x must be nonnegative")
    flat = xs.ravel()
    steps = np.minimum(alpha, 2.0 * np.pi / (flat + ALIAS_MARGIN * lam.sum()))
    F = np.empty(flat.shape)
    # points sharing a step share the node set
    for step in np.unique(steps):
        sel = steps == step
        F[sel] = _gil_pelaez_midpoint(lam, flat[sel], K, float(step))
    F = np.clip(F, 0.0, 1.0)
    return float(F[0]) if xs.ndim == 0 else F.reshape(xs.shape)


def _gil_pelaez_midpoint(lam: np.ndarray, x: np.ndarray, K: int, alpha: float) -> np.ndarray:
    F = np.full(x.shape, 0.5)
    for start in range(0, K + 1, _CHUNK):
        k = np.arange(start, min(K + 1, start + _CHUNK)) + 0.5
        t = k * alpha
        z = 2.0 * t[:, None] * lam[None, :]
        phase = 0.5 * np.arctan(z).sum(axis=1)
        # prod (1 + z^2)^(1/4) accumulated in log space to avoid overflow
        coef = np.exp(-0.25 * np.log1p(z * z).sum(axis=1)) / (np.pi * k)
        F -= (coef[:, None] * np.sin(phase[:, None] - t[:, None] * x[None, :])).sum(axis=0)
        if coef[-1] * (K + 0.5 - k[-1]) < TAIL_TOL:
            break
    return F


def quantile(lambdas, p: float, K: int = DEFAULT_K, alpha: float = 0.5, tol: float = 1e-4, max_iter: int = 200) -> float:
    """Invert :func:`weighted_chisq_cdf` by bisection on ``[0, 20 * sum(lambdas)]``."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    lam = _check_weights(lambdas)
    lo, hi = 0.0, 20.0 * float(lam.sum())
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        err = weighted_chisq_cdf(lam, mid, K, alpha) - p
        if abs(err) < tol:
            return mid
        if err < 0:
            lo = mid
        else:
            hi = mid
    raise NumericFailure(f"quantile bisection for p={p} did not converge in {max_iter} iterations")


def null_weights(spectrum: Spectrum, a: int, N: int | None = None) -> np.ndarray:
    """Weights of the limit law of the mean sliding discrepancy.

    Each of the leading ``N`` eigenvalues contributes ``a`` copies of
    ``lambda / a``; eigenvalues holding under 0.1% of the total are dropped.
    """
    lam = spectrum.positive()
    if N is not None:
        lam = lam[:N]
    if lam.size == 0:
        raise NumericFailure("spectrum has no positive eigenvalues")
    lam = lam[lam >= WEIGHT_SHARE_FLOOR * lam.sum()]
    return np.repeat(lam / a, a)


def null_test(delta_bar: float, spectrum: Spectrum, params: NullTestParams) -> NullTestResult:
    """Reject uniformity (i.e. report a change) iff ``P(V <= delta_bar) >= 1 - gamma``."""
    if delta_bar < 0:
        raise ValueError(f"mean sliding discrepancy must be nonnegative, got {delta_bar}")
    w = null_weights(spectrum, params.a, params.N)
    p = weighted_chisq_cdf(w, delta_bar, params.K, params.alpha)
    return NullTestResult(
        statistic=float(delta_bar),
        p_value=float(p),
        reject=bool(p >= 1.0 - params.gamma),
        gamma=params.gamma,
        weights=w,
    )
