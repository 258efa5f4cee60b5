"""Reproducing kernels behind the generalized quadratic discrepancy.

The one-dimensional factor of the product kernel is

    M + beta**2 * (kappa(x) + kappa(y) + B2((x - y) mod 1) / 2 + B1(x) * B1(y))

with ``M = 1 - beta**2 * int_0^1 kappa'(x)**2 dx``. Two choices of ``kappa``
are supported:

* ``"centered"``: ``kappa(x) = -B2((x - 1/2) mod 1) / 2``
* ``"star"``: ``kappa(x) = 1/6 - x**2 / 2``

The star form is the integrable choice with zero mean; the often-quoted
``1/6 - 1/x**2`` is not integrable on ``[0, 1]`` and cannot satisfy
``int kappa = 0``.

Because ``kappa``, ``B1`` and ``x -> B2((x - y) mod 1)`` all integrate to zero,
``int eta(x, z) dx = prod_i (M + beta**2 kappa(z_i))`` and
``int int eta = M**d``, which gives the doubly centered kernel used for the
V-statistic form of the discrepancy in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("star", "centered")


def bernoulli_poly(order: int, x):
    """Bernoulli polynomial ``B1`` or ``B2`` evaluated elementwise."""
    x = np.asarray(x, dtype=float)
    if order == 1:
        return x - 0.5
    if order == 2:
        return x * x - x + 1.0 / 6.0
    raise ValueError(f"unsupported Bernoulli order {order}; expected 1 or 2")


def frac(x):
    """``x mod 1`` mapped into ``[0, 1)``; exact integers map to 0."""
    x = np.asarray(x, dtype=float)
    r = x - np.floor(x)
    return np.where(r >= 1.0, 0.0, r)


def kappa(family: str, x):
    x = np.asarray(x, dtype=float)
    if family == "centered":
        return -0.5 * bernoulli_poly(2, frac(x - 0.5))
    if family == "star":
        return 1.0 / 6.0 - 0.5 * x * x
    raise ValueError(f"unknown kernel family {family!r}; expected one of {FAMILIES}")


# int_0^1 kappa'(x)^2 dx: star kappa' = -x, centered kappa' = -(x - 1/2)
_KAPPA_PRIME_SQ = {"star": 1.0 / 3.0, "centered": 1.0 / 12.0}


def scale_constant(family: str, beta: float = 1.0) -> float:
    if family not in _KAPPA_PRIME_SQ:
        raise ValueError(f"unknown kernel family {family!r}; expected one of {FAMILIES}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return 1.0 - beta * beta * _KAPPA_PRIME_SQ[family]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, scale ``beta`` and dimension; ``M`` is derived."""

    family: str = "star"
    d: int = 1
    beta: float = 1.0
    M: float = field(init=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be positive, got {self.d}")
        object.__setattr__(self, "M", scale_constant(self.family, self.beta))

    def with_dimension(self, d: int) -> "KernelSpec":
        return KernelSpec(self.family, d, self.beta)


def _as_points(spec: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != spec.d:
        raise ValueError(f"point dimension {x.shape[-1]} does not match kernel dimension {spec.d}")
    return x


def eta(spec: KernelSpec, x, y):
    """Product kernel ``eta(x, y)``; broadcasts over leading axes."""
    x = _as_points(spec, x)
    y = _as_points(spec, y)
    b2 = spec.beta ** 2
    f = spec.M + b2 * (
        kappa(spec.family, x)
        + kappa(spec.family, y)
        + 0.5 * bernoulli_poly(2, _wrapped_gap(x, y))
        + bernoulli_poly(1, x) * bernoulli_poly(1, y)
    )
    return np.prod(f, axis=-1)


def _wrapped_gap(x, y):
    # B2 is symmetric about 1/2, so either orientation of the wrap gives the
    # same value; taking the minimum makes the result bitwise symmetric.
    return np.minimum(frac(x - y), frac(y - x))


def eta_mean(spec: KernelSpec, z):
    """``int eta(x, z) dx`` over the unit cube."""
    z = _as_points(spec, z)
    return np.prod(spec.M + spec.beta ** 2 * kappa(spec.family, z), axis=-1)


def centered_kernel(spec: KernelSpec, x, y):
    """Doubly centered kernel ``eta(x,y) - g(x) - g(y) + M**d``."""
    # summing g(x) + g(y) first keeps the result bitwise symmetric
    return eta(spec, x, y) - (eta_mean(spec, x) + eta_mean(spec, y)) + spec.M ** spec.d


def gram_matrix(spec: KernelSpec, points, other=None) -> np.ndarray:
    """Matrix of centered-kernel values between two point sets.

    Built one coordinate at a time so peak memory is a few ``n x m`` arrays
    regardless of ``d``. With ``other`` omitted the result is exactly
    symmetric.
    """
    x = np.atleast_2d(_as_points(spec, points))
    y = x if other is None else np.atleast_2d(_as_points(spec, other))
    b2 = spec.beta ** 2
    fam = spec.family
    ka_x, ka_y = kappa(fam, x), kappa(fam, y)
    b1_x, b1_y = bernoulli_poly(1, x), bernoulli_poly(1, y)
    prod = np.ones((x.shape[0], y.shape[0]))
    for i in range(spec.d):
        diff = frac(x[:, i, None] - y[None, :, i])
        if other is None:
            # B2(frac(t)) = B2(frac(-t)); symmetrize so the matrix is bitwise symmetric
            diff = np.minimum(diff, diff.T)
        factor = (ka_x[:, i, None] + ka_y[None, :, i]) + 0.5 * bernoulli_poly(2, diff)
        factor += b1_x[:, i, None] * b1_y[None, :, i]
        factor *= b2
        factor += spec.M
        prod *= factor
    gx = np.prod(spec.M + b2 * ka_x, axis=1)
    gy = gx if other is None else np.prod(spec.M + b2 * ka_y, axis=1)
    return prod - (gx[:, None] + gy[None, :]) + spec.M ** spec.d
