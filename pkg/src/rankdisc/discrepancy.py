"""Squared quadratic discrepancy of point sets and the sliding diphoragram.

Time indices exposed by this module are 1-based and ranges are inclusive,
so ``Diphoragram.at(t)`` is the squared discrepancy of the window
``Y[t], ..., Y[t + tau - 1]``. Each window holds exactly ``tau`` points, which
lets ``floor(T / tau)`` disjoint windows tile the sample without overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpec, centered_kernel, eta, eta_mean, gram_matrix

__all__ = [
    "Diphoragram",
    "EmpiricalMeasureHandle",
    "GramBlocks",
    "gram_matrix",
    "mean_sliding_discrepancy",
    "nonuniformity_inner",
    "sliding_diphoragram",
    "squared_discrepancy",
    "squared_discrepancy_threeterm",
    "window_discrepancy",
]

# Above this many points the full Gram matrix is not materialized.
GRAM_LIMIT = 8000


def _points(spec: KernelSpec, points) -> np.ndarray:
    y = getattr(points, "Y", points)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1) if spec.d == 1 else y.reshape(1, -1)
    if y.shape[0] == 0:
        raise ValueError("discrepancy of an empty point set is undefined")
    if y.shape[1] != spec.d:
        raise ValueError(f"points have dimension {y.shape[1]}, kernel expects {spec.d}")
    return y


def _chunked_gram_sum(spec: KernelSpec, a: np.ndarray, b: np.ndarray, chunk: int = 2048) -> float:
    total = 0.0
    for i in range(0, a.shape[0], chunk):
        total += float(gram_matrix(spec, a[i:i + chunk], b).sum())
    return total


def squared_discrepancy(spec: KernelSpec, points) -> float:
    """``(1/n**2) * sum_ij K(y_i, y_j)`` with ``K`` the centered kernel."""
    y = _points(spec, points)
    n = y.shape[0]
    if n <= GRAM_LIMIT:
        return float(gram_matrix(spec, y).sum()) / (n * n)
    return _chunked_gram_sum(spec, y, y) / (n * n)


def squared_discrepancy_threeterm(spec: KernelSpec, points) -> float:
    """The same quantity from ``eta`` directly: ``M**d - 2 mean g + mean eta``."""
    y = _points(spec, points)
    n = y.shape[0]
    cross = eta(spec, y[:, None, :], y[None, :, :]).sum() / (n * n)
    return spec.M ** spec.d - 2.0 * float(eta_mean(spec, y).mean()) + float(cross)


def window_discrepancy(spec: KernelSpec, points, t: int, tau: int) -> float:
    """Direct evaluation of one diphoragram value (1-based ``t``)."""
    y = _points(spec, points)
    return squared_discrepancy(spec, y[t - 1:t - 1 + tau])


@dataclass(frozen=True)
class Diphoragram:
    """Windowed squared discrepancies ``values[t - 1]`` for ``t = 1..T - tau + 1``."""

    values: np.ndarray
    tau: int
    T: int
    spec: KernelSpec

    def __len__(self) -> int:
        return self.values.shape[0]

    def at(self, t: int) -> float:
        return float(self.values[t - 1])

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    @property
    def n_windows(self) -> int:
        return self.T // self.tau


def _band(spec: KernelSpec, y: np.ndarray, tau: int) -> list[np.ndarray]:
    # band[lag][i] = K(y_i, y_{i+lag}), 0-based
    return [centered_kernel(spec, y[: y.shape[0] - lag], y[lag:]) for lag in range(tau)]


def sliding_diphoragram(spec: KernelSpec, ranked, tau: int) -> Diphoragram:
    """Squared discrepancy of every length-``tau`` window of the ranked sample.

    Consecutive windows differ by one point leaving and one entering, so the
    window kernel sum is updated by the kernel row of each; only the kernel
    band of width ``tau`` is ever evaluated (``O(T * tau * d)`` work).
    """
    y = _points(spec, ranked)
    T = y.shape[0]
    if not 1 < tau <= T:
        raise ValueError(f"bandwidth tau must satisfy 1 < tau <= T={T}, got {tau}")
    band = _band(spec, y, tau)
    n_out = T - tau + 1
    # removing point t from window [t, t+tau-1]
    removed = band[0][:n_out - 1].copy()
    # adding point j to window [j-tau+1, j]
    added = band[0][tau:].copy()
    for lag in range(1, tau):
        removed += 2.0 * band[lag][:n_out - 1]
        added += 2.0 * band[lag][tau - lag:T - lag]
    first = float(gram_matrix(spec, y[:tau]).sum())
    sums = np.empty(n_out)
    sums[0] = first
    if n_out > 1:
        sums[1:] = first + np.cumsum(added - removed)
    return Diphoragram(values=sums / (tau * tau), tau=tau, T=T, spec=spec)


def mean_sliding_discrepancy(diph: Diphoragram) -> float:
    """Average of ``tau * Delta_t`` over the disjoint windows ``t = 1, 1 + tau, ...``.

    When ``tau`` does not divide ``T`` the ragged tail is discarded and the
    average runs over ``floor(T / tau)`` windows.
    """
    a = diph.n_windows
    if a < 2:
        raise ValueError(f"need at least 2 disjoint windows, have {a} (T={diph.T}, tau={diph.tau})")
    starts = np.arange(a) * diph.tau
    return float(diph.tau * diph.values[starts].sum() / a)


@dataclass(frozen=True)
class EmpiricalMeasureHandle:
    """Uniform empirical measure on ``Y[lo..hi]`` (1-based, inclusive)."""

    lo: int
    hi: int

    def __post_init__(self):
        if not 1 <= self.lo <= self.hi:
            raise ValueError(f"invalid index range [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def slice(self) -> slice:
        return slice(self.lo - 1, self.hi)


class GramBlocks:
    """Constant-time sums of rectangular blocks of the sample Gram matrix.

    Keeps a 2-D prefix-sum table of the full Gram matrix when ``T`` is at
    most ``GRAM_LIMIT``; larger samples evaluate each requested block on
    demand.
    """

    def __init__(self, spec: KernelSpec, ranked):
        self.spec = spec
        self.y = _points(spec, ranked)
        self.T = self.y.shape[0]
        self._table = None
        if self.T <= GRAM_LIMIT:
            g = gram_matrix(spec, self.y)
            table = np.zeros((self.T + 1, self.T + 1))
            np.cumsum(np.cumsum(g, axis=0), axis=1, out=table[1:, 1:])
            self._table = table

    def block_sum(self, a: EmpiricalMeasureHandle, b: EmpiricalMeasureHandle) -> float:
        if a.hi > self.T or b.hi > self.T:
            raise ValueError(f"index range exceeds sample length {self.T}")
        if self._table is None:
            return _chunked_gram_sum(self.spec, self.y[a.slice()], self.y[b.slice()])
        p = self._table
        return float(p[a.hi, b.hi] - p[a.lo - 1, b.hi] - p[a.hi, b.lo - 1] + p[a.lo - 1, b.lo - 1])

    def inner(self, a: EmpiricalMeasureHandle, b: EmpiricalMeasureHandle) -> float:
        return self.block_sum(a, b) / (a.size * b.size)

    def prefix_inner_arrays(self):
        """Vectors over split ``s = 1..T-1`` of ``<pre,pre>``, ``<pre,post>``, ``<post,post>``.

        ``pre = [1, s]`` and ``post = [s + 1, T]``. Requires the prefix table.
        """
        if self._table is None:
            raise ValueError(f"all-split statistics need T <= {GRAM_LIMIT}")
        p, T = self._table, self.T
        s = np.arange(1, T)
        total = p[T, T]
        pre = p[s, s]
        cross = p[s, T] - pre
        post = total - pre - 2.0 * cross
        n_pre = s.astype(float)
        n_post = (T - s).astype(float)
        return s, pre / n_pre ** 2, cross / (n_pre * n_post), post / n_post ** 2


def nonuniformity_inner(spec: KernelSpec, a: EmpiricalMeasureHandle, b: EmpiricalMeasureHandle, ranked) -> float:
    """Kernel inner product of two windowed empirical measures of ``ranked``."""
    y = _points(spec, ranked)
    if a.hi > y.shape[0] or b.hi > y.shape[0]:
        raise ValueError(f"index range exceeds sample length {y.shape[0]}")
    g = gram_matrix(spec, y[a.slice()], y[b.slice()])
    return float(g.sum()) / (a.size * b.size)
