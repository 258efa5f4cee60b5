"""Empirical Monge-Kantorovich vector ranks by optimal assignment.

Each observation is matched to one point of the length-``T`` Sobol prefix so
that the total squared Euclidean transport cost is minimal; the matched
Sobol point is the observation's vector rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError
from .lds import sobol_prefix

SOLVERS = ("lapjv", "hungarian")


def _check_cost(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix has non-finite entries")
    return c


def hungarian(cost) -> tuple[np.ndarray, float]:
    """Kuhn-Munkres with row-by-row shortest augmenting paths, ``O(n**3)``.

    Dual potentials ``u`` (rows) and ``v`` (columns) are kept feasible; each
    row is inserted by a Dijkstra-like search over reduced costs, ties going
    to the lowest column index. Returns ``(perm, total)`` with row ``i``
    assigned to column ``perm[i]``.
    """
    c = _check_cost(cost)
    n = c.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp), 0.0
    # 1-based columns; column 0 is the virtual root of each search tree
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.intp)  # match[j] = row (1-based) owning column j
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            reduced = c[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    perm = np.empty(n, dtype=np.intp)
    perm[match[1:] - 1] = np.arange(n)
    return perm, float(c[np.arange(n), perm].sum())


def optimal_assignment(cost, solver: str = "lapjv") -> tuple[np.ndarray, float]:
    """Minimum-cost perfect matching of a square cost matrix.

    ``solver="lapjv"`` delegates to :func:`scipy.optimize.linear_sum_assignment`
    (an exact shortest-augmenting-path solver); ``"hungarian"`` uses the
    in-package :func:`hungarian`. Both return the exact optimum.
    """
    c = _check_cost(cost)
    if solver == "hungarian":
        return hungarian(c)
    if solver != "lapjv":
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    rows, cols = linear_sum_assignment(c)
    perm = np.empty(c.shape[0], dtype=np.intp)
    perm[rows] = cols
    return perm, float(c[rows, cols].sum())


def squared_distances(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - u[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@dataclass(frozen=True, eq=False)
class RankedSample:
    """Vector ranks ``Y[i] = u[sigma[i]]`` of observations ``X``.

    ``sigma`` indexes the Sobol prefix ``u`` (0-based, as in
    :func:`rankdisc.lds.sobol_prefix`); ``cost`` is the optimal total squared
    transport distance. ``X`` is kept so that sub-ranges can be re-ranked.
    """

    Y: np.ndarray
    sigma: np.ndarray
    cost: float
    X: np.ndarray

    @property
    def T(self) -> int:
        return self.Y.shape[0]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    def reversed(self) -> "RankedSample":
        """Same ranks in reversed time order (the assignment is order-free)."""
        return RankedSample(self.Y[::-1].copy(), self.sigma[::-1].copy(), self.cost, self.X[::-1].copy())


def as_observations(X) -> np.ndarray:
    x = np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise DataError(f"observations must be a T x d matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise DataError(f"need at least 2 observations, got {x.shape[0]}")
    if x.shape[1] < 1:
        raise DataError("observations have no columns")
    if not np.all(np.isfinite(x)):
        bad = np.argwhere(~np.isfinite(x))[0]
        raise DataError(f"non-finite observation at row {bad[0] + 1}, column {bad[1] + 1}")
    return x


def vector_ranks(X, solver: str = "lapjv") -> RankedSample:
    """Assign the ``T`` observations to the first ``T`` Sobol points in ``[0,1)^d``."""
    x = as_observations(X)
    T, d = x.shape
    u = sobol_prefix(T, d)
    sigma, cost = optimal_assignment(squared_distances(x, u), solver=solver)
    return RankedSample(Y=u[sigma], sigma=sigma, cost=cost, X=x)
