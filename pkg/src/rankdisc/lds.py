"""Sobol low-discrepancy points in the unit hypercube (Gray-code ordering).

Direction numbers come from the Joe & Kuo ``new-joe-kuo-6.21201`` table,
truncated to the first 64 coordinates and shipped as package data. Points
are held as 52-bit integers and divided by ``2**52`` on emission, which is
exact in double precision, so the output is bit-identical on every platform.

Indexing starts at 0 and the origin is emitted first; with that convention
every prefix of length ``2**m`` has exactly one point per dyadic interval of
width ``2**-m`` in each coordinate.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import UnsupportedDimensionError

BITS = 52
_SCALE = float(1 << BITS)


@lru_cache(maxsize=None)
def _joe_kuo_table() -> tuple[tuple[int, int, tuple[int, ...]], ...]:
    text = resources.files("rankdisc").joinpath("data/new-joe-kuo-64.txt").read_text()
    rows = []
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        _, s, a, *m = (int(tok) for tok in line.split())
        rows.append((s, a, tuple(m)))
    return tuple(rows)


def max_dimension() -> int:
    return len(_joe_kuo_table()) + 1


@lru_cache(maxsize=None)
def direction_numbers(d: int) -> np.ndarray:
    """Return a ``(d, BITS)`` uint64 array; column ``k`` holds ``v_{k+1}``."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if d > max_dimension():
        raise UnsupportedDimensionError(
            f"dimension {d} exceeds supported maximum {max_dimension()}"
        )
    table = _joe_kuo_table()
    v = np.zeros((d, BITS), dtype=np.uint64)
    v[0] = [1 << (BITS - k) for k in range(1, BITS + 1)]
    for j in range(1, d):
        s, a, m = table[j - 1]
        col = [0] * (BITS + 1)
        for k in range(1, BITS + 1):
            if k <= s:
                col[k] = m[k - 1] << (BITS - k)
            else:
                val = col[k - s] ^ (col[k - s] >> s)
                for i in range(1, s):
                    if (a >> (s - 1 - i)) & 1:
                        val ^= col[k - i]
                col[k] = val
        v[j] = col[1:]
    v.setflags(write=False)
    return v


class SobolGenerator:
    """Stateful Sobol stream using the Antonov-Saleev Gray-code update.

    Point ``n`` is obtained from point ``n - 1`` by XOR-ing in the direction
    number indexed by the lowest zero bit of ``n - 1``. Instances are not
    meant to be shared between threads.
    """

    def __init__(self, d: int):
        self.d = d
        self._v = direction_numbers(d)
        self.reset()

    def reset(self) -> None:
        self.index = 0
        self._state = np.zeros(self.d, dtype=np.uint64)

    def __iter__(self):
        return self

    def __next__(self) -> np.ndarray:
        if self.index > 0:
            c = _lowest_zero_bit(self.index - 1)
            if c >= BITS:
                raise StopIteration
            self._state ^= self._v[:, c]
        self.index += 1
        return self._state / _SCALE

    def take(self, n: int) -> np.ndarray:
        return np.array([next(self) for _ in range(n)]).reshape(n, self.d)


def _lowest_zero_bit(n: int) -> int:
    c = 0
    while n & 1:
        n >>= 1
        c += 1
    return c


def _points_at(indices: np.ndarray, d: int) -> np.ndarray:
    v = direction_numbers(d)
    idx = np.asarray(indices, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    state = np.zeros((idx.size, d), dtype=np.uint64)
    one = np.uint64(1)
    top = int(gray.max()).bit_length() if idx.size else 0
    for b in range(top):
        mask = ((gray >> np.uint64(b)) & one).astype(bool)
        if mask.any():
            state[mask] ^= v[:, b]
    return state / _SCALE


def sobol_prefix(n: int, d: int) -> np.ndarray:
    """First ``n`` Sobol points in ``[0, 1)^d`` as an ``(n, d)`` array.

    Evaluated in closed form from the Gray code of each index, which gives
    the same points, in the same order, as stepping a :class:`SobolGenerator`.

    >>> sobol_prefix(4, 1).ravel().tolist()
    [0.0, 0.5, 0.75, 0.25]
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n > (1 << BITS):
        raise ValueError("n exceeds the 2**52 points representable at this precision")
    return _points_at(np.arange(n, dtype=np.uint64), d)


def sobol_point(index: int, d: int) -> np.ndarray:
    """Random access to the ``index``-th point of the sequence."""
    if index < 0:
        raise ValueError(f"index must be nonnegative, got {index}")
    return _points_at(np.array([index], dtype=np.uint64), d)[0]
