"""Piecewise-i.i.d. synthetic series used by the experiments."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class Gaussian:
    """Normal law with ``mean`` (scalar broadcast or vector) and covariance.

    ``cov`` is a scalar variance times the identity or a full ``d x d`` matrix.
    """

    mean: float | tuple = 0.0
    cov: float | tuple = 1.0

    def sample(self, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        mean = np.broadcast_to(np.asarray(self.mean, dtype=float), (d,))
        cov = np.asarray(self.cov, dtype=float)
        z = rng.standard_normal((n, d))
        if cov.ndim == 0:
            if cov < 0:
                raise ValueError(f"variance must be nonnegative, got {float(cov)}")
            return mean + np.sqrt(cov) * z
        if cov.shape != (d, d):
            raise ValueError(f"covariance must be {d}x{d}, got {cov.shape}")
        chol = np.linalg.cholesky(cov)
        return mean + z @ chol.T


@dataclass(frozen=True)
class Uniform:
    """Uniform law on the box ``[low, high]^d`` (bounds scalar or per coordinate)."""

    low: float | tuple = 0.0
    high: float | tuple = 1.0

    def sample(self, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        low = np.broadcast_to(np.asarray(self.low, dtype=float), (d,))
        high = np.broadcast_to(np.asarray(self.high, dtype=float), (d,))
        if np.any(high <= low):
            raise ValueError("uniform box needs high > low in every coordinate")
        return low + (high - low) * rng.random((n, d))


def distribution_from_dict(data: dict):
    kind = data.get("kind")
    args = {k: (tuple(v) if isinstance(v, list) else v) for k, v in data.items() if k != "kind"}
    if kind == "gaussian":
        return Gaussian(**args)
    if kind == "uniform":
        return Uniform(**args)
    raise ValueError(f"unknown distribution kind {kind!r}")


def distribution_to_dict(dist) -> dict:
    kind = "gaussian" if isinstance(dist, Gaussian) else "uniform"
    return {"kind": kind, **asdict(dist)}


@dataclass(frozen=True)
class SimulationSpec:
    """``T`` observations in ``d`` dimensions; segment ``s`` covers ``(theta_{s-1}, theta_s]``."""

    T: int
    d: int
    segments: tuple
    change_points: tuple = ()
    seed: int = 0
    n_reps: int = 1
    label: str = ""

    def __post_init__(self):
        cps = tuple(int(c) for c in self.change_points)
        object.__setattr__(self, "change_points", cps)
        object.__setattr__(self, "segments", tuple(self.segments))
        if len(self.segments) != len(cps) + 1:
            raise ValueError(f"{len(cps)} change points need {len(cps) + 1} segments, got {len(self.segments)}")
        if any(b <= a for a, b in zip((0,) + cps, cps + (self.T,))):
            raise ValueError(f"change points must be strictly ascending inside (0, {self.T}), got {cps}")
        if self.n_reps < 1:
            raise ValueError("n_reps must be positive")

    @property
    def is_null(self) -> bool:
        return not self.change_points

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "d": self.d,
            "segments": [distribution_to_dict(s) for s in self.segments],
            "change_points": list(self.change_points),
            "seed": self.seed,
            "n_reps": self.n_reps,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationSpec":
        data = dict(data)
        data["segments"] = tuple(distribution_from_dict(s) for s in data["segments"])
        data["change_points"] = tuple(data.get("change_points", ()))
        return cls(**data)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """PCG64 stream for replication ``rep``; independent of evaluation order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(rep,))))


def simulate(spec: SimulationSpec, rep: int = 0) -> np.ndarray:
    rng = replication_rng(spec.seed, rep)
    bounds = (0,) + spec.change_points + (spec.T,)
    parts = [dist.sample(rng, hi - lo, spec.d) for dist, lo, hi in zip(spec.segments, bounds[:-1], bounds[1:])]
    return np.vstack(parts)


def mean_shift(T: int, d: int, theta: int | None, shift: float, seed: int = 0, n_reps: int = 1, label: str = "") -> SimulationSpec:
    """Standard normal before ``theta`` and ``N(shift * 1, I)`` after (no change when ``theta`` is None)."""
    if theta is None:
        return SimulationSpec(T, d, (Gaussian(),), (), seed, n_reps, label)
    return SimulationSpec(T, d, (Gaussian(), Gaussian(mean=float(shift))), (theta,), seed, n_reps, label)


def variance_shift(T: int, d: int, theta: int, difference: float, seed: int = 0, n_reps: int = 1, label: str = "") -> SimulationSpec:
    """Standard normal before ``theta``, variance ``1 + difference`` per coordinate after."""
    return SimulationSpec(T, d, (Gaussian(), Gaussian(cov=1.0 + float(difference))), (theta,), seed, n_reps, label)
