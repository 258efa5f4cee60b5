"""Change-point estimators built on the ranked sample and its diphoragram."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .discrepancy import (
    Diphoragram,
    EmpiricalMeasureHandle,
    GramBlocks,
    mean_sliding_discrepancy,
    sliding_diphoragram,
)
from .errors import DataError, DegenerateMeasureError
from .kernels import KernelSpec
from .nulldist import DEFAULT_K, NullTestParams, Spectrum, null_test, nystrom_spectrum
from .transport import RankedSample, vector_ranks

METHODS = ("diphoragram", "distance", "ratio", "sma")
# smallest admissible side of a split for the distance and ratio statistics
TAU_MIN = 2


@dataclass(frozen=True)
class DetectionParams:
    tau: int
    gamma: float = 0.1
    family: str = "star"
    beta: float = 1.0
    K: int = DEFAULT_K
    alpha: float = 0.5
    N: int = 50
    m: int = 512
    n_iter: int = 10
    k_max: int = 10
    solver: str = "lapjv"
    spectrum: Spectrum | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.tau < 2:
            raise ValueError(f"bandwidth tau must be at least 2, got {self.tau}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    def kernel(self, d: int) -> KernelSpec:
        return KernelSpec(self.family, d, self.beta)

    def null_params(self, a: int) -> NullTestParams:
        return NullTestParams(gamma=self.gamma, K=self.K, alpha=self.alpha, N=self.N, m=self.m, a=a)


@dataclass
class ChangePointReport:
    """Outcome of one detector run; every field is JSON-serializable."""

    method: str
    detected: bool
    T: int
    change_points: list[int] = field(default_factory=list)
    t_star: list[int] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    p_values: list[float] = field(default_factory=list)
    statistics: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def n_changepoints(self) -> int:
        return len(self.change_points)

    def to_dict(self) -> dict:
        return plain(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "ChangePointReport":
        return cls(**data)


def plain(obj):
    """Recursively convert numpy scalars and arrays to built-in types."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def theta_from_tstar(t_star: int, T: int, tau: int) -> int:
    """Change point implied by the diphoragram minimizer.

    At the minimizing window the share of pre-change points equals the
    share in the whole sample, ``(theta - t*) / tau = theta / T``, so
    ``theta = t* / (1 - tau / T)``. Rounded half-up and clipped to
    ``[tau, T - tau]``.
    """
    theta = _round_half_up(t_star / (1.0 - tau / T))
    return int(min(max(theta, tau), T - tau))


def single_changepoint_from_diphoragram(diph: Diphoragram) -> tuple[int, int]:
    if diph.n_windows < 2:
        raise ValueError(f"need T >= 2 tau, got T={diph.T}, tau={diph.tau}")
    # np.argmin returns the first minimizer: ties go to the earliest window
    t_star = int(np.argmin(diph.values)) + 1
    return t_star, theta_from_tstar(t_star, diph.T, diph.tau)


def _ensure_ranked(X, params: DetectionParams) -> RankedSample:
    if isinstance(X, RankedSample):
        return X
    return vector_ranks(X, solver=params.solver)


def uniformity_test(ranked, spec: KernelSpec, tau: int, params: DetectionParams, diph: Diphoragram | None = None):
    """Mean sliding discrepancy of ``ranked`` and its null-test decision."""
    if diph is None:
        diph = sliding_diphoragram(spec, ranked, tau)
    delta_bar = mean_sliding_discrepancy(diph)
    spectrum = params.spectrum
    if spectrum is None or spectrum.spec != spec:
        spectrum = nystrom_spectrum(spec, params.m, params.N)
    return diph, null_test(delta_bar, spectrum, params.null_params(diph.n_windows))


def detect_single(X, params: DetectionParams, method: str = "diphoragram") -> ChangePointReport:
    """Test for a change and, when one is found, locate it.

    The decision always comes from the mean sliding discrepancy of the
    vector ranks; ``method`` only selects how the location is estimated:
    diphoragram minimizer, maximal distance between the two sides, or the
    ratio fixed-point iteration.
    """
    if method not in ("diphoragram", "distance", "ratio"):
        raise ValueError(f"unknown single change-point method {method!r}")
    ranked = _ensure_ranked(X, params)
    T, tau = ranked.T, params.tau
    if T < 2 * tau:
        raise DataError(f"need at least 2 tau = {2 * tau} observations, got {T}")
    if T < 4 * tau:
        warnings.warn(f"T={T} < 4 tau: fewer than 4 disjoint windows, the test has little power", stacklevel=2)
    spec = params.kernel(ranked.d)
    diph, res = uniformity_test(ranked, spec, tau, params)
    t_star, theta = single_changepoint_from_diphoragram(diph)
    stats = {
        "delta_bar": res.statistic,
        "inverse_p_value": 1.0 - res.p_value,
        "min_diphoragram": float(diph.values.min()),
        "t_star_candidate": t_star,
        "theta_candidate": theta,
        "n_windows": diph.n_windows,
    }
    report = ChangePointReport(method=method, detected=res.reject, T=T, p_values=[res.p_value], statistics=stats)
    if method == "distance":
        theta = distance_estimate(ranked, spec, lo=tau, hi=T - tau)
        stats["theta_candidate"] = theta
    elif method == "ratio":
        r_hat, info = iterate_ratio(ranked, spec=spec, max_iter=params.n_iter)
        theta = int(min(max(_round_half_up(r_hat * T), 1), T - 1))
        stats.update(theta_candidate=theta, ratio_iterations=info["iterations"], ratio_converged=info["converged"])
        if info["degenerate"]:
            report.warnings.append("ratio iteration reached a degenerate split")
    if res.reject:
        report.change_points = [theta]
        report.t_star = [t_star] if method == "diphoragram" else []
        report.ratios = [theta / T]
    return report


# ---------------------------------------------------------------------------
# distance and ratio statistics


def _spec_for(ranked, spec: KernelSpec | None) -> KernelSpec:
    d = np.asarray(getattr(ranked, "Y", ranked)).shape[1]
    return KernelSpec("star", d) if spec is None else spec


def _split_handles(T: int, theta: int):
    if not TAU_MIN <= theta <= T - TAU_MIN:
        raise ValueError(f"split {theta} outside [{TAU_MIN}, {T - TAU_MIN}]")
    return EmpiricalMeasureHandle(1, theta), EmpiricalMeasureHandle(theta + 1, T)


def _side_inners(ranked, theta: int, spec: KernelSpec | None, blocks: GramBlocks | None):
    spec = _spec_for(ranked, spec)
    blocks = GramBlocks(spec, ranked) if blocks is None else blocks
    pre, post = _split_handles(blocks.T, theta)
    return blocks.inner(pre, pre), blocks.inner(pre, post), blocks.inner(post, post)


def distance_statistic(ranked, theta: int, spec: KernelSpec | None = None, blocks: GramBlocks | None = None) -> float:
    """Squared distance between the empirical measures before and after ``theta``."""
    pp, pq, qq = _side_inners(ranked, theta, spec, blocks)
    return pp - 2.0 * pq + qq


def distance_profile(ranked, spec: KernelSpec | None = None, unbiased: bool = True, blocks: GramBlocks | None = None):
    """``(splits, dist)`` for every split ``TAU_MIN <= s <= T - TAU_MIN``.

    With ``unbiased`` the diagonal kernel terms are removed from the two
    self inner products (U-statistic form), which keeps short sides from
    dominating through their ``trace / n`` bias.
    """
    spec = _spec_for(ranked, spec)
    blocks = GramBlocks(spec, ranked) if blocks is None else blocks
    s, pp, pq, qq = blocks.prefix_inner_arrays()
    T = blocks.T
    if unbiased:
        diag = np.diag(np.diff(np.diff(blocks._table, axis=0), axis=1))
        cdiag = np.cumsum(diag)
        n1 = s.astype(float)
        n2 = (T - s).astype(float)
        # single-point sides give 0/0 here; those splits are dropped below
        with np.errstate(invalid="ignore", divide="ignore"):
            pp = (pp * n1 * n1 - cdiag[s - 1]) / (n1 * (n1 - 1.0))
            qq = (qq * n2 * n2 - (cdiag[-1] - cdiag[s - 1])) / (n2 * (n2 - 1.0))
    keep = (s >= TAU_MIN) & (s <= T - TAU_MIN)
    return s[keep], (pp - 2.0 * pq + qq)[keep]


def distance_estimate(ranked, spec: KernelSpec | None = None, lo: int = TAU_MIN, hi: int | None = None) -> int:
    s, dist = distance_profile(ranked, spec)
    hi = s[-1] if hi is None else hi
    mask = (s >= lo) & (s <= hi)
    return int(s[mask][np.argmax(dist[mask])])


def _ratio_from_inners(pp: float, qq: float) -> float:
    n_pre, n_post = math.sqrt(max(pp, 0.0)), math.sqrt(max(qq, 0.0))
    if n_pre == 0.0 or n_post == 0.0:
        raise DegenerateMeasureError("an empirical measure has zero nonuniformity norm")
    return n_post / (n_pre + n_post)


def ratio_statistic(ranked, theta: int, spec: KernelSpec | None = None, blocks: GramBlocks | None = None) -> float:
    """``theta / T - |post| / (|pre| + |post|)`` with norms in the nonuniformity space."""
    pp, _, qq = _side_inners(ranked, theta, spec, blocks)
    T = np.asarray(getattr(ranked, "Y", ranked)).shape[0]
    return theta / T - _ratio_from_inners(pp, qq)


def ratio_profile(ranked, spec: KernelSpec | None = None, blocks: GramBlocks | None = None):
    spec = _spec_for(ranked, spec)
    blocks = GramBlocks(spec, ranked) if blocks is None else blocks
    s, pp, _, qq = blocks.prefix_inner_arrays()
    keep = (s >= TAU_MIN) & (s <= blocks.T - TAU_MIN)
    s, pp, qq = s[keep], np.sqrt(np.maximum(pp[keep], 0)), np.sqrt(np.maximum(qq[keep], 0))
    return s, s / blocks.T - qq / (pp + qq)


def iterate_ratio(ranked, spec: KernelSpec | None = None, tol: float = 1e-3, max_iter: int = 10, r0: float = 0.5):
    """Fixed-point iteration ``r <- |post(r)| / (|pre(r)| + |post(r)|)``.

    Returns ``(r, info)``; ``info`` records the iteration count, whether the
    step fell below ``tol``, and whether a degenerate split stopped it early
    (in which case ``r`` is the last valid iterate).
    """
    if max_iter < 1 or not tol > 0:
        raise ValueError("need max_iter >= 1 and tol > 0")
    spec = _spec_for(ranked, spec)
    blocks = GramBlocks(spec, ranked)
    T = blocks.T
    r = r0
    info = {"iterations": 0, "converged": False, "degenerate": False}
    for _ in range(max_iter):
        split = _round_half_up(r * T)
        if not 1 <= split <= T - 1:
            info["degenerate"] = True
            break
        pre, post = EmpiricalMeasureHandle(1, split), EmpiricalMeasureHandle(split + 1, T)
        try:
            r_new = _ratio_from_inners(blocks.inner(pre, pre), blocks.inner(post, post))
        except DegenerateMeasureError:
            info["degenerate"] = True
            break
        info["iterations"] += 1
        step = abs(r_new - r)
        r = r_new
        if step < tol:
            info["converged"] = True
            break
    return r, info


# ---------------------------------------------------------------------------
# multiple change points


def local_minimizers(diph: Diphoragram, K: int) -> list[int]:
    """Greedy minimizers: take the global argmin, drop its radius-``tau`` neighbourhood, repeat."""
    values = diph.values
    alive = np.ones(values.shape[0], dtype=bool)
    t = np.arange(1, values.shape[0] + 1)
    found = []
    for _ in range(K):
        if not alive.any():
            break
        idx = int(np.argmin(np.where(alive, values, np.inf)))
        found.append(idx + 1)
        alive &= np.abs(t - (idx + 1)) > diph.tau
    return found


def _segment_coefficient(blocks: GramBlocks, lo: int, mid: int, hi: int) -> float | None:
    # projection weight on the earlier segment of the origin onto [prev, next]
    if not (lo < mid < hi):
        return None
    prev = EmpiricalMeasureHandle(lo + 1, mid)
    nxt = EmpiricalMeasureHandle(mid + 1, hi)
    pp, pn, nn = blocks.inner(prev, prev), blocks.inner(prev, nxt), blocks.inner(nxt, nxt)
    d2 = pp - 2.0 * pn + nn
    if not d2 > 0:
        return None
    return min(max((nn - pn) / d2, 0.0), 1.0)


def multi_changepoints(ranked: RankedSample, K: int, params: DetectionParams, diph: Diphoragram | None = None) -> ChangePointReport:
    """``K`` change points from diphoragram minima with iterative readjustment.

    Blind estimates put each change point mid-window (``t* + tau/2``). Each
    round then moves it to ``t* + lambda * tau`` where ``lambda`` is the
    weight of the earlier segment in the projection of the origin onto the
    segment joining the empirical measures on either side of it (clamped to
    ``[0, 1]``), using the previous round's estimates and surrogate end
    points 0 and ``T``.
    """
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    T, tau = ranked.T, params.tau
    if K * tau >= T:
        raise ValueError(f"need K * tau < T, got K={K}, tau={tau}, T={T}")
    spec = params.kernel(ranked.d)
    if diph is None:
        diph = sliding_diphoragram(spec, ranked, tau)
    report = ChangePointReport(method="multi", detected=False, T=T)
    t_star = sorted(local_minimizers(diph, K))
    if len(t_star) < K:
        report.warnings.append(f"only {len(t_star)} separated minima available for K={K}")
    if not t_star:
        return report
    blind = [_round_half_up(t + tau / 2) for t in t_star]
    theta = list(blind)
    blocks = GramBlocks(spec, ranked)
    rounds = 0
    lambdas = [0.5] * len(theta)
    for _ in range(params.n_iter):
        bounds = [0] + theta + [T]
        new = []
        for k, t in enumerate(t_star):
            lam = _segment_coefficient(blocks, bounds[k], bounds[k + 1], bounds[k + 2])
            if lam is None:
                new.append(theta[k])
                continue
            lambdas[k] = lam
            new.append(min(max(_round_half_up(t + lam * tau), 1), T - 1))
        rounds += 1
        moved = max(abs(a - b) for a, b in zip(new, theta))
        theta = new
        if moved < 1:
            break
    theta = _strictly_ascending([min(max(th, 2), T - 1) for th in theta], T)
    report.change_points = theta
    report.t_star = t_star
    report.detected = bool(theta)
    report.ratios = list(np.diff([0] + theta) / T)
    report.statistics = {"blind_change_points": blind, "iterations": rounds, "projection_coefficients": lambdas}
    return report


def _strictly_ascending(points: list[int], T: int) -> list[int]:
    out: list[int] = []
    for p in sorted(points):
        if out and p <= out[-1]:
            p = out[-1] + 1
        if p < T:
            out.append(p)
    return out


def segment_test(X: np.ndarray, params: DetectionParams) -> dict:
    """Re-rank one segment on its own and test it for uniformity.

    Segments shorter than ``2 tau`` are tested with two half-length windows;
    segments too short for that (under 4 points) are accepted untested.
    """
    n = X.shape[0]
    tau = params.tau if n >= 2 * params.tau else n // 2
    if tau < 2:
        return {"length": n, "tau": tau, "p_value": None, "reject": False}
    ranked = vector_ranks(X, solver=params.solver)
    spec = params.kernel(ranked.d)
    diph, res = uniformity_test(ranked, spec, tau, params)
    return {"length": n, "tau": tau, "p_value": res.p_value, "reject": res.reject, "delta_bar": res.statistic}


def sma_estimate(ranked: RankedSample, params: DetectionParams) -> ChangePointReport:
    """Smallest accepted model over ``K = 0, 1, ..., k_max``.

    For each ``K`` the change points from :func:`multi_changepoints` cut the
    sample into ``K + 1`` segments; each segment is re-ranked and tested, and
    the first ``K`` for which no segment rejects uniformity is returned.
    """
    T, tau = ranked.T, params.tau
    k_max = min(params.k_max, (T - 1) // tau)
    notes = []
    if k_max < params.k_max:
        notes.append(f"k_max lowered from {params.k_max} to {k_max} so that k_max * tau < T")
    spec = params.kernel(ranked.d)
    diph = sliding_diphoragram(spec, ranked, tau)
    tried = []
    last = None
    for k in range(k_max + 1):
        if k == 0:
            model = ChangePointReport(method="sma", detected=False, T=T)
        else:
            model = multi_changepoints(ranked, k, params, diph=diph)
            if model.n_changepoints < k:
                break
        bounds = [0] + model.change_points + [T]
        segments = [segment_test(ranked.X[lo:hi], params) for lo, hi in zip(bounds[:-1], bounds[1:])]
        accepted = not any(s["reject"] for s in segments)
        tried.append({"K": k, "accepted": accepted, "p_values": [s["p_value"] for s in segments]})
        last = (model, segments, accepted)
        if accepted:
            break
    model, segments, accepted = last
    report = replace(
        model,
        method="sma",
        detected=model.n_changepoints > 0,
        p_values=[s["p_value"] for s in segments],
        warnings=notes + list(model.warnings),
    )
    report.statistics = dict(model.statistics, K_hat=model.n_changepoints, accepted=accepted, models=tried)
    if not accepted:
        report.warnings.append(f"no model with K <= {tried[-1]['K']} was accepted")
    return report


def detect(X, params: DetectionParams, method: str = "diphoragram") -> ChangePointReport:
    """Dispatch on ``method``; ``"sma"`` runs the smallest-accepted-model search."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "sma":
        ranked = _ensure_ranked(X, params)
        if ranked.T < 2 * params.tau:
            raise DataError(f"need at least 2 tau = {2 * params.tau} observations, got {ranked.T}")
        return sma_estimate(ranked, params)
    return detect_single(X, params, method=method)
