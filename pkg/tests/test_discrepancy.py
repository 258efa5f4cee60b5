import time

import numpy as np
import pytest
from scipy import stats

from rankdisc.discrepancy import (
    GramBlocks,
    EmpiricalMeasureHandle,
    mean_sliding_discrepancy,
    nonuniformity_inner,
    sliding_diphoragram,
    squared_discrepancy,
    squared_discrepancy_threeterm,
    window_discrepancy,
)
from rankdisc.kernels import KernelSpec, gram_matrix
from rankdisc.lds import sobol_prefix
from rankdisc.nulldist import nystrom_spectrum
from rankdisc.transport import vector_ranks

FAMILIES = ["star", "centered"]


def test_single_point_value():
    assert squared_discrepancy(KernelSpec("centered", 1), [[0.5]]) == pytest.approx(1 / 12, abs=1e-15)


@pytest.mark.parametrize("family", FAMILIES)
def test_threeterm_form_agrees(family, rng):
    spec = KernelSpec(family, 3)
    pts = rng.random((50, 3))
    assert squared_discrepancy(spec, pts) == pytest.approx(squared_discrepancy_threeterm(spec, pts), abs=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
def test_gram_sum_is_discrepancy(family, rng):
    spec = KernelSpec(family, 2)
    pts = rng.random((40, 2))
    assert gram_matrix(spec, pts).sum() / 40 ** 2 == pytest.approx(squared_discrepancy(spec, pts), abs=1e-14)


def test_chunked_path_matches(monkeypatch, rng):
    import rankdisc.discrepancy as disc

    spec = KernelSpec("star", 2)
    pts = rng.random((300, 2))
    full = squared_discrepancy(spec, pts)
    monkeypatch.setattr(disc, "GRAM_LIMIT", 100)
    assert squared_discrepancy(spec, pts) == pytest.approx(full, rel=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
def test_sobol_prefix_decay(family):
    spec = KernelSpec(family, 2)
    vals = [squared_discrepancy(spec, sobol_prefix(n, 2)) for n in (16, 64, 256)]
    assert vals[0] > vals[1] > vals[2]


def test_star_decay_on_sobol_d1():
    spec = KernelSpec("star", 1)
    vals = np.array([squared_discrepancy(spec, np.sort(sobol_prefix(2 ** k, 1), axis=0)) for k in range(1, 10)])
    assert np.all(np.diff(vals) < 0)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("tau", [2, 7, 25])
def test_incremental_matches_direct(family, tau, rng):
    spec = KernelSpec(family, 3)
    y = rng.random((150, 3))
    diph = sliding_diphoragram(spec, y, tau)
    assert len(diph) == 150 - tau + 1
    direct = np.array([window_discrepancy(spec, y, t, tau) for t in diph.times])
    assert np.max(np.abs(diph.values - direct)) < 1e-9
    assert diph.values.min() >= -1e-9


def test_whole_sample_window():
    spec = KernelSpec("star", 2)
    y = sobol_prefix(32, 2)
    diph = sliding_diphoragram(spec, y, 32)
    assert len(diph) == 1
    assert diph.at(1) == pytest.approx(squared_discrepancy(spec, y), abs=1e-14)


def test_accepts_ranked_sample(rng):
    ranked = vector_ranks(rng.normal(size=(80, 2)))
    spec = KernelSpec("star", 2)
    np.testing.assert_array_equal(sliding_diphoragram(spec, ranked, 10).values, sliding_diphoragram(spec, ranked.Y, 10).values)


def test_uniform_data_has_small_flat_diphoragram(rng):
    spec = KernelSpec("star", 5)
    ranked = vector_ranks(rng.random((1000, 5)))
    diph = sliding_diphoragram(spec, ranked, 100)
    trace = nystrom_spectrum(spec).trace
    # tau * Delta_t has expectation of order trace under uniformity
    assert np.all(100 * diph.values < 5 * trace)
    assert diph.values.min() > 0.2 * np.median(diph.values)


@pytest.mark.parametrize("tau", [2, 5, 30])
def test_bad_bandwidth(tau):
    with pytest.raises(ValueError):
        sliding_diphoragram(KernelSpec("star", 1), np.random.default_rng(0).random((tau - 1 if tau > 2 else 1, 1)), tau)


def test_mean_sliding_equal_windows():
    spec = KernelSpec("star", 1)
    y = np.concatenate([sobol_prefix(8, 1), sobol_prefix(8, 1)])
    diph = sliding_diphoragram(spec, y, 8)
    c = diph.at(1)
    assert diph.at(9) == pytest.approx(c, abs=1e-15)
    assert mean_sliding_discrepancy(diph) == pytest.approx(8 * c, rel=1e-12)


def test_mean_sliding_drops_ragged_tail(rng):
    spec = KernelSpec("star", 2)
    y = rng.random((70, 2))
    diph = sliding_diphoragram(spec, y, 20)
    expected = 20 * np.mean([diph.at(1), diph.at(21), diph.at(41)])
    assert mean_sliding_discrepancy(diph) == pytest.approx(expected, rel=1e-12)
    assert mean_sliding_discrepancy(diph) >= 0


def test_mean_sliding_needs_two_windows(rng):
    diph = sliding_diphoragram(KernelSpec("star", 1), rng.random((30, 1)), 20)
    with pytest.raises(ValueError):
        mean_sliding_discrepancy(diph)


@pytest.mark.slow
def test_mean_sliding_matches_limit_law():
    d, T, tau, reps = 3, 600, 30, 500
    spec = KernelSpec("star", d)
    rng = np.random.default_rng(7)
    sample = np.array([mean_sliding_discrepancy(sliding_diphoragram(spec, rng.random((T, d)), tau)) for _ in range(reps)])
    # full Nystrom spectrum, no truncation, as the limit-law oracle
    lam = np.linalg.eigvalsh(gram_matrix(spec, sobol_prefix(1024, d)) / 1024)
    lam = lam[lam > 1e-12]
    a = T // tau
    mc = (rng.standard_normal((200_000, lam.size)) ** 2) @ lam
    mc = mc[: 200_000 // a * a]
    mc = mc.reshape(-1, a).mean(axis=1)
    assert stats.ks_2samp(sample, mc).statistic <= 0.08


@pytest.mark.parametrize("family", FAMILIES)
def test_inner_product_properties(family, rng):
    spec = KernelSpec(family, 2)
    y = rng.random((60, 2))
    full = EmpiricalMeasureHandle(11, 40)
    assert nonuniformity_inner(spec, full, full, y) == pytest.approx(squared_discrepancy(spec, y[10:40]), abs=1e-14)
    blocks = GramBlocks(spec, y)
    for _ in range(20):
        lo1, lo2 = rng.integers(1, 50, size=2)
        a = EmpiricalMeasureHandle(int(lo1), int(lo1 + rng.integers(0, 10)))
        b = EmpiricalMeasureHandle(int(lo2), int(lo2 + rng.integers(0, 10)))
        ab, ba = nonuniformity_inner(spec, a, b, y), nonuniformity_inner(spec, b, a, y)
        assert ab == pytest.approx(ba, abs=1e-14)
        aa, bb = nonuniformity_inner(spec, a, a, y), nonuniformity_inner(spec, b, b, y)
        assert ab * ab <= aa * bb + 1e-14
        assert blocks.inner(a, b) == pytest.approx(ab, abs=1e-12)


def test_prefix_inner_arrays(rng):
    spec = KernelSpec("star", 2)
    y = rng.random((25, 2))
    s, pp, pq, qq = GramBlocks(spec, y).prefix_inner_arrays()
    for k in (1, 7, 24):
        pre, post = EmpiricalMeasureHandle(1, k), EmpiricalMeasureHandle(k + 1, 25)
        i = k - 1
        assert pp[i] == pytest.approx(nonuniformity_inner(spec, pre, pre, y), abs=1e-12)
        assert pq[i] == pytest.approx(nonuniformity_inner(spec, pre, post, y), abs=1e-12)
        assert qq[i] == pytest.approx(nonuniformity_inner(spec, post, post, y), abs=1e-12)


def test_handle_validation():
    with pytest.raises(ValueError):
        EmpiricalMeasureHandle(0, 3)
    with pytest.raises(ValueError):
        EmpiricalMeasureHandle(5, 4)
    assert EmpiricalMeasureHandle(3, 7).size == 5


@pytest.mark.slow
def test_runtime_scaling_near_quadratic(rng):
    spec = KernelSpec("star", 3)

    def timed(T):
        y = rng.random((T, 3))
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            sliding_diphoragram(spec, y, T // 10)
            best = min(best, time.perf_counter() - t0)
        return best

    ratio = timed(8000) / timed(4000)
    assert 2.0 <= ratio <= 6.0
