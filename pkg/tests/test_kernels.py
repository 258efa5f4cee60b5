import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from rankdisc.kernels import (
    KernelSpec,
    bernoulli_poly,
    centered_kernel,
    eta,
    eta_mean,
    gram_matrix,
    kappa,
    scale_constant,
)

FAMILIES = ["star", "centered"]
unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False)


# independent reference implementation of the one-dimensional factor
def _ref_kappa(family, x):
    if family == "star":
        return 1.0 / 6.0 - x * x / 2.0
    u = (x - 0.5) % 1.0
    return -0.5 * (u * u - u + 1.0 / 6.0)


def _ref_factor(family, beta, x, y):
    m = 1.0 - beta ** 2 * (1.0 / 3.0 if family == "star" else 1.0 / 12.0)
    g = (x - y) % 1.0
    return m + beta ** 2 * (
        _ref_kappa(family, x) + _ref_kappa(family, y) + 0.5 * (g * g - g + 1.0 / 6.0) + (x - 0.5) * (y - 0.5)
    )


@functools.lru_cache(maxsize=None)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def _gauss_pieces(breaks, n):
    """Gauss-Legendre nodes and weights on [0, 1] split at ``breaks``."""
    t, w = _leggauss(n)
    edges = np.unique(np.concatenate([[0.0], np.asarray(breaks, dtype=float), [1.0]]))
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(a + (b - a) * (t + 1) / 2)
        weights.append(w * (b - a) / 2)
    return np.concatenate(nodes), np.concatenate(weights)


def _ref_mean_1d(family, beta, y):
    z, w = _gauss_pieces([y, 0.5], 20)
    return float(w @ _ref_factor(family, beta, z, y))


def _ref_double_mean_1d(family, beta):
    val, _ = integrate.quad(lambda y: _ref_mean_1d(family, beta, y), 0, 1, points=[0.5], epsabs=1e-13)
    return val


@pytest.mark.parametrize("order,x,expected", [(1, 0.5, 0.0), (2, 0.0, 1 / 6), (2, 0.5, -1 / 12), (1, 0.0, -0.5)])
def test_bernoulli_values(order, x, expected):
    assert bernoulli_poly(order, x) == pytest.approx(expected, abs=1e-15)


def test_bernoulli_rejects_other_orders():
    with pytest.raises(ValueError):
        bernoulli_poly(3, 0.2)


def test_kappa_values():
    assert kappa("centered", 0.5) == pytest.approx(-1 / 12, abs=1e-15)
    assert kappa("star", 0.0) == pytest.approx(1 / 6, abs=1e-15)


@pytest.mark.parametrize("family", FAMILIES)
def test_kappa_integrates_to_zero(family):
    val, _ = integrate.quad(lambda x: float(kappa(family, x)), 0, 1, points=[0.5])
    assert abs(val) < 1e-12


@pytest.mark.parametrize("family,expected", [("star", 2 / 3), ("centered", 11 / 12)])
def test_scale_constant_defaults(family, expected):
    assert abs(scale_constant(family, 1.0) - expected) < 1e-10


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("beta", [0.3, 1.0, 1.5])
def test_scale_constant_matches_numeric_integral(family, beta):
    # complex-step derivative of each polynomial piece of kappa
    def piece(x, shift):
        if family == "star":
            return 1.0 / 6.0 - x * x / 2.0
        u = x + shift
        return -0.5 * (u * u - u + 1.0 / 6.0)

    h = 1e-20
    total = 0.0
    for a, b, shift in [(0.0, 0.5, 0.5), (0.5, 1.0, -0.5)]:
        val, _ = integrate.quad(lambda x: (piece(x + 1j * h, shift).imag / h) ** 2, a, b, epsabs=1e-15)
        total += val
    assert abs(scale_constant(family, beta) - (1 - beta ** 2 * total)) < 1e-10


@pytest.mark.parametrize("family", FAMILIES)
def test_scale_constant_small_beta_limit(family):
    assert scale_constant(family, 1e-9) == pytest.approx(1.0, abs=1e-15)


def test_spec_is_immutable_and_derives_m():
    spec = KernelSpec("centered", 2, 1.0)
    assert spec.M == pytest.approx(11 / 12)
    with pytest.raises(AttributeError):
        spec.beta = 2.0
    assert spec.with_dimension(5).M == spec.M


def test_eta_centered_midpoint():
    spec = KernelSpec("centered", 1, 1.0)
    assert eta(spec, [0.5], [0.5]) == pytest.approx(5 / 6, abs=1e-14)
    assert centered_kernel(spec, [0.5], [0.5]) == pytest.approx(1 / 12, abs=1e-14)


@pytest.mark.parametrize("family", FAMILIES)
@given(x=unit, y=unit, z=unit, w=unit)
@settings(max_examples=60, deadline=None)
def test_eta_symmetric_and_product(family, x, y, z, w):
    s2, s1 = KernelSpec(family, 2), KernelSpec(family, 1)
    assert eta(s2, [x, z], [y, w]) == eta(s2, [y, w], [x, z])
    assert centered_kernel(s2, [x, z], [y, w]) == centered_kernel(s2, [y, w], [x, z])
    assert eta(s2, [x, z], [y, w]) == pytest.approx(eta(s1, [x], [y]) * eta(s1, [z], [w]), rel=1e-13)
    assert float(eta(s1, [x], [y])) == pytest.approx(_ref_factor(family, 1.0, x, y), abs=1e-14)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("beta", [1.0, 0.7])
def test_closed_form_matches_quadrature_d1(family, beta):
    spec = KernelSpec(family, 1, beta)
    grid = (np.arange(200) + 0.5) / 200
    total = _ref_double_mean_1d(family, beta)
    means = np.array([_ref_mean_1d(family, beta, g) for g in grid])
    ref = _ref_factor(family, beta, grid[:, None], grid[None, :]) - means[:, None] - means[None, :] + total
    got = gram_matrix(spec, grid[:, None])
    assert np.max(np.abs(got - ref)) < 1e-6


@pytest.mark.parametrize("family", FAMILIES)
def test_closed_form_matches_quadrature_d2(family, rng):
    spec = KernelSpec(family, 2)
    total = _ref_double_mean_1d(family, 1.0) ** 2
    pts = rng.random((200, 2))
    for x, y in zip(pts[:100], pts[100:]):
        # two-dimensional integral over z on a grid split at y's coordinates
        z1, w1 = _gauss_pieces([y[0], 0.5], 12)
        z2, w2 = _gauss_pieces([y[1], 0.5], 12)
        Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
        W = np.outer(w1, w2)
        mean_y = float((W * _ref_factor(family, 1.0, Z1, y[0]) * _ref_factor(family, 1.0, Z2, y[1])).sum())
        z1, w1 = _gauss_pieces([x[0], 0.5], 12)
        z2, w2 = _gauss_pieces([x[1], 0.5], 12)
        Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
        W = np.outer(w1, w2)
        mean_x = float((W * _ref_factor(family, 1.0, Z1, x[0]) * _ref_factor(family, 1.0, Z2, x[1])).sum())
        eta_xy = _ref_factor(family, 1.0, x[0], y[0]) * _ref_factor(family, 1.0, x[1], y[1])
        ref = eta_xy - mean_x - mean_y + total
        assert abs(float(centered_kernel(spec, x, y)) - ref) < 1e-6


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("y", [0.0, 0.13, 0.5, 0.77])
def test_centered_kernel_integrates_to_zero_d1(family, y):
    spec = KernelSpec(family, 1)
    x, w = _gauss_pieces([y, 0.5], 3334)  # 10^4 nodes
    assert abs(float(w @ centered_kernel(spec, x[:, None], np.array([y])))) < 1e-8


@pytest.mark.parametrize("family", FAMILIES)
def test_centered_kernel_integrates_to_zero_d2(family, rng):
    spec = KernelSpec(family, 2)
    for y in rng.random((5, 2)):
        z1, w1 = _gauss_pieces([y[0], 0.5], 34)
        z2, w2 = _gauss_pieces([y[1], 0.5], 34)
        Z = np.stack(np.meshgrid(z1, z2, indexing="ij"), axis=-1).reshape(-1, 2)
        W = np.outer(w1, w2).ravel()
        assert abs(float(W @ centered_kernel(spec, Z, y))) < 1e-8


@pytest.mark.parametrize("family", FAMILIES)
def test_eta_mean_matches_quadrature(family, rng):
    spec = KernelSpec(family, 1)
    for y in rng.random(10):
        assert float(eta_mean(spec, [y])) == pytest.approx(_ref_mean_1d(family, 1.0, y), abs=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("d", [1, 3, 6])
def test_gram_is_symmetric_psd(family, d, rng):
    spec = KernelSpec(family, d)
    pts = rng.random((50, d))
    g = gram_matrix(spec, pts)
    assert np.array_equal(g, g.T)
    assert np.linalg.eigvalsh(g).min() >= -1e-9
    np.testing.assert_allclose(g, centered_kernel(spec, pts[:, None, :], pts[None, :, :]), atol=1e-13)


def test_gram_single_point():
    np.testing.assert_allclose(gram_matrix(KernelSpec("centered", 1), [[0.5]]), [[1 / 12]], atol=1e-15)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        eta(KernelSpec("star", 2), [0.1, 0.2, 0.3], [0.1, 0.2, 0.3])


@pytest.mark.parametrize("bad", [dict(family="triangle"), dict(d=0), dict(beta=0.0)])
def test_invalid_spec(bad):
    with pytest.raises(ValueError):
        KernelSpec(**bad)
