import numpy as np
import pytest
import pywt
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsvrglm.wavelet import (FILTERS, WaveletDecomposition, daubechies_filter, dwt,
                             estimate_hurst_slope, idwt, level_variances, pad_to_pow2,
                             wavelet_filters)


@pytest.mark.parametrize("fid", ["haar", "db2", "db3", "db4", "db6"])
def test_scaling_filter_matches_pywavelets(fid):
    ref = "db1" if fid == "haar" else fid
    h, g = wavelet_filters(fid)
    w = pywt.Wavelet(ref)
    np.testing.assert_allclose(h, w.rec_lo, atol=1e-12)
    np.testing.assert_allclose(g, w.rec_hi, atol=1e-12)


def test_db2_closed_form():
    s3 = np.sqrt(3.0)
    expected = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * np.sqrt(2.0))
    np.testing.assert_allclose(daubechies_filter(2), expected, atol=1e-14)


@pytest.mark.parametrize("p", [1, 2, 4, 6])
def test_filter_orthonormality(p):
    h = np.asarray(daubechies_filter(p))
    assert h.sum() == pytest.approx(np.sqrt(2.0))
    for shift in range(0, len(h), 2):
        dot = h[shift:] @ h[:len(h) - shift]
        assert dot == pytest.approx(1.0 if shift == 0 else 0.0, abs=1e-12)


def test_unknown_filter():
    with pytest.raises((KeyError, ValueError)):
        wavelet_filters("sym4")


def test_haar_kills_constants():
    d = dwt(np.full(64, 3.7), 4, "haar")
    for lev in d.detail:
        np.testing.assert_allclose(lev, 0.0, atol=1e-13)


def test_db4_kills_cubics():
    # four vanishing moments; periodic wrap only touches the edges
    t = np.arange(256, dtype=float)
    d = dwt(1 + t - 0.01 * t ** 2 + 1e-5 * t ** 3, 1, "db4")
    assert np.abs(d.detail[0][5:-5]).max() < 1e-8


@settings(max_examples=40, deadline=None)
@given(x=arrays(np.float64, st.sampled_from([8, 32, 128]),
                elements=st.floats(-1e3, 1e3, allow_nan=False)),
       fid=st.sampled_from(sorted(FILTERS)))
def test_perfect_reconstruction_and_parseval(x, fid):
    levels = int(np.log2(x.size))
    d = dwt(x, levels, fid)
    scale = max(1.0, np.abs(x).max())
    assert np.abs(idwt(d) - x).max() < 1e-10 * scale
    assert abs(np.sum(d.coefficients() ** 2) - np.sum(x ** 2)) <= 1e-10 * max(1.0, np.sum(x ** 2))


def test_batched_transform_matches_rowwise(rng):
    X = rng.standard_normal((5, 64))
    D = dwt(X, 3)
    for i in range(5):
        di = dwt(X[i], 3)
        np.testing.assert_allclose(D.coefficients()[i], di.coefficients(), atol=1e-14)


def test_zero_decomposition_gives_zero_series():
    d = WaveletDecomposition(detail=[np.zeros(16), np.zeros(8)], approx=np.zeros(8),
                             filter_id="db4", original_length=32)
    np.testing.assert_array_equal(idwt(d), np.zeros(32))


def test_unit_coefficient_gives_unit_norm_basis_vector():
    n = 64
    vecs = []
    for level, pos in [(1, 3), (2, 0), (3, 5)]:
        detail = [np.zeros(n >> j) for j in range(1, 4)]
        detail[level - 1][pos] = 1.0
        b = idwt(WaveletDecomposition(detail, np.zeros(n >> 3), "db4", n))
        assert np.linalg.norm(b) == pytest.approx(1.0, abs=1e-12)
        vecs.append(b)
    gram = np.array(vecs) @ np.array(vecs).T
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-12)


def test_level_bounds():
    with pytest.raises(ValueError):
        dwt(np.zeros(16), 5)
    with pytest.raises(ValueError):
        dwt(np.zeros(16), 0)
    with pytest.raises(ValueError):
        dwt(np.zeros(12), 1)


def test_pad_power_of_two_unchanged(rng):
    x = rng.standard_normal(512)
    y, n = pad_to_pow2(x)
    assert n == 512
    np.testing.assert_array_equal(x, y)


def test_pad_401_to_512(rng):
    x = rng.standard_normal(401)
    y, n = pad_to_pow2(x)
    assert (y.size, n) == (512, 401)
    np.testing.assert_array_equal(y[:401], x)
    np.testing.assert_array_equal(y[401:], x[::-1][:111])


def test_pad_three_reflects():
    y, _ = pad_to_pow2(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(y, [1.0, 2.0, 3.0, 3.0])


def test_pad_short_series_repeats_reflection():
    y, _ = pad_to_pow2(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
    np.testing.assert_array_equal(y, [1, 2, 3, 4, 5, 5, 4, 3])
    y, _ = pad_to_pow2(np.array([7.0]))
    np.testing.assert_array_equal(y, [7.0])


def test_level_variances_shape(rng):
    d = dwt(rng.standard_normal((3, 64)), 4)
    assert level_variances(d).shape == (3, 4)


def _synthetic_decomposition(gamma, levels=6, n=1024):
    # detail level j holds +-a_j with sample variance exactly 2^(gamma j)
    detail = []
    for j in range(1, levels + 1):
        m = n >> j
        pattern = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
        a = np.sqrt(2.0 ** (gamma * j) * (m - 1) / m)
        detail.append(a * pattern)
    return WaveletDecomposition(detail, np.zeros(n >> levels), "db4", n)


@pytest.mark.parametrize("h", [0.3, 0.5, 0.8])
def test_slope_exact_on_synthetic_variances(h):
    est, gamma = estimate_hurst_slope(_synthetic_decomposition(2 * h - 1))
    assert est == pytest.approx(h, abs=1e-10)
    assert gamma == pytest.approx(2 * h - 1, abs=1e-10)


def test_slope_needs_two_levels():
    with pytest.raises(ValueError):
        estimate_hurst_slope(dwt(np.zeros(32), 1), min_coeffs=16)


@pytest.mark.parametrize("h, lo, hi", [(0.5, 0.45, 0.55), (0.8, 0.72, 0.88)])
def test_slope_estimator_on_simulated_fgn(h, lo, hi):
    from nsvrglm.fgn import FgnSpec, simulate_fgn

    x = simulate_fgn(FgnSpec(h), 1024, seed=99, size=100)
    est, _ = estimate_hurst_slope(dwt(x, 6), min_coeffs=16)
    assert lo <= est.mean() <= hi
