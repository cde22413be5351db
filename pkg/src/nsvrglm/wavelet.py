"""Orthonormal periodic discrete wavelet transform and wavelet Hurst estimation.

The transform works along the last axis, so a (V, T) matrix of vertex series
is decomposed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

__all__ = [
    "FILTERS",
    "WaveletDecomposition",
    "daubechies_filter",
    "wavelet_filters",
    "dwt",
    "idwt",
    "pad_to_pow2",
    "level_variances",
    "estimate_hurst_slope",
]

#: Supported filter ids mapped to their number of vanishing moments.
FILTERS = {"haar": 1, "db2": 2, "db3": 3, "db4": 4, "db6": 6}


@lru_cache(maxsize=None)
def daubechies_filter(moments: int) -> tuple:
    """Minimum-phase Daubechies scaling filter with ``moments`` vanishing moments.

    Built by spectral factorisation of the Daubechies polynomial
    ``P(y) = sum_k C(p-1+k, k) y^k`` with ``y = (2 - z - 1/z) / 4``; roots
    inside the unit circle are kept.  The filter is normalised so that its
    taps sum to sqrt(2).
    """
    p = int(moments)
    if p < 1:
        raise ValueError("moments must be >= 1")
    if p == 1:
        return (1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0))
    # numpy.roots wants the highest power first
    poly_y = [comb(p - 1 + k, k) for k in range(p)][::-1]
    z_roots = []
    for y in np.roots(poly_y):
        # z^2 - (2 - 4y) z + 1 = 0, roots are reciprocal
        b = 2.0 - 4.0 * y
        disc = np.sqrt(b * b - 4.0 + 0j)
        z1, z2 = (b + disc) / 2.0, (b - disc) / 2.0
        z_roots.append(z1 if abs(z1) < 1.0 else z2)
    poly = np.poly(np.concatenate([-np.ones(p), np.asarray(z_roots)]))
    h = np.real(poly)
    h = h * np.sqrt(2.0) / h.sum()
    return tuple(float(c) for c in h)


def wavelet_filters(filter_id: str = "db4") -> tuple[np.ndarray, np.ndarray]:
    """Return the (lowpass, highpass) analysis filters for ``filter_id``."""
    try:
        moments = FILTERS[filter_id]
    except KeyError:
        raise ValueError(
            f"unknown filter {filter_id!r}; choose one of {sorted(FILTERS)}"
        ) from None
    h = np.asarray(daubechies_filter(moments))
    # quadrature mirror: g_k = (-1)^k h_{L-1-k}
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return h, g


@dataclass
class WaveletDecomposition:
    """Detail coefficients for levels 1..J and approximation at level J.

    ``detail[j - 1]`` holds level ``j`` (finest first).  Leading axes of the
    coefficient arrays are batch axes (e.g. one row per vertex).
    """

    detail: list
    approx: np.ndarray
    filter_id: str
    original_length: int

    @property
    def levels(self) -> int:
        return len(self.detail)

    def coefficients(self) -> np.ndarray:
        """All coefficients concatenated along the last axis (finest level first)."""
        return np.concatenate(list(self.detail) + [self.approx], axis=-1)

    def level_index(self) -> np.ndarray:
        """Level label of every entry of :meth:`coefficients`; ``J + 1`` marks approximation."""
        labels = [np.full(d.shape[-1], j + 1) for j, d in enumerate(self.detail)]
        labels.append(np.full(self.approx.shape[-1], self.levels + 1))
        return np.concatenate(labels)


def _log2_exact(n: int) -> int:
    m = int(n).bit_length() - 1
    if n < 1 or (1 << m) != n:
        raise ValueError(f"series length {n} is not a power of two")
    return m


def _analysis_step(x, h, g):
    n = x.shape[-1]
    k2 = 2 * np.arange(n // 2)
    a = np.zeros(x.shape[:-1] + (n // 2,))
    d = np.zeros_like(a)
    for tap, (hc, gc) in enumerate(zip(h, g)):
        xs = x[..., (k2 + tap) % n]
        a += hc * xs
        d += gc * xs
    return a, d


def _synthesis_step(a, d, h, g):
    half = a.shape[-1]
    n = 2 * half
    k2 = 2 * np.arange(half)
    x = np.zeros(a.shape[:-1] + (n,))
    for tap, (hc, gc) in enumerate(zip(h, g)):
        # (2k + tap) mod n is a permutation-free index set for fixed tap
        x[..., (k2 + tap) % n] += hc * a + gc * d
    return x


def dwt(series, levels: int, filter_id: str = "db4") -> WaveletDecomposition:
    """Pyramid DWT with periodic boundary handling.

    Parameters
    ----------
    series : array_like, shape (..., n)
        Input with ``n = 2**m`` samples along the last axis.
    levels : int
        Number of decomposition levels, ``1 <= levels <= m``.
    filter_id : str
        One of :data:`FILTERS`.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[-1]
    m = _log2_exact(n)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if levels > m:
        raise ValueError(f"levels={levels} exceeds log2(length)={m}")
    h, g = wavelet_filters(filter_id)
    details = []
    a = x
    for _ in range(levels):
        a, d = _analysis_step(a, h, g)
        details.append(d)
    return WaveletDecomposition(detail=details, approx=a, filter_id=filter_id,
                                original_length=n)


def idwt(decomp: WaveletDecomposition) -> np.ndarray:
    """Invert :func:`dwt`."""
    n = decomp.original_length
    a = np.asarray(decomp.approx, dtype=float)
    expected = n >> decomp.levels
    if a.shape[-1] != expected:
        raise ValueError(
            f"approximation length {a.shape[-1]} does not match {expected}"
        )
    h, g = wavelet_filters(decomp.filter_id)
    for j in range(decomp.levels, 0, -1):
        d = np.asarray(decomp.detail[j - 1], dtype=float)
        if d.shape[-1] != n >> j:
            raise ValueError(f"detail level {j} has length {d.shape[-1]}, expected {n >> j}")
        a = _synthesis_step(a, d, h, g)
    return a


def pad_to_pow2(series) -> tuple[np.ndarray, int]:
    """Reflect ``series`` about its last sample up to the next power of two.

    The boundary sample is repeated (half-sample symmetric reflection), so
    ``[a, b, c]`` becomes ``[a, b, c, c]``.  Works along the last axis.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[-1]
    if n == 0:
        raise ValueError("cannot pad an empty series")
    target = 1 << (n - 1).bit_length()
    if target == n:
        return x.copy(), n
    if target - n > n:
        # reflection repeated as often as needed
        reps = int(np.ceil(target / (2 * n)))
        cycle = np.concatenate([x, x[..., ::-1]], axis=-1)
        return np.tile(cycle, reps)[..., :target].copy(), n
    return np.concatenate([x, x[..., ::-1][..., : target - n]], axis=-1), n


def level_variances(decomp: WaveletDecomposition) -> np.ndarray:
    """Unbiased sample variance of each detail level, shape (..., J)."""
    out = []
    for d in decomp.detail:
        if d.shape[-1] < 2:
            out.append(np.full(d.shape[:-1], np.nan))
        else:
            out.append(np.var(d, axis=-1, ddof=1))
    return np.stack(out, axis=-1)


def estimate_hurst_slope(decomp: WaveletDecomposition, min_coeffs: int = 16):
    """Hurst estimate from the slope of log2 detail variance against level.

    Only levels holding at least ``min_coeffs`` coefficients enter the
    least-squares fit.  Batched input yields batched output.

    Returns
    -------
    hurst : float or ndarray
        ``(gamma + 1) / 2`` clipped to ``[0.01, 0.99]``.
    gamma : float or ndarray
        Fitted slope.
    """
    levels = [j + 1 for j, d in enumerate(decomp.detail) if d.shape[-1] >= min_coeffs]
    if len(levels) < 2:
        raise ValueError(
            f"need at least two levels with >= {min_coeffs} coefficients, got {len(levels)}"
        )
    var = level_variances(decomp)[..., [j - 1 for j in levels]]
    with np.errstate(divide="ignore"):
        logv = np.log2(var)
    j = np.asarray(levels, dtype=float)
    jc = j - j.mean()
    gamma = (logv - logv.mean(axis=-1, keepdims=True)) @ jc / (jc @ jc)
    hurst = np.clip((gamma + 1.0) / 2.0, 0.01, 0.99)
    if np.ndim(hurst) == 0:
        return float(hurst), float(gamma)
    return hurst, gamma
