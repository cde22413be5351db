"""Fractional Gaussian noise: autocovariance, exact simulation, wavelet variances."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import gammaln

logger = logging.getLogger(__name__)

__all__ = [
    "FgnSpec",
    "fgn_autocovariance",
    "simulate_fgn",
    "wavelet_level_variance",
    "wavelet_variance_profile",
]


@dataclass(frozen=True)
class FgnSpec:
    """Hurst parameter and marginal variance of an fGn process."""

    hurst: float
    variance: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst}")
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    @property
    def gamma(self) -> float:
        return 2.0 * self.hurst - 1.0

    @property
    def c_gamma(self) -> float:
        h = self.hurst
        return (2.0 * math.pi) ** (-2.0 * h) * math.sin(math.pi * h) * math.gamma(2.0 * h + 1.0)


def fgn_autocovariance(spec: FgnSpec, lag):
    """Autocovariance of fGn at integer ``lag`` (scalar or array)."""
    lag_arr = np.abs(np.asarray(lag, dtype=float))
    two_h = 2.0 * spec.hurst
    cov = 0.5 * spec.variance * (
        (lag_arr + 1.0) ** two_h - 2.0 * lag_arr ** two_h + np.abs(lag_arr - 1.0) ** two_h
    )
    cov = np.where(lag_arr == 0, spec.variance, cov)
    if np.ndim(cov) == 0:
        return float(cov)
    return cov


def _circulant_eigenvalues(spec: FgnSpec, length: int) -> np.ndarray:
    r = fgn_autocovariance(spec, np.arange(length + 1))
    row = np.concatenate([r, r[-2:0:-1]])
    return np.fft.rfft(row).real, row.size


def simulate_fgn(spec: FgnSpec, length: int, seed=None, size=None) -> np.ndarray:
    """Draw exact fGn samples by circulant embedding (Davies-Harte).

    Falls back to a dense Cholesky factor of the Toeplitz covariance when the
    embedding has negative eigenvalues.

    Parameters
    ----------
    spec : FgnSpec
    length : int
        Number of samples, at least 2.
    seed : int, numpy Generator or None
    size : int or None
        Number of independent series; ``None`` returns a 1-D array.
    """
    if length < 2:
        raise ValueError("length must be >= 2")
    rng = np.random.default_rng(seed)
    n_series = 1 if size is None else int(size)
    lam, m = _circulant_eigenvalues(spec, length)
    tol = 1e-10 * lam.max()
    if lam.min() >= -tol:
        lam = np.clip(lam, 0.0, None)
        # complex Gaussian with Hermitian symmetry on the full circle
        z = rng.standard_normal((n_series, m)) + 1j * rng.standard_normal((n_series, m))
        full = np.concatenate([lam, lam[-2:0:-1]])
        w = np.fft.fft(np.sqrt(full / m) * z, axis=-1)
        out = w.real[:, :length]
    else:
        logger.info("circulant embedding not nonnegative (min eig %.3g); using Cholesky", lam.min())
        cov = linalg.toeplitz(fgn_autocovariance(spec, np.arange(length)))
        try:
            chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise linalg.LinAlgError(
                "fGn covariance is not numerically positive definite"
            ) from exc
        out = rng.standard_normal((n_series, length)) @ chol.T
    return out[0] if size is None else out


def wavelet_level_variance(spec: FgnSpec, level: int, coarsest: int):
    """Approximate variance of wavelet coefficients of fGn at one level.

    Returns ``(detail_variance, approx_variance)``; the approximation
    variance is ``None`` unless ``level == coarsest``.
    """
    if not 1 <= level <= coarsest:
        raise ValueError("need 1 <= level <= coarsest")
    g = spec.gamma
    base = spec.variance * spec.c_gamma / ((2.0 * math.pi) ** g * (1.0 - g))
    detail = base * 2.0 ** (level * g) * (2.0 - 2.0 ** g)
    approx = base * 2.0 ** ((coarsest + 1) * g) if level == coarsest else None
    return detail, approx


def wavelet_variance_profile(hurst, variance, coarsest: int) -> np.ndarray:
    """Vectorised level variances: columns 0..J-1 are details, column J the approximation.

    ``hurst`` and ``variance`` broadcast against each other.
    """
    h = np.asarray(hurst, dtype=float)[..., None]
    s2 = np.asarray(variance, dtype=float)[..., None]
    g = 2.0 * h - 1.0
    c = (2.0 * np.pi) ** (-2.0 * h) * np.sin(np.pi * h) * np.exp(gammaln(2.0 * h + 1.0))
    base = s2 * c / ((2.0 * np.pi) ** g * (1.0 - g))
    j = np.arange(1, coarsest + 1, dtype=float)
    detail = base * 2.0 ** (j * g) * (2.0 - 2.0 ** g)
    approx = base * 2.0 ** ((coarsest + 1) * g)
    return np.concatenate([detail, approx], axis=-1)

