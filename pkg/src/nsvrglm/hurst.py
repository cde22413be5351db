"""Preliminary Hurst estimates per vertex and their grouping into dependence classes.

Pipeline: OLS residuals at each vertex, wavelet slope estimate of H, region
medians, and a 1-D k-means over the medians.  The cluster centres only seed
the later posterior computation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import DesignMatrix
from .wavelet import dwt, estimate_hurst_slope, pad_to_pow2

logger = logging.getLogger(__name__)

__all__ = [
    "Parcellation",
    "HurstClustering",
    "regressors",
    "ols_residuals",
    "preliminary_hurst_map",
    "kmeans_1d",
    "build_clustering",
    "read_parcellation",
    "write_parcellation",
]


@dataclass
class Parcellation:
    """Region label (1..R) for every vertex."""

    region_of: np.ndarray

    def __post_init__(self):
        self.region_of = np.asarray(self.region_of, dtype=np.int64)
        if self.region_of.ndim != 1:
            raise ValueError("region_of must be one-dimensional")
        if self.region_of.size and self.region_of.min() < 1:
            raise ValueError("region labels start at 1")
        present = np.unique(self.region_of)
        if present.size and not np.array_equal(present, np.arange(1, present[-1] + 1)):
            raise ValueError("region labels must be contiguous 1..R")

    @property
    def n_regions(self) -> int:
        return int(self.region_of.max()) if self.region_of.size else 0

    @property
    def n_vertices(self) -> int:
        return self.region_of.size

    def members(self, region: int) -> np.ndarray:
        return np.flatnonzero(self.region_of == region)


@dataclass
class HurstClustering:
    n_clusters: int
    cluster_of_region: np.ndarray
    region_of: np.ndarray
    preliminary: np.ndarray
    region_medians: np.ndarray
    centers: np.ndarray

    @property
    def cluster_of_vertex(self) -> np.ndarray:
        """0-based cluster of each vertex via its region."""
        return self.cluster_of_region[self.region_of - 1]

    def to_dict(self) -> dict:
        return {
            "n_clusters": int(self.n_clusters),
            "cluster_of_region": self.cluster_of_region.tolist(),
            "region_medians": self.region_medians.tolist(),
            "centers": self.centers.tolist(),
        }


def regressors(design: DesignMatrix) -> np.ndarray:
    """Full regressor matrix with an intercept appended when none is present."""
    X = design.full()
    has_const = np.any(np.ptp(X, axis=0) == 0) if X.shape[0] > 1 else True
    return X if has_const else np.column_stack([X, np.ones(X.shape[0])])


def ols_residuals(y, design):
    """Least-squares coefficients and residuals of ``y`` on the design.

    ``y`` may be a single series (T,) or a batch (V, T); ``design`` is a
    :class:`DesignMatrix` (intercept added if missing) or a plain (T, p) array.
    """
    X = regressors(design) if isinstance(design, DesignMatrix) else np.asarray(design, float)
    Y = np.asarray(y, dtype=float)
    T, p = X.shape
    if Y.shape[-1] != T:
        raise ValueError(f"series length {Y.shape[-1]} does not match design rows {T}")
    if T <= p:
        raise ValueError("need more scans than regressors")
    if np.linalg.matrix_rank(X) < p:
        raise np.linalg.LinAlgError("design is rank deficient")
    beta, *_ = np.linalg.lstsq(X, Y.T if Y.ndim == 2 else Y, rcond=None)
    beta = beta.T if Y.ndim == 2 else beta
    resid = Y - beta @ X.T if Y.ndim == 2 else Y - X @ beta
    return beta, resid


def _levels_for(n: int, min_coeffs: int) -> int:
    m = n.bit_length() - 1
    return max(1, m - int(np.log2(min_coeffs)))


def preliminary_hurst_map(Y, design, filter_id: str = "db4", min_coeffs: int = 16):
    """Wavelet slope Hurst estimate of the OLS residuals at every vertex.

    Residuals are reflected to a power-of-two length before the transform.
    Returns ``(hurst, beta_hat)`` with ``beta_hat`` of shape (V, p).
    """
    beta, resid = ols_residuals(np.atleast_2d(Y), design)
    padded, _ = pad_to_pow2(resid)
    levels = _levels_for(padded.shape[-1], min_coeffs)
    decomp = dwt(padded, levels, filter_id)
    hurst, _ = estimate_hurst_slope(decomp, min_coeffs)
    return np.atleast_1d(hurst), beta


def _assign(values, centers):
    # argmin picks the lowest index on ties
    return np.argmin(np.abs(values[:, None] - centers[None, :]), axis=1)


def _lloyd(values, centers, max_iter):
    labels = _assign(values, centers)
    history = []
    for _ in range(max_iter):
        for c in range(len(centers)):
            pts = values[labels == c]
            if pts.size:
                centers[c] = pts.mean()
            else:
                # re-seed an empty cluster at the worst-fitted point
                worst = np.argmax((values - centers[labels]) ** 2)
                centers[c] = values[worst]
        new = _assign(values, centers)
        history.append(float(np.sum((values - centers[new]) ** 2)))
        if np.array_equal(new, labels):
            break
        labels = new
    return labels, centers, history


def kmeans_1d(values, k: int, seed=0, n_restarts: int = 25, max_iter: int = 100):
    """One-dimensional k-means with k-means++ seeding and seeded restarts.

    Returns ``(labels, centers)``; centers are sorted ascending and labels
    refer to that order.  The restart with the smallest within-cluster sum
    of squares wins.
    """
    x = np.asarray(values, dtype=float).ravel()
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = np.unique(x)
    if k > distinct.size:
        raise ValueError(f"k={k} exceeds the number of distinct values ({distinct.size})")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_restarts):
        centers = np.empty(k)
        centers[0] = distinct[rng.integers(distinct.size)]
        for c in range(1, k):
            d2 = np.min((distinct[:, None] - centers[None, :c]) ** 2, axis=1)
            if d2.sum() <= 0:
                centers[c] = distinct[rng.integers(distinct.size)]
            else:
                centers[c] = distinct[rng.choice(distinct.size, p=d2 / d2.sum())]
        labels, centers, history = _lloyd(x, centers, max_iter)
        sse = history[-1] if history else 0.0
        if best is None or sse < best[0] - 1e-15:
            best = (sse, labels.copy(), centers.copy())
    _, labels, centers = best
    order = np.argsort(centers, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    return rank[labels], centers[order]


def build_clustering(Y, design, parcellation: Parcellation, n_clusters: int, seed=0,
                     filter_id: str = "db4", min_coeffs: int = 16,
                     preliminary=None) -> HurstClustering:
    """Group regions into ``n_clusters`` temporal-dependence classes.

    ``preliminary`` may carry already computed per-vertex estimates.
    """
    if preliminary is None:
        preliminary, _ = preliminary_hurst_map(Y, design, filter_id, min_coeffs)
    preliminary = np.asarray(preliminary, dtype=float)
    if preliminary.size != parcellation.n_vertices:
        raise ValueError("parcellation does not cover every vertex")
    R = parcellation.n_regions
    if not 1 <= n_clusters <= R:
        raise ValueError(f"n_clusters must lie in 1..{R}")
    medians = np.array([np.median(preliminary[parcellation.region_of == r])
                        for r in range(1, R + 1)])
    labels, centers = kmeans_1d(medians, n_clusters, seed=seed)
    logger.info("region medians %s -> centres %s", np.round(medians, 3), np.round(centers, 3))
    return HurstClustering(n_clusters=n_clusters, cluster_of_region=labels,
                           region_of=parcellation.region_of.copy(),
                           preliminary=preliminary, region_medians=medians,
                           centers=centers)


def read_parcellation(path, n_vertices: int | None = None) -> Parcellation:
    """Read ``vertex_index region_index`` rows (0-based vertices, 1-based regions)."""
    rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
    n = int(rows[:, 0].max()) + 1 if n_vertices is None else n_vertices
    region = np.zeros(n, dtype=np.int64)
    if len(np.unique(rows[:, 0])) != len(rows):
        raise ValueError(f"{path}: a vertex is listed twice")
    region[rows[:, 0]] = rows[:, 1]
    if np.any(region == 0):
        raise ValueError(f"{path}: vertex {int(np.argmin(region))} has no region")
    return Parcellation(region)


def write_parcellation(parc: Parcellation, path) -> None:
    lines = [f"{v} {r}" for v, r in enumerate(parc.region_of)]
    Path(path).write_text("\n".join(lines) + "\n")
