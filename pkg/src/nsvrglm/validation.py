"""Input checks shared by the estimator, the pipeline and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .design import DesignMatrix
from .hurst import Parcellation, regressors
from .mesh import TriangularMesh

__all__ = ["check_series", "check_design", "check_mesh", "check_parcellation", "check_seed"]


def check_series(Y, min_length: int = 32) -> np.ndarray:
    """Finite float array of shape (V, T) with at least ``min_length`` scans."""
    Y = check_array(Y, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if Y.shape[1] < min_length:
        raise ValueError(f"series have {Y.shape[1]} scans; need at least {min_length}")
    if np.any(np.ptp(Y, axis=1) == 0):
        bad = int(np.flatnonzero(np.ptp(Y, axis=1) == 0)[0])
        raise ValueError(f"series at vertex {bad} is constant")
    return Y


def check_design(design, n_scans: int) -> DesignMatrix:
    if not isinstance(design, DesignMatrix):
        arr = check_array(design, dtype=np.float64, ensure_2d=True)
        design = DesignMatrix(arr)
    if design.n_scans != n_scans:
        raise ValueError(f"design has {design.n_scans} rows, series have {n_scans} scans")
    X = regressors(design)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError("design columns are collinear with each other or the intercept")
    return design


def check_mesh(mesh, n_vertices: int) -> TriangularMesh:
    if not isinstance(mesh, TriangularMesh):
        raise TypeError("mesh must be a TriangularMesh")
    if mesh.n_vertices != n_vertices:
        raise ValueError(f"mesh has {mesh.n_vertices} vertices, data has {n_vertices}")
    return mesh


def check_parcellation(parcellation, n_vertices: int) -> Parcellation:
    if not isinstance(parcellation, Parcellation):
        parcellation = Parcellation(np.asarray(parcellation))
    if parcellation.n_vertices != n_vertices:
        raise ValueError(f"parcellation covers {parcellation.n_vertices} vertices, "
                         f"data has {n_vertices}")
    return parcellation


def check_seed(seed, what: str = "seed") -> int:
    """Seeds are mandatory non-negative integers."""
    if seed is None or isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"{what} must be an integer")
    if seed < 0:
        raise ValueError(f"{what} must be non-negative")
    return int(seed)
