"""Scikit-learn style front end for the spatial wavelet-domain Bayesian GLM."""

from __future__ import annotations

import logging
import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .design import DesignMatrix, standardize_columns
from .excursions import ExcursionResult, excursion_set, sample_posterior_field
from .hurst import build_clustering, preliminary_hurst_map, regressors
from .inference import (ModelSpec, Priors, evaluate_grid, hyperparameter_grid,
                        marginal_posteriors, whiten_data)
from .mesh import assemble_fem, local_variability
from .validation import check_design, check_mesh, check_parcellation, check_seed, check_series

logger = logging.getLogger(__name__)

__all__ = ["NSVRBayesGLM"]


class NSVRBayesGLM(BaseEstimator):
    """Spatial Bayesian GLM with long-memory noise and non-stationary spatial priors.

    ``fit(Y, design, mesh, parcellation)`` takes a (V, T) matrix of vertex
    series, the task design, a triangular mesh over the V vertices and a
    region labelling used to group vertices by temporal dependence.

    Parameters
    ----------
    n_clusters : int
        Number of temporal-dependence classes (one Hurst parameter each).
    filter_id : str
        Wavelet filter for both the preliminary estimates and the likelihood.
    spde_order : int
        SPDE exponent alpha; 2 gives a Matern field with smoothness 1.
    sigma0, rho0 : float
        Baseline spatial standard deviation and range (``rho0=None`` uses
        five median edge lengths).
    standardize : bool
        Centre and scale task columns before fitting.
    center_delta : bool
        Centre the local variability scores as well as scaling them.  Left
        off, the scores stay positive and the first spatial parameter can
        shrink the whole field towards zero.
    random_state : int
        Seed for the k-means restarts.
    """

    def __init__(self, n_clusters=3, filter_id="db4", min_coeffs=16, spde_order=2,
                 sigma0=1.0, rho0=None, sigma_shape=1.0, sigma_rate=1.0,
                 theta_precision=0.3, nuisance_precision=1e-8, max_evaluations=3000,
                 n_per_axis=5, prune=10.0, fd_step=0.05, standardize=True,
                 center_delta=False, random_state=0):
        self.n_clusters = n_clusters
        self.filter_id = filter_id
        self.min_coeffs = min_coeffs
        self.spde_order = spde_order
        self.sigma0 = sigma0
        self.rho0 = rho0
        self.sigma_shape = sigma_shape
        self.sigma_rate = sigma_rate
        self.theta_precision = theta_precision
        self.nuisance_precision = nuisance_precision
        self.max_evaluations = max_evaluations
        self.n_per_axis = n_per_axis
        self.prune = prune
        self.fd_step = fd_step
        self.standardize = standardize
        self.center_delta = center_delta
        self.random_state = random_state

    def _priors(self) -> Priors:
        return Priors(sigma_shape=self.sigma_shape, sigma_rate=self.sigma_rate,
                      theta_precision=self.theta_precision,
                      nuisance_precision=self.nuisance_precision)

    def _prepare_design(self, design, n_scans):
        design = check_design(design, n_scans)
        if not self.standardize:
            return design
        x = design.tasks
        self.design_center_ = x.mean(axis=0)
        self.design_scale_ = x.std(axis=0, ddof=1)
        return standardize_columns(design)

    def fit(self, Y, design, mesh, parcellation):
        seed = check_seed(self.random_state, "random_state")
        Y = check_series(Y, min_length=2 * self.min_coeffs)
        V, T = Y.shape
        mesh = check_mesh(mesh, V)
        parcellation = check_parcellation(parcellation, V)
        design = self._prepare_design(design, T)
        timings = {}

        t = time.perf_counter()
        prelim, beta_ols = preliminary_hurst_map(Y, design, self.filter_id, self.min_coeffs)
        clustering = build_clustering(Y, design, parcellation, self.n_clusters, seed=seed,
                                      filter_id=self.filter_id, min_coeffs=self.min_coeffs,
                                      preliminary=prelim)
        timings["clustering_s"] = time.perf_counter() - t

        t = time.perf_counter()
        K = design.n_tasks
        delta = np.array([local_variability(beta_ols[:, k], mesh, center=self.center_delta)
                          for k in range(K)])
        fem = assemble_fem(mesh)
        data = whiten_data(Y, design, filter_id=self.filter_id, min_coeffs=self.min_coeffs)
        model = ModelSpec(mesh=mesh, fem=fem, cluster_of_vertex=clustering.cluster_of_vertex,
                          n_clusters=self.n_clusters, delta=delta, n_tasks=K,
                          n_nuisance=data.n_regressors - K, priors=self._priors(),
                          sigma0=self.sigma0, rho0=self.rho0, alpha=self.spde_order,
                          hurst_init=clustering.centers)
        timings["setup_s"] = time.perf_counter() - t

        t = time.perf_counter()
        grid = hyperparameter_grid(data, model, max_evaluations=self.max_evaluations,
                                   n_per_axis=self.n_per_axis, prune=self.prune,
                                   fd_step=self.fd_step)
        timings["mode_search_s"] = time.perf_counter() - t

        t = time.perf_counter()
        conditionals = evaluate_grid(grid, data, model)
        summary = marginal_posteriors(conditionals, grid.weights, model)
        timings["integration_s"] = time.perf_counter() - t

        self.design_ = design
        self.vertex_mean_ = Y.mean(axis=1)
        self.clustering_ = clustering
        self.delta_ = delta
        self.model_ = model
        self.grid_ = grid
        self.conditionals_ = conditionals
        self.posterior_ = summary
        self.coef_ = summary.mean
        self.coef_sd_ = summary.sd
        self.hurst_ = summary.hurst
        self.sigma_ = summary.sigma
        self.n_vertices_ = V
        self.timings_ = timings
        logger.info("fit done: H = %s, sigma = %.3f", np.round(self.hurst_, 3), self.sigma_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "posterior_"):
            raise NotFittedError("call fit before using this estimator")

    def predict(self, design=None) -> np.ndarray:
        """Posterior-mean fitted series (V, T) for ``design`` (default: the fitted design)."""
        self._check_fitted()
        if design is None:
            d = self.design_
        else:
            d = design if isinstance(design, DesignMatrix) else DesignMatrix(np.asarray(design))
            if d.n_tasks != self.design_.n_tasks:
                raise ValueError(f"design has {d.n_tasks} tasks, model has {self.design_.n_tasks}")
            if self.standardize:
                d = DesignMatrix((d.tasks - self.design_center_) / self.design_scale_,
                                 d.nuisance, list(d.task_names))
        X = regressors(d)
        coef = np.vstack([self.posterior_.mean, self.posterior_.nuisance_mean])
        if X.shape[1] != coef.shape[0]:
            raise ValueError(f"design has {X.shape[1]} regressors, model has {coef.shape[0]}")
        # responses were centred before the fit, regressors were not
        return coef.T @ X.T + self.vertex_mean_[:, None]

    def sample(self, n_samples: int, seed, task: int | None = None) -> np.ndarray:
        """Draws of the activation field(s) from the grid mixture."""
        self._check_fitted()
        return sample_posterior_field(self.conditionals_, self.grid_.weights, n_samples,
                                      seed, task=task)

    def excursions(self, task: int, alpha: float = 0.05, sign: str = "positive",
                   n_samples: int = 10000, seed=0, samples=None) -> ExcursionResult:
        """Joint-probability activation set for one task."""
        self._check_fitted()
        if samples is None:
            samples = self.sample(n_samples, [check_seed(seed), task], task=task)
        return excursion_set(samples, alpha=alpha, sign=sign,
                             adjacency=self.model_.mesh.adjacency())
