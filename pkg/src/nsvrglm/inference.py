"""Posterior computation for the wavelet-domain spatial GLM.

Given the hyperparameters (temporal scale sigma, one Hurst parameter per
dependence cluster, and two spatial parameters per task) the model is
linear-Gaussian: the wavelet coefficients have a diagonal Gaussian
likelihood and the activation fields a GMRF prior.  The conditional
posterior of the activation fields is therefore exactly Gaussian, so the
Laplace step of INLA is exact here and the only approximation left is the
numerical integration over the hyperparameters.

Latent vector layout: coefficient-major, ``index = a * V + v`` for
regressor ``a`` (tasks first, then nuisance columns) at vertex ``v``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import splu
from scipy.special import expit, logit

from .design import DesignMatrix
from .hurst import regressors
from .mesh import FemMatrices, NonstatField, TriangularMesh, precision_factor, precision_stationary
from .selinv import inverse_diagonal
from .wavelet import dwt, pad_to_pow2

logger = logging.getLogger(__name__)

__all__ = [
    "Priors",
    "WhitenedData",
    "ModelSpec",
    "ConditionalPosterior",
    "HyperGrid",
    "PosteriorSummary",
    "level_variances_normalized",
    "whiten_data",
    "default_start",
    "conditional_posterior",
    "log_posterior_theta",
    "hyperparameter_grid",
    "evaluate_grid",
    "marginal_posteriors",
]

MAX_HYPERPARAMETERS = 10


@dataclass(frozen=True)
class Priors:
    """Gamma(shape, rate) on sigma, Uniform(0, 1) on every H, Normal(0, 1/precision) on theta."""

    sigma_shape: float = 1.0
    sigma_rate: float = 1.0
    theta_precision: float = 0.3
    nuisance_precision: float = 1e-8


def level_variances_normalized(hurst, sigma2, levels: int) -> np.ndarray:
    """Variance of fGn wavelet coefficients per level for the likelihood.

    Detail level ``j``: ``sigma2 * 2**((j-1) g) * (2 - 2**g)``; approximation
    at level ``J``: ``sigma2 * 2**(J g)``, with ``g = 2H - 1``.  These are the
    closed-form level variances up to an H-dependent constant chosen so that
    ``sigma2`` is the variance of the noise itself (exact for Haar filters).
    Output columns: levels 1..J then the approximation.
    """
    h = np.asarray(hurst, dtype=float)[..., None]
    s2 = np.asarray(sigma2, dtype=float)[..., None]
    g = 2.0 * h - 1.0
    j = np.arange(1, levels + 1, dtype=float)
    detail = s2 * 2.0 ** ((j - 1.0) * g) * (2.0 - 2.0 ** g)
    approx = s2 * 2.0 ** (levels * g)
    return np.concatenate([detail, np.broadcast_to(approx, detail.shape[:-1] + (1,))], axis=-1)


@dataclass
class WhitenedData:
    """Wavelet coefficients of the responses and regressors plus per-level sufficient statistics."""

    yw: np.ndarray          # (V, n)
    xw: np.ndarray          # (n, p)
    level: np.ndarray       # (n,) 0..J, J marks the approximation
    levels: int
    n_tasks: int
    task_names: list
    counts: np.ndarray = field(init=False)
    xx: np.ndarray = field(init=False)   # (J+1, p, p)
    xy: np.ndarray = field(init=False)   # (V, J+1, p)
    yy: np.ndarray = field(init=False)   # (V, J+1)

    def __post_init__(self):
        L = self.levels + 1
        self.counts = np.bincount(self.level, minlength=L).astype(float)
        p = self.xw.shape[1]
        self.xx = np.zeros((L, p, p))
        self.xy = np.zeros((self.yw.shape[0], L, p))
        self.yy = np.zeros((self.yw.shape[0], L))
        for ell in range(L):
            sel = self.level == ell
            xs = self.xw[sel]
            ys = self.yw[:, sel]
            self.xx[ell] = xs.T @ xs
            self.xy[:, ell] = ys @ xs
            self.yy[:, ell] = np.einsum("vi,vi->v", ys, ys)

    @property
    def n_vertices(self) -> int:
        return self.yw.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.xw.shape[1]

    @property
    def n_coefficients(self) -> int:
        return self.yw.shape[1]


def whiten_data(Y, design: DesignMatrix, levels: int | None = None, filter_id: str = "db4",
                min_coeffs: int = 16, center: bool = True) -> WhitenedData:
    """Apply one DWT to every vertex series and every regressor column.

    Series are reflected to a power-of-two length first.  An intercept
    nuisance column is appended when the design has no constant column.
    With ``center`` each vertex series is mean-centred in the time domain.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X = regressors(design)
    if Y.shape[1] != X.shape[0]:
        raise ValueError(f"{Y.shape[1]} scans in data, {X.shape[0]} in design")
    if center:
        Y = Y - Y.mean(axis=1, keepdims=True)
    Yp, _ = pad_to_pow2(Y)
    Xp, _ = pad_to_pow2(X.T)
    n = Yp.shape[1]
    if levels is None:
        levels = max(1, (n.bit_length() - 1) - int(round(math.log2(min_coeffs))))
    dy = dwt(Yp, levels, filter_id)
    dx = dwt(Xp, levels, filter_id)
    lab = dy.level_index() - 1
    return WhitenedData(yw=dy.coefficients(), xw=dx.coefficients().T, level=lab,
                        levels=levels, n_tasks=design.n_tasks,
                        task_names=list(design.task_names))


@dataclass
class ModelSpec:
    """Everything fixed during inference: mesh, clusters, variability scores and priors."""

    mesh: TriangularMesh
    fem: FemMatrices
    cluster_of_vertex: np.ndarray
    n_clusters: int
    delta: np.ndarray               # (K, V) standardised local variability per task
    n_tasks: int
    n_nuisance: int
    priors: Priors = Priors()
    sigma0: float = 1.0
    rho0: float | None = None
    alpha: int = 2
    hurst_init: np.ndarray | None = None

    def __post_init__(self):
        self.cluster_of_vertex = np.asarray(self.cluster_of_vertex, dtype=np.int64)
        self.delta = np.atleast_2d(np.asarray(self.delta, dtype=float))
        V = self.mesh.n_vertices
        if self.cluster_of_vertex.shape != (V,):
            raise ValueError("cluster_of_vertex must have one entry per vertex")
        if self.delta.shape != (self.n_tasks, V):
            raise ValueError(f"delta must have shape ({self.n_tasks}, {V})")
        if self.rho0 is None:
            self.rho0 = 5.0 * float(np.median(self.mesh.edge_lengths()))
        if self.n_hyper > MAX_HYPERPARAMETERS:
            raise ValueError(
                f"{self.n_hyper} hyperparameters exceeds the integration limit of "
                f"{MAX_HYPERPARAMETERS}; reduce n_clusters or tasks"
            )
        counts = np.bincount(self.cluster_of_vertex, minlength=self.n_clusters)
        if counts.size != self.n_clusters or np.any(counts == 0):
            raise ValueError("every cluster needs at least one vertex")

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    @property
    def nu(self) -> float:
        return self.alpha - 1.0  # alpha = nu + d/2 with d = 2

    @property
    def n_hyper(self) -> int:
        return 1 + self.n_clusters + 2 * self.n_tasks

    # hyperparameter vector in the working scale:
    # [log sigma, logit H_1..H_nH, theta_11, theta_12, ..., theta_K1, theta_K2]
    def unpack(self, phi):
        phi = np.asarray(phi, dtype=float)
        sigma = math.exp(phi[0])
        hurst = expit(phi[1:1 + self.n_clusters])
        theta = phi[1 + self.n_clusters:].reshape(self.n_tasks, 2)
        return sigma, hurst, theta

    def pack(self, sigma, hurst, theta) -> np.ndarray:
        return np.concatenate([[math.log(sigma)], logit(np.asarray(hurst, float)),
                               np.asarray(theta, float).ravel()])

    def param_names(self) -> list:
        names = ["log_sigma"] + [f"logit_H{i + 1}" for i in range(self.n_clusters)]
        for k in range(self.n_tasks):
            names += [f"theta{k + 1}_1", f"theta{k + 1}_2"]
        return names

    def field(self, k: int, theta) -> NonstatField:
        return NonstatField(theta1=float(theta[0]), theta2=float(theta[1]), delta=self.delta[k],
                            sigma0=self.sigma0, rho0=self.rho0, nu=self.nu)

    def log_prior(self, phi) -> float:
        """Log prior density of the working-scale vector, Jacobian included."""
        sigma, hurst, theta = self.unpack(phi)
        pr = self.priors
        lp = (pr.sigma_shape * math.log(pr.sigma_rate) - math.lgamma(pr.sigma_shape)
              + (pr.sigma_shape - 1.0) * math.log(sigma) - pr.sigma_rate * sigma)
        lp += math.log(sigma)                         # d sigma / d log sigma
        lp += float(np.sum(np.log(hurst) + np.log1p(-hurst)))  # uniform H through logit
        q = pr.theta_precision
        lp += float(np.sum(0.5 * math.log(q / (2 * math.pi)) - 0.5 * q * theta ** 2))
        return lp


def _splu_spd(Q, what="matrix"):
    try:
        lu = splu(Q.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise np.linalg.LinAlgError(f"{what} factorisation failed: {exc}") from exc
    d = lu.U.diagonal()
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise np.linalg.LinAlgError(f"{what} is not positive definite")
    return lu, float(np.sum(np.log(d)))


@dataclass
class ConditionalPosterior:
    """Gaussian conditional of the stacked latent field at one hyperparameter point."""

    phi: np.ndarray
    mean: np.ndarray
    precision: sparse.csc_matrix
    factor: object
    log_marginal: float
    log_marginal_residual: float
    log_prior: float
    prior_factor: sparse.csr_matrix
    lik_chol: np.ndarray            # (V, p, p) lower Cholesky factors of X' S_v^-1 X
    n_vertices: int
    _variance: np.ndarray | None = None

    @property
    def log_posterior(self) -> float:
        return self.log_marginal + self.log_prior

    def marginal_variance(self, block: int = 512) -> np.ndarray:
        """Diagonal of the inverse precision.

        Selected inversion of the factor when its pattern allows, blocked
        identity solves otherwise.
        """
        if self._variance is None:
            try:
                self._variance = inverse_diagonal(self.factor)
                return self._variance
            except ValueError as exc:
                logger.debug("selected inversion unavailable (%s); using solves", exc)
            n = self.precision.shape[0]
            out = np.empty(n)
            for start in range(0, n, block):
                stop = min(n, start + block)
                rhs = np.zeros((n, stop - start))
                rhs[np.arange(start, stop), np.arange(stop - start)] = 1.0
                sol = self.factor.solve(rhs)
                out[start:stop] = sol[np.arange(start, stop), np.arange(stop - start)]
            self._variance = out
        return self._variance

    def sample(self, n_samples: int, rng, block: int = 1000) -> np.ndarray:
        """Exact draws, shape (n_samples, n_latent), by perturbing both precision terms."""
        rng = np.random.default_rng(rng)
        F = self.prior_factor
        V = self.n_vertices
        p = self.lik_chol.shape[1]
        out = np.empty((n_samples, self.mean.size))
        for start in range(0, n_samples, block):
            m = min(block, n_samples - start)
            z1 = rng.standard_normal((F.shape[0], m))
            z2 = rng.standard_normal((V, p, m))
            lik = np.einsum("vab,vbm->avm", self.lik_chol, z2).reshape(p * V, m)
            rhs = F.T @ z1 + lik
            out[start:start + m] = (self.factor.solve(rhs) + self.mean[:, None]).T
        return out


def _prior_blocks(phi, model: ModelSpec):
    """Per-task precision matrices, square-root factors and log-determinants."""
    _, _, theta = model.unpack(phi)
    fem = model.fem
    Q_blocks, F_blocks, logdet = [], [], 0.0
    for k in range(model.n_tasks):
        fld = model.field(k, theta[k])
        log_tau = fld.log_tau()
        if np.max(np.abs(log_tau)) > 300:
            raise OverflowError("log tau outside representable range; theta/delta too extreme")
        tau = np.exp(log_tau)
        kappa = fld.kappa
        T = sparse.diags(tau)
        Q = (T @ precision_stationary(fem, kappa, model.alpha) @ T).tocsr()
        F = (precision_factor(fem, kappa, model.alpha) @ T).tocsr()
        # log|T Q_a T| from log|K| and the lumped mass
        K = (kappa ** 2 * sparse.diags(fem.C_lumped) + fem.G).tocsc()
        _, logdet_k = _splu_spd(K, "SPDE operator")
        a = model.alpha
        ld = 2.0 * np.sum(log_tau) + a * logdet_k - (a - 1) * np.sum(np.log(fem.C_lumped))
        Q_blocks.append(Q)
        F_blocks.append(F)
        logdet += ld
    return Q_blocks, F_blocks, logdet


def conditional_posterior(phi, data: WhitenedData, model: ModelSpec) -> ConditionalPosterior:
    """Exact Gaussian conditional of all activation fields at hyperparameter ``phi``.

    Also returns the log marginal likelihood ``log p(y | phi)``, computed
    from the determinant identity and, independently, from the residual
    quadratic form.
    """
    phi = np.asarray(phi, dtype=float)
    V = model.n_vertices
    if data.n_vertices != V:
        raise ValueError("data and mesh disagree on the number of vertices")
    p = data.n_regressors
    K = model.n_tasks
    n_nuis = p - K
    sigma, hurst, _ = model.unpack(phi)

    S = level_variances_normalized(hurst, sigma ** 2, data.levels)     # (nH, J+1)
    W = 1.0 / S[model.cluster_of_vertex]                                 # (V, J+1)
    A = np.einsum("vl,lab->vab", W, data.xx)                             # X' S^-1 X per vertex
    r = np.einsum("vl,vla->va", W, data.xy)                              # X' S^-1 y
    q = np.einsum("vl,vl->v", W, data.yy)                                # y' S^-1 y
    logdet_sigma = float(np.sum(np.log(S[model.cluster_of_vertex]) * data.counts))

    Q_blocks, F_blocks, logdet_prior = _prior_blocks(phi, model)
    eps = model.priors.nuisance_precision
    prior = sparse.block_diag(Q_blocks + [sparse.identity(V) * eps] * n_nuis, format="csc")
    F = sparse.block_diag(F_blocks + [sparse.identity(V) * math.sqrt(eps)] * n_nuis,
                          format="csr")
    logdet_prior += n_nuis * V * math.log(eps)

    a_idx, b_idx = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
    v_idx = np.arange(V)
    rows = (a_idx[..., None] * V + v_idx).ravel()
    cols = (b_idx[..., None] * V + v_idx).ravel()
    vals = np.transpose(A, (1, 2, 0)).ravel()
    lik = sparse.coo_matrix((vals, (rows, cols)), shape=(p * V, p * V))
    post = (prior + lik).tocsc()
    factor, logdet_post = _splu_spd(post, "posterior precision")

    rhs = r.T.ravel()                                # coefficient-major
    mean = factor.solve(rhs)
    n_obs = data.n_coefficients * V
    quad = float(np.sum(q) - rhs @ mean)
    const = -0.5 * n_obs * math.log(2 * math.pi) - 0.5 * logdet_sigma
    log_ml = const + 0.5 * logdet_prior - 0.5 * logdet_post - 0.5 * quad

    # residual form: (y - X mu)' S^-1 (y - X mu) + mu' Q mu
    mu = mean.reshape(p, V).T
    resid_q = (q - 2.0 * np.einsum("va,va->v", mu, r)
               + np.einsum("va,vab,vb->v", mu, A, mu))
    quad_resid = float(np.sum(resid_q) + mean @ (prior @ mean))
    log_ml_resid = const + 0.5 * logdet_prior - 0.5 * logdet_post - 0.5 * quad_resid

    lik_chol = _psd_sqrt(A)
    return ConditionalPosterior(
        phi=phi, mean=mean, precision=post, factor=factor, log_marginal=log_ml,
        log_marginal_residual=log_ml_resid, log_prior=model.log_prior(phi),
        prior_factor=F, lik_chol=lik_chol, n_vertices=V,
    )


def _psd_sqrt(A):
    """Batched lower factors L with L L^T = A (eigen fallback for singular blocks)."""
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(A)
        return U * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def log_posterior_theta(phi, data: WhitenedData, model: ModelSpec) -> float:
    """Unnormalised ``log pi(phi | y)``; ``-inf`` where the conditional cannot be formed."""
    try:
        cp = conditional_posterior(phi, data, model)
    except (np.linalg.LinAlgError, OverflowError, FloatingPointError, ValueError) as exc:
        logger.debug("log posterior undefined at %s: %s", np.round(phi, 3), exc)
        return -np.inf
    return cp.log_posterior


@dataclass
class HyperGrid:
    """Integration points in the working scale with their log posterior values."""

    mode: np.ndarray
    points: np.ndarray
    log_post: np.ndarray
    log_prior: np.ndarray
    scales: np.ndarray
    hessian: np.ndarray
    converged: bool
    n_evaluations: int
    names: list

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_post - self.log_post.max())
        return w / w.sum()


def _hessian(f, x, step):
    d = x.size
    f0 = f(x)
    H = np.zeros((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = step[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / step[i] ** 2
        for j in range(i):
            ej = np.zeros(d)
            ej[j] = step[j]
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej)
                                 + f(x - ei - ej)) / (4 * step[i] * step[j])
    return H


def default_start(data: WhitenedData, model: ModelSpec) -> np.ndarray:
    """Starting point: pooled OLS residual scale, cluster-centre Hurst values, zero thetas."""
    beta, *_ = np.linalg.lstsq(data.xw, data.yw.T, rcond=None)
    resid = data.yw.T - data.xw @ beta
    s2 = float(np.mean(resid ** 2) * data.n_coefficients
               / max(1, data.n_coefficients - data.n_regressors))
    hurst = (np.full(model.n_clusters, 0.5) if model.hurst_init is None
             else np.clip(np.asarray(model.hurst_init, float), 0.05, 0.95))
    return model.pack(math.sqrt(s2), hurst, np.zeros((model.n_tasks, 2)))


def hyperparameter_grid(data: WhitenedData, model: ModelSpec, start=None,
                        max_evaluations: int = 3000, n_per_axis: int = 5,
                        prune: float = 10.0, fd_step: float = 0.05,
                        log_post_fn=None) -> HyperGrid:
    """Locate the posterior mode of the hyperparameters and lay an integration grid.

    Nelder-Mead on the working scale finds the mode; central finite
    differences give the Hessian; the grid puts ``n_per_axis`` points
    (odd, 3 or 5) along each coordinate axis through the mode at multiples
    of the marginal standard deviation ``sqrt(diag(-H^-1))``.  Points more
    than ``prune`` log units below the mode are dropped.

    ``log_post_fn`` overrides the target, which lets the grid logic be
    checked on densities with known modes.
    """
    if n_per_axis not in (3, 5):
        raise ValueError("n_per_axis must be 3 or 5")
    target = log_post_fn or (lambda x: log_posterior_theta(x, data, model))
    cache: dict = {}

    def f(x):
        key = tuple(np.round(x, 12))
        if key not in cache:
            cache[key] = target(np.asarray(x, float))
        return cache[key]

    x0 = np.asarray(default_start(data, model) if start is None else start, dtype=float)
    d = x0.size
    if d > MAX_HYPERPARAMETERS:
        raise ValueError(f"{d} hyperparameters exceeds {MAX_HYPERPARAMETERS}")
    simplex_step = np.full(d, 0.3)
    simplex = np.vstack([x0] + [x0 + np.eye(d)[i] * simplex_step[i] for i in range(d)])
    t0 = time.perf_counter()
    res = optimize.minimize(lambda x: -f(x), x0, method="Nelder-Mead",
                            options={"maxfev": max_evaluations, "xatol": 1e-3, "fatol": 1e-4,
                                     "initial_simplex": simplex, "adaptive": d > 4})
    mode = res.x
    converged = bool(res.success)
    if not converged:
        logger.warning("mode search stopped after %d evaluations: %s", res.nfev, res.message)
    logger.info("mode search: %d evaluations, %.1fs", res.nfev, time.perf_counter() - t0)

    H = _hessian(f, mode, np.full(d, fd_step))
    neg = -H
    try:
        np.linalg.cholesky(neg)
        cov = np.linalg.inv(neg)
        scales = np.sqrt(np.diag(cov))
    except np.linalg.LinAlgError:
        logger.warning("Hessian at the mode is not negative definite; using diagonal curvature")
        diag = np.diag(neg)
        scales = np.where(diag > 0, 1.0 / np.sqrt(np.abs(diag)), 1.0)

    offsets = [-1.0, 1.0] if n_per_axis == 3 else [-2.0, -1.0, 1.0, 2.0]
    pts = [mode]
    for i in range(d):
        for z in offsets:
            x = mode.copy()
            x[i] += z * scales[i]
            pts.append(x)
    pts = np.array(pts)
    lp = np.array([f(x) for x in pts])
    if lp.max() > lp[0]:
        logger.info("grid point exceeds the located mode by %.3g", lp.max() - lp[0])
    keep = lp >= lp.max() - prune
    lps = np.array([model.log_prior(x) for x in pts[keep]]) if log_post_fn is None \
        else np.zeros(int(keep.sum()))
    return HyperGrid(mode=mode, points=pts[keep], log_post=lp[keep], log_prior=lps,
                     scales=scales, hessian=H, converged=converged,
                     n_evaluations=len(cache), names=model.param_names())


def evaluate_grid(grid: HyperGrid, data: WhitenedData, model: ModelSpec) -> list:
    """Conditional posteriors at every grid point."""
    return [conditional_posterior(x, data, model) for x in grid.points]


@dataclass
class PosteriorSummary:
    """Mixture-over-grid posterior moments of the activation fields and hyperparameters."""

    mean: np.ndarray                 # (K, V)
    sd: np.ndarray                   # (K, V)
    nuisance_mean: np.ndarray        # (N, V)
    weights: np.ndarray
    points: np.ndarray
    log_marginal: np.ndarray
    hurst: np.ndarray
    sigma: float
    theta: np.ndarray                # (K, 2)
    param_names: list
    axis_marginals: dict

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "hurst": self.hurst.tolist(),
            "sigma": self.sigma,
            "theta": self.theta.tolist(),
            "grid": {
                "names": self.param_names,
                "points": self.points.tolist(),
                "weights": self.weights.tolist(),
                "log_marginal": self.log_marginal.tolist(),
            },
        }


def marginal_posteriors(conditionals: list, weights, model: ModelSpec) -> PosteriorSummary:
    """Combine conditionals into a finite mixture over the grid."""
    if not conditionals:
        raise ValueError("need at least one grid point")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    V, K = model.n_vertices, model.n_tasks
    means = np.array([c.mean for c in conditionals])
    variances = np.array([c.marginal_variance() for c in conditionals])
    mean = w @ means
    second = w @ (variances + means ** 2)
    var = np.clip(second - mean ** 2, 0.0, None)
    p = means.shape[1] // V
    mean = mean.reshape(p, V)
    sd = np.sqrt(var).reshape(p, V)

    pts = np.array([c.phi for c in conditionals])
    sig = np.exp(pts[:, 0])
    hur = expit(pts[:, 1:1 + model.n_clusters])
    th = pts[:, 1 + model.n_clusters:].reshape(len(pts), K, 2)
    names = model.param_names()
    marg = {}
    for i, name in enumerate(names):
        vals, inv = np.unique(np.round(pts[:, i], 12), return_inverse=True)
        marg[name] = {"values": vals.tolist(),
                      "weights": np.bincount(inv, weights=w, minlength=vals.size).tolist()}
    return PosteriorSummary(
        mean=mean[:K], sd=sd[:K], nuisance_mean=mean[K:], weights=w, points=pts,
        log_marginal=np.array([c.log_marginal for c in conditionals]),
        hurst=w @ hur, sigma=float(w @ sig), theta=np.einsum("g,gkj->kj", w, th),
        param_names=names, axis_marginals=marg,
    )
