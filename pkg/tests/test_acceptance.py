"""End-to-end acceptance checks.  Slow: about 25 minutes on one core.

Each test records a one-line verdict that is repeated in the terminal
summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest
from conftest import record_criterion
from scipy import special
from test_inference import dense_oracle

from nsvrglm import NSVRBayesGLM
from nsvrglm.excursions import excursion_set
from nsvrglm.fgn import FgnSpec, fgn_autocovariance, simulate_fgn
from nsvrglm.harness import (SliceSimSpec, generate_slice_simulation, run_nsvr_pipeline,
                             run_prewhitening_experiment)
from nsvrglm.harness.config import parse_config
from nsvrglm.harness.pipeline import truth_from_simulation
from nsvrglm.harness.simulation import Site
from nsvrglm.inference import whiten_data
from nsvrglm.mesh import (NonstatField, assemble_fem, kappa_from_range,
                          precision_nonstationary, precision_stationary, unit_square_mesh)
from nsvrglm.wavelet import dwt, idwt

pytestmark = pytest.mark.acceptance

TASK2 = 1


def _config(n_clusters, n_samples=10000):
    return parse_config({"design": {"seed": 0},
                         "inference": {"seed": 0, "n_clusters": n_clusters},
                         "excursions": {"seed": 0, "n_samples": n_samples}})


@pytest.fixture(scope="module")
def slice_sim():
    return generate_slice_simulation(SliceSimSpec(), 0)


@pytest.fixture(scope="module")
def slice_fit(slice_sim):
    t0 = time.perf_counter()
    res = run_nsvr_pipeline(slice_sim.Y, slice_sim.design, slice_sim.mesh,
                            slice_sim.parcellation, _config(3),
                            truth=truth_from_simulation(slice_sim))
    return res, time.perf_counter() - t0


def _cluster_truth(est, sim):
    """Majority true Hurst value among the vertices of each cluster."""
    cv = est.clustering_.cluster_of_vertex
    out = []
    for c in range(est.n_clusters):
        vals, counts = np.unique(sim.hurst_true[cv == c], return_counts=True)
        out.append(vals[np.argmax(counts)])
    return np.array(out)


# ---- 1: prewhitening bias ---------------------------------------------------

def test_prewhitening_bias():
    rep = run_prewhitening_experiment(n_runs=500, length=256, beta=2.0, seed=20240601)
    m = {k: v["mean"] for k, v in rep.summaries.items()}
    secs = rep.timings["total_s"]
    ok = (all(1.95 <= m[f"{k}/ordinary"] <= 2.07 for k in ("long", "ar6"))
          and all(m[f"{k}/prewhitened"] < 1.5 for k in ("long", "ar6")) and secs < 120)
    detail = ", ".join(f"{k} {v:.3f}" for k, v in m.items()) + f"; {secs:.0f} s"
    assert record_criterion(1, ok, detail)


# ---- 2: Hurst recovery ------------------------------------------------------

def test_hurst_three_clusters(slice_sim, slice_fit):
    res, secs = slice_fit
    est = res.estimator
    truth = _cluster_truth(est, slice_sim)
    err = np.abs(est.hurst_ - truth)
    ok = sorted(truth.tolist()) == [0.4, 0.5, 0.8] and err.max() <= 0.08 and secs < 1800
    assert record_criterion(2, ok, f"n_H=3 H={np.round(est.hurst_, 3)} truth={truth} "
                                   f"max err {err.max():.3f}; {secs:.0f} s")


def test_hurst_five_clusters(slice_sim):
    t0 = time.perf_counter()
    est = NSVRBayesGLM(**_config(5).estimator_params())
    est.fit(slice_sim.Y, slice_sim.design, slice_sim.mesh, slice_sim.parcellation)
    secs = time.perf_counter() - t0
    truth = _cluster_truth(est, slice_sim)
    err = np.abs(est.hurst_ - truth)
    ok = err.max() <= 0.1 and secs < 1800
    assert record_criterion(2, ok, f"n_H=5 H={np.round(est.hurst_, 3)} truth={truth} "
                                   f"max err {err.max():.3f}; {secs:.0f} s")


# ---- 3: wavelet transform ---------------------------------------------------

def _lag1(x):
    x = x - x.mean(axis=-1, keepdims=True)
    return np.sum(x[..., 1:] * x[..., :-1], axis=-1) / np.sum(x * x, axis=-1)


def test_wavelet_reconstruction_and_decorrelation():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 1024))
    d = dwt(x, 7)
    recon = np.abs(idwt(d) - x).max()
    parseval = np.abs((d.coefficients() ** 2).sum(-1) / (x ** 2).sum(-1) - 1).max()

    y = simulate_fgn(FgnSpec(0.8), 1024, seed=3, size=100)
    dy = dwt(y, 7)
    raw = np.median(_lag1(y))
    per_level = np.abs(np.array([_lag1(c) for c in dy.detail]))   # (levels, replicates)
    long_levels = [j for j, c in enumerate(dy.detail) if c.shape[-1] >= 100]
    wavelet = np.median(per_level[long_levels].max(axis=0))
    all_levels = np.median(per_level.max(axis=0))
    ok = recon < 1e-10 and parseval < 1e-10 and wavelet < 0.2 and raw > 0.4
    assert record_criterion(3, ok, f"reconstruction {recon:.1e}, Parseval {parseval:.1e}, "
                                   f"median max |ACF1| {wavelet:.3f} on levels with >=100 "
                                   f"coefficients ({all_levels:.3f} over all levels), "
                                   f"raw {raw:.3f}")


# ---- 4: fGn autocovariance --------------------------------------------------

@pytest.mark.parametrize("h", [0.3, 0.5, 0.8])
def test_fgn_autocovariance(h):
    n, reps = 4096, 200
    x = simulate_fgn(FgnSpec(h), n, seed=int(h * 100), size=reps)
    lags = np.arange(6)
    est = np.array([[np.mean(r[:n - k] * r[k:]) for k in lags] for r in x])
    mean = est.mean(axis=0)
    se = est.std(axis=0, ddof=1) / math.sqrt(reps)
    z = np.abs(mean - fgn_autocovariance(FgnSpec(h), lags)) / se
    assert record_criterion(4, bool(np.all(z < 3)), f"H={h} max |z| {z.max():.2f} over lags 0-5")


# ---- 5: SPDE prior ----------------------------------------------------------

def test_spde_prior():
    mesh = unit_square_mesh(30)
    fem = assemble_fem(mesh)
    rho = 0.3
    kappa = kappa_from_range(rho)
    cov = np.linalg.inv(precision_stationary(fem, kappa).toarray())
    sd = np.sqrt(np.diag(cov))
    v = mesh.vertices
    inner = np.all((v > rho) & (v < 1 - rho), axis=1)
    sd_err = np.abs(sd[inner] * math.sqrt(4 * math.pi) * kappa - 1).max()
    c = int(np.argmin(((v - 0.5) ** 2).sum(1)))
    dist = np.linalg.norm(v - v[c], axis=1)
    ring = np.abs(dist - rho) < 0.02
    corr = cov[c, ring] / (sd[c] * sd[ring])

    delta = np.random.default_rng(0).standard_normal(mesh.n_vertices)
    fld = NonstatField(0.0, 0.0, delta, sigma0=1.0, rho0=rho)
    Qn = precision_nonstationary(fem, fld)
    ratio = Qn.data / precision_stationary(fem, fld.kappa).tocsr()[Qn.nonzero()].A1
    spread = np.ptp(ratio) / ratio.mean()
    ok = (mesh.n_vertices <= 900 and sd_err < 0.1 and np.all((corr > 0.05) & (corr < 0.25))
          and spread < 1e-10)
    matern = kappa * rho * special.kv(1, kappa * rho)
    assert record_criterion(5, ok, f"{mesh.n_vertices} nodes, sd rel err {sd_err:.3f}, "
                                   f"corr at range {corr.min():.3f}-{corr.max():.3f} "
                                   f"(Matern {matern:.3f}), theta=0 spread {spread:.1e}")


# ---- 6: inference against a dense oracle ------------------------------------

def test_inference_matches_dense_oracle():
    spec = SliceSimSpec(mask=np.ones((7, 7), bool), sites=[Site("a", (3.0, 3.0), 2.5, 0.1, 0.8)],
                        strengths=(2.0,), n_scans=128)
    sim = generate_slice_simulation(spec, 2)
    t0 = time.perf_counter()
    est = NSVRBayesGLM(n_clusters=2, n_per_axis=3, random_state=0)
    est.fit(sim.Y, sim.design, sim.mesh, sim.parcellation)
    secs = time.perf_counter() - t0

    data = whiten_data(sim.Y, est.design_, filter_id=est.filter_id, min_coeffs=est.min_coeffs)
    w = est.grid_.weights
    means, variances = [], []
    for phi in est.grid_.points:
        m, cov, _ = dense_oracle(phi, data, est.model_)
        means.append(m)
        variances.append(np.diag(cov))
    means, variances = np.array(means), np.array(variances)
    mix_mean = w @ means
    mix_var = w @ (variances + means ** 2) - mix_mean ** 2
    V, K = sim.mesh.n_vertices, est.model_.n_tasks
    mean_err = np.abs(est.coef_.ravel() / mix_mean[:K * V] - 1).max()
    var_err = np.abs(est.coef_sd_.ravel() ** 2 / mix_var[:K * V] - 1).max()
    ok = V <= 50 and mean_err < 1e-6 and var_err < 1e-6 and secs < 60
    assert record_criterion(6, ok, f"V={V} T=128, {len(w)} grid points, rel err mean "
                                   f"{mean_err:.1e} var {var_err:.1e}; fit {secs:.1f} s")


# ---- 7 and 8: detection -----------------------------------------------------

def test_detection_on_slice(slice_sim, slice_fit):
    res = slice_fit[0]
    cmp_ = res.comparisons[TASK2]
    c = cmp_.confusion
    centres = all(cmp_.center_detected.values()) and len(cmp_.center_detected) == 4
    ok = centres and c.false_positive_rate < 0.02
    assert record_criterion(7, ok, f"task 2 centres {cmp_.center_detected}, "
                                   f"FPR {c.false_positive_rate:.4f}")


def test_null_excursions_empty():
    # a quarter-size slice keeps 50 full fits within about 20 minutes
    cfg = _config(1, n_samples=2000)
    spec = SliceSimSpec(shape=(28, 23), sites=[])
    empty = 0
    for rep in range(50):
        sim = generate_slice_simulation(spec, 1000 + rep)
        res = run_nsvr_pipeline(sim.Y, sim.design, sim.mesh, sim.parcellation, cfg)
        empty += all(r.included.size == 0 for r in res.excursions.values())
    assert record_criterion(7, empty >= 45, f"null: {empty}/50 replicates with empty sets")


def test_alpha_insensitivity(slice_fit):
    est = slice_fit[0].estimator
    samples = est.sample(10000, [0, TASK2], task=TASK2)
    d05 = excursion_set(samples, 0.05).mask()
    d10 = excursion_set(samples, 0.10).mask()
    ratio = np.sum(d05 ^ d10) / max(d05.sum(), 1)
    assert record_criterion(8, d05.sum() > 0 and ratio < 0.2,
                            f"|D05|={d05.sum()} |D10|={d10.sum()} ratio {ratio:.3f}")
