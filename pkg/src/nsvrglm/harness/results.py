"""Results JSON, per-vertex CSV fields and greyscale previews."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..inference import ModelSpec, Priors, conditional_posterior, whiten_data
from ..mesh import assemble_fem
from .report import to_jsonable

__all__ = [
    "results_dict",
    "write_results",
    "read_results",
    "rebuild_conditionals",
    "write_fields_csv",
    "write_pgm",
]

RESULTS_VERSION = 1


def results_dict(est, inputs: dict | None = None, config: dict | None = None) -> dict:
    """Everything needed to report on a fit or to rebuild its conditionals."""
    post, grid, clu, model = est.posterior_, est.grid_, est.clustering_, est.model_
    names = list(est.design_.task_names)
    return to_jsonable({
        "version": RESULTS_VERSION,
        "n_vertices": est.n_vertices_,
        "tasks": names,
        "mean": {n: post.mean[k] for k, n in enumerate(names)},
        "sd": {n: post.sd[k] for k, n in enumerate(names)},
        "hurst": post.hurst,
        "sigma": post.sigma,
        "theta": post.theta,
        "clustering": clu.to_dict(),
        "cluster_of_vertex": clu.cluster_of_vertex,
        "delta": est.delta_,
        "grid": {
            "names": grid.names,
            "mode": grid.mode,
            "scales": grid.scales,
            "points": grid.points,
            "log_posterior": grid.log_post,
            "weights": grid.weights,
            "n_evaluations": grid.n_evaluations,
            "converged": grid.converged,
        },
        "axis_marginals": post.axis_marginals,
        "model": {"sigma0": model.sigma0, "rho0": model.rho0, "alpha": model.alpha,
                  "priors": asdict(model.priors),
                  "filter": est.filter_id, "min_coeffs": est.min_coeffs,
                  "standardize": est.standardize},
        "inputs": inputs or {},
        "config": config or {},
        "timings": est.timings_,
    })


def write_results(path, est, inputs=None, config=None) -> dict:
    d = results_dict(est, inputs, config)
    Path(path).write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")
    return d


def read_results(path) -> dict:
    d = json.loads(Path(path).read_text())
    if d.get("version") != RESULTS_VERSION:
        raise ValueError(f"{path}: unsupported results version {d.get('version')!r}")
    return d


def rebuild_conditionals(results: dict, Y, design, mesh) -> list:
    """Conditional posteriors at the stored grid points, for sampling after a reload.

    ``design`` must already be in the form used for the fit (standardised
    when the fit standardised it).
    """
    m = results["model"]
    delta = np.asarray(results["delta"], dtype=float)
    data = whiten_data(Y, design, filter_id=m["filter"], min_coeffs=m["min_coeffs"])
    pri = m.get("priors") or {}
    model = ModelSpec(mesh=mesh, fem=assemble_fem(mesh),
                      cluster_of_vertex=np.asarray(results["cluster_of_vertex"]),
                      n_clusters=len(results["hurst"]), delta=delta,
                      n_tasks=delta.shape[0], n_nuisance=data.n_regressors - delta.shape[0],
                      priors=Priors(**pri), sigma0=m["sigma0"], rho0=m["rho0"],
                      alpha=m["alpha"])
    pts = np.asarray(results["grid"]["points"], dtype=float)
    return [conditional_posterior(x, data, model) for x in pts]


def write_fields_csv(path, columns: dict) -> None:
    """One row per vertex; ``columns`` maps a header to a length-V array."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = {a.shape[0] for a in arrays}
    if len(n) != 1:
        raise ValueError("all columns must have the same length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex"] + names)
        for v in range(n.pop()):
            w.writerow([v] + [a[v].item() if hasattr(a[v], "item") else a[v] for a in arrays])


def write_pgm(path, image, vmin=None, vmax=None) -> None:
    """Plain (P2) greyscale image; NaN pixels are drawn black."""
    img = np.asarray(image, dtype=float)
    finite = np.isfinite(img)
    lo = np.nanmin(img) if vmin is None else vmin
    hi = np.nanmax(img) if vmax is None else vmax
    if not finite.any():
        lo, hi = 0.0, 1.0
    span = hi - lo if hi > lo else 1.0
    g = np.where(finite, np.clip((img - lo) / span, 0, 1) * 254 + 1, 0).round().astype(int)
    rows = [" ".join(map(str, r)) for r in g]
    Path(path).write_text(f"P2\n{img.shape[1]} {img.shape[0]}\n255\n" + "\n".join(rows) + "\n")
