"""End-to-end fit, activation detection and scoring against a known truth."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..estimator import NSVRBayesGLM
from ..excursions import ExcursionResult
from .report import Confusion, ExperimentReport, five_number_summary

logger = logging.getLogger(__name__)

__all__ = [
    "GroundTruth",
    "MapComparison",
    "PipelineResult",
    "compare_activation_maps",
    "truth_from_simulation",
    "run_nsvr_pipeline",
]


@dataclass
class GroundTruth:
    active: np.ndarray                 # (K, V) true activation masks
    site_of_vertex: np.ndarray | None = None
    center_vertices: np.ndarray | None = None
    hurst: np.ndarray | None = None    # (V,) true Hurst values


def truth_from_simulation(sim) -> GroundTruth:
    return GroundTruth(active=sim.beta_true > 0, site_of_vertex=sim.site_of_vertex,
                       center_vertices=sim.site_centers(), hurst=sim.hurst_true)


@dataclass
class MapComparison:
    confusion: Confusion
    site_sensitivity: dict
    center_detected: dict
    error_map: np.ndarray              # +1 false positive, -1 false negative, 0 correct

    def to_dict(self) -> dict:
        return {"confusion": self.confusion.to_dict(),
                "site_sensitivity": self.site_sensitivity,
                "center_detected": self.center_detected}


def compare_activation_maps(estimated, truth, site_of_vertex=None,
                            center_vertices=None) -> MapComparison:
    """Vertex-wise confusion counts, per-site sensitivity and an error map."""
    est = np.asarray(estimated, dtype=bool)
    tru = np.asarray(truth, dtype=bool)
    if est.shape != tru.shape:
        raise ValueError(f"estimated map {est.shape} and truth {tru.shape} differ")
    conf = Confusion(tp=int(np.sum(est & tru)), fp=int(np.sum(est & ~tru)),
                     tn=int(np.sum(~est & ~tru)), fn=int(np.sum(~est & tru)))
    err = np.zeros(est.shape, dtype=np.int64)
    err[est & ~tru] = 1
    err[~est & tru] = -1
    sens, centers = {}, {}
    if site_of_vertex is not None:
        sites = np.asarray(site_of_vertex)
        for s in np.unique(sites[sites >= 0]):
            inside = (sites == s) & tru
            sens[int(s)] = float(est[inside].mean()) if inside.any() else float("nan")
    if center_vertices is not None:
        for s, v in enumerate(np.asarray(center_vertices)):
            centers[int(s)] = bool(est[v])
    return MapComparison(conf, sens, centers, err)


@dataclass
class PipelineResult:
    estimator: NSVRBayesGLM
    excursions: dict = field(default_factory=dict)   # (task, sign) -> ExcursionResult
    comparisons: dict = field(default_factory=dict)  # task -> MapComparison
    report: ExperimentReport | None = None


class _Stages:
    """Records completed stages, optionally mirrored to ``stages.json``."""

    def __init__(self, output_dir):
        self.path = None if output_dir is None else Path(output_dir) / "stages.json"
        self.done = []

    def _flush(self, failed=None):
        if self.path is not None:
            self.path.write_text(json.dumps({"completed": self.done, "failed": failed}) + "\n")

    def run(self, name, fn, *args, **kwargs):
        try:
            out = fn(*args, **kwargs)
        except Exception:
            self._flush(failed=name)
            raise
        self.done.append(name)
        self._flush()
        return out


def run_nsvr_pipeline(Y, design, mesh, parcellation, config, truth: GroundTruth | None = None,
                      output_dir=None, tasks=None) -> PipelineResult:
    """Fit, extract activation sets for each task and score them when the truth is known.

    ``config`` is a :class:`~nsvrglm.harness.config.RunConfig`.  ``tasks``
    limits the excursion step to a subset of task indices.
    """
    if output_dir is not None:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
    stages = _Stages(output_dir)
    t0 = time.perf_counter()
    est = NSVRBayesGLM(**config.estimator_params())
    stages.run("fit", est.fit, Y, design, mesh, parcellation)

    exc_cfg = config.excursions
    signs = ["positive", "negative"] if exc_cfg.sign == "both" else [exc_cfg.sign]
    task_ids = range(est.design_.n_tasks) if tasks is None else tasks

    def _excursions():
        out = {}
        for k in task_ids:
            samples = est.sample(exc_cfg.n_samples, [exc_cfg.seed, k], task=k)
            for sign in signs:
                out[(k, sign)] = est.excursions(k, alpha=exc_cfg.alpha, sign=sign,
                                                samples=samples)
        return out

    t = time.perf_counter()
    exc = stages.run("excursions", _excursions)
    est.timings_["excursions_s"] = time.perf_counter() - t

    rep = ExperimentReport(name="nsvr")
    rep.hurst = est.hurst_.tolist()
    names = est.design_.task_names
    for k in task_ids:
        rep.summaries[f"{names[k]}/posterior_mean"] = five_number_summary(est.coef_[k])
    for (k, sign), r in exc.items():
        rep.activation[f"{names[k]}/{sign}"] = r.included.tolist()
    rep.extra = {"sigma": est.sigma_, "cluster_of_region": est.clustering_.cluster_of_region,
                 "region_medians": est.clustering_.region_medians,
                 "grid_points": int(len(est.grid_.points)),
                 "excursions": {f"{names[k]}/{s}": {kk: vv for kk, vv in r.to_dict().items()
                                                    if kk != "included"}
                                for (k, s), r in exc.items()}}

    comps = {}
    if truth is not None:
        def _score():
            out = {}
            for k in task_ids:
                r = exc.get((k, "positive"))
                if r is None:
                    continue
                out[k] = compare_activation_maps(r.mask(), truth.active[k],
                                                 truth.site_of_vertex, truth.center_vertices)
            return out
        comps = stages.run("metrics", _score)
        for k, c in comps.items():
            rep.confusion[names[k]] = c.confusion
            rep.extra[f"{names[k]}/sites"] = c.to_dict()
    rep.timings = dict(est.timings_, total_s=time.perf_counter() - t0)
    return PipelineResult(estimator=est, excursions=exc, comparisons=comps, report=rep)
