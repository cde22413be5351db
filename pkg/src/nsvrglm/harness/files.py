"""Plain-text files exchanged between CLI steps."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .pipeline import GroundTruth

__all__ = ["write_series", "read_series", "write_stimulus_file", "write_truth", "read_truth"]


def write_series(path, Y) -> None:
    """(V, T) matrix, one comma-separated row per vertex."""
    np.savetxt(path, np.asarray(Y), delimiter=",", fmt="%.10g")


def read_series(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_stimulus_file(path, courses) -> None:
    """``onset_s duration_s task_id`` rows, task ids starting at 1."""
    lines = ["# onset_s duration_s task_id"]
    for k, course in enumerate(courses, start=1):
        lines += [f"{on:g} {dur:g} {k}" for on, dur in course.intervals]
    Path(path).write_text("\n".join(lines) + "\n")


def write_truth(path, sim) -> None:
    """Per-vertex pixel position, site, Hurst value and true coefficients."""
    K = sim.beta_true.shape[0]
    centers = set(sim.site_centers().tolist())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "row", "col", "site", "center", "hurst"]
                   + [f"beta_task{k + 1}" for k in range(K)])
        for v in range(sim.beta_true.shape[1]):
            w.writerow([v, int(sim.pixels[v, 0]), int(sim.pixels[v, 1]),
                        int(sim.site_of_vertex[v]), int(v in centers), sim.hurst_true[v]]
                       + [f"{b:.10g}" for b in sim.beta_true[:, v]])


def read_truth(path):
    """Return ``(GroundTruth, pixels)`` from a file written by :func:`write_truth`."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty truth file")
    beta_cols = sorted((c for c in rows[0] if c.startswith("beta_task")),
                       key=lambda c: int(c[len("beta_task"):]))
    beta = np.array([[float(r[c]) for r in rows] for c in beta_cols])
    site = np.array([int(r["site"]) for r in rows])
    center_v = np.array([int(r["vertex"]) for r in rows if r["center"] == "1"])
    center_site = site[center_v]
    order = np.argsort(center_site)
    pixels = np.array([[int(r["row"]), int(r["col"])] for r in rows])
    truth = GroundTruth(active=beta > 0, site_of_vertex=site,
                        center_vertices=center_v[order],
                        hurst=np.array([float(r["hurst"]) for r in rows]))
    return truth, pixels
