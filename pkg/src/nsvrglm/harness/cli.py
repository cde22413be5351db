"""Command line: simulate-slice, prewhiten-bench, fit, excursions, report."""

from __future__ import annotations

import logging
import time
from pathlib import Path

import click
import numpy as np

from ..design import block_schedule, build_design, read_stimulus_file, standardize_columns
from ..estimator import NSVRBayesGLM
from ..excursions import (excursion_set, read_activation_map, sample_posterior_field,
                          write_activation_map)
from ..hurst import read_parcellation, write_parcellation
from ..mesh import read_mesh, write_mesh
from .config import load_config
from .files import read_series, read_truth, write_series, write_stimulus_file, write_truth
from .pipeline import compare_activation_maps
from .prewhitening import run_prewhitening_experiment
from .report import ExperimentReport, five_number_summary
from .results import (read_results, rebuild_conditionals, write_fields_csv, write_pgm,
                      write_results)
from .simulation import generate_slice_simulation

logger = logging.getLogger("nsvrglm")


def _image(pixels, values, shape=None):
    shape = shape or (int(pixels[:, 0].max()) + 1, int(pixels[:, 1].max()) + 1)
    img = np.full(shape, np.nan)
    img[pixels[:, 0], pixels[:, 1]] = values
    return img


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose):
    """Spatial Bayesian GLM for fMRI with long-memory noise."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("simulate-slice")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--preview/--no-preview", default=False, help="Write PGM images of the truth.")
def simulate_slice(config_path, out_dir, preview):
    """Simulate a 2-D slice and write series, mesh, parcellation, stimulus and truth files."""
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.slice_spec()
    sim = generate_slice_simulation(spec, cfg.design.seed)
    write_series(out / "series.csv", sim.Y)
    write_mesh(sim.mesh, out / "mesh.txt")
    write_parcellation(sim.parcellation, out / "parcellation.txt")
    courses = block_schedule(len(spec.strengths), spec.n_scans, tr=spec.tr,
                             on=spec.block_on, rest=spec.block_rest)
    write_stimulus_file(out / "stimulus.txt", courses)
    write_truth(out / "truth.csv", sim)
    if preview:
        for k in range(sim.beta_true.shape[0]):
            write_pgm(out / f"truth_task{k + 1}.pgm", sim.to_image(sim.beta_true[k]))
        write_pgm(out / "truth_hurst.pgm", sim.to_image(sim.hurst_true), 0.0, 1.0)
    click.echo(f"{sim.Y.shape[0]} vertices x {sim.Y.shape[1]} scans written to {out}")


@main.command("prewhiten-bench")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Takes the AR coefficients and, unless --seed is given, the seed from [design].")
@click.option("--runs", default=1000, show_default=True)
@click.option("--length", default=256, show_default=True)
@click.option("--beta", default=2.0, show_default=True)
@click.option("--seed", type=int)
@click.option("--whiten-regressor", is_flag=True, help="Filter the regressor as well.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False))
def prewhiten_bench(config_path, runs, length, beta, seed, whiten_regressor, out_path, csv_path):
    """Ordinary versus AR(6)-prewhitened slope estimates."""
    kwargs = {}
    if config_path:
        cfg = load_config(config_path)
        kwargs["ar_coefficients"] = tuple(cfg.design.ar_coefficients)
        seed = cfg.design.seed if seed is None else seed
    if seed is None:
        raise click.UsageError("a seed is required (--seed or a config file)")
    rep = run_prewhitening_experiment(runs, length, beta, seed,
                                      whiten_regressor=whiten_regressor, **kwargs)
    rep.write_json(out_path)
    if csv_path:
        rep.write_summary_csv(csv_path)
    for label, s in rep.summaries.items():
        click.echo(f"{label:22s} mean {s['mean']:.3f}  sd {s['sd']:.3f}")


def _load_inputs(cfg, series, mesh_path, parcellation, stimulus):
    Y = read_series(series)
    mesh = read_mesh(mesh_path)
    parc = read_parcellation(parcellation, n_vertices=Y.shape[0])
    courses, keys = read_stimulus_file(stimulus, cfg.design.tr, Y.shape[1])
    design = build_design(courses, names=[f"task{k}" for k in keys])
    return Y, mesh, parc, design


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--series", required=True, type=click.Path(exists=True))
@click.option("--mesh", "mesh_path", required=True, type=click.Path(exists=True))
@click.option("--parcellation", required=True, type=click.Path(exists=True))
@click.option("--stimulus", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--fields-csv", type=click.Path(dir_okay=False),
              help="Per-vertex posterior means and sds.")
def fit(config_path, series, mesh_path, parcellation, stimulus, out_path, fields_csv):
    """Fit the model and write the results JSON."""
    cfg = load_config(config_path)
    Y, mesh, parc, design = _load_inputs(cfg, series, mesh_path, parcellation, stimulus)
    est = NSVRBayesGLM(**cfg.estimator_params()).fit(Y, design, mesh, parc)
    inputs = {k: str(Path(v).resolve()) for k, v in
              dict(series=series, mesh=mesh_path, parcellation=parcellation,
                   stimulus=stimulus, config=config_path).items()}
    write_results(out_path, est, inputs=inputs, config=cfg.to_dict())
    if fields_csv:
        cols = {}
        for k, name in enumerate(est.design_.task_names):
            cols[f"mean_{name}"] = est.coef_[k]
            cols[f"sd_{name}"] = est.coef_sd_[k]
        cols["hurst_preliminary"] = est.clustering_.preliminary
        cols["cluster"] = est.clustering_.cluster_of_vertex
        write_fields_csv(fields_csv, cols)
    click.echo("H per cluster: " + ", ".join(f"{h:.3f}" for h in est.hurst_))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--alpha", type=float, help="Overrides [excursions] alpha.")
@click.option("--sign", type=click.Choice(["positive", "negative", "both"]))
@click.option("--n-samples", type=int)
def excursions(config_path, results_path, out_dir, alpha, sign, n_samples):
    """Activation maps from a fitted results file (conditionals are rebuilt from its inputs)."""
    cfg = load_config(config_path)
    res = read_results(results_path)
    inp = res["inputs"]
    Y, mesh, _, design = _load_inputs(cfg, inp["series"], inp["mesh"], inp["parcellation"],
                                      inp["stimulus"])
    if res["model"].get("standardize", True):
        design = standardize_columns(design)
    exc = cfg.excursions
    alpha = exc.alpha if alpha is None else alpha
    sign = exc.sign if sign is None else sign
    n_samples = exc.n_samples if n_samples is None else n_samples
    conds = rebuild_conditionals(res, Y, design, mesh)
    weights = np.asarray(res["grid"]["weights"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    adj = mesh.adjacency()
    for k, name in enumerate(res["tasks"]):
        samples = sample_posterior_field(conds, weights, n_samples, [exc.seed, k], task=k)
        pos = neg = None
        if sign in ("positive", "both"):
            pos = excursion_set(samples, alpha, "positive", adj, exc.min_component_size)
        if sign in ("negative", "both"):
            neg = excursion_set(samples, alpha, "negative", adj, exc.min_component_size)
        write_activation_map(out / f"activation_{name}.txt", Y.shape[0], pos, neg, task=name)
        n_pos = 0 if pos is None else pos.included.size
        n_neg = 0 if neg is None else neg.included.size
        click.echo(f"{name}: {n_pos} positive, {n_neg} negative vertices")


@main.command()
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--activation-dir", type=click.Path(exists=True, file_okay=False))
@click.option("--truth", "truth_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--preview-dir", type=click.Path(file_okay=False),
              help="Write PGM maps (needs --truth for pixel positions).")
def report(results_path, activation_dir, truth_path, out_path, preview_dir):
    """Summarise a fit and score activation maps against a truth file."""
    t0 = time.perf_counter()
    res = read_results(results_path)
    rep = ExperimentReport(name="report", hurst=res["hurst"])
    for name in res["tasks"]:
        rep.summaries[f"{name}/posterior_mean"] = five_number_summary(res["mean"][name])
    rep.extra = {"sigma": res["sigma"], "clustering": res["clustering"],
                 "fit_timings": res.get("timings", {})}
    truth = pixels = None
    if truth_path:
        truth, pixels = read_truth(truth_path)
    maps = {}
    if activation_dir:
        for k, name in enumerate(res["tasks"]):
            path = Path(activation_dir) / f"activation_{name}.txt"
            if not path.exists():
                continue
            labels, meta = read_activation_map(path)
            maps[name] = labels
            rep.activation[name] = np.flatnonzero(labels == 1).tolist()
            rep.extra[f"{name}/excursions"] = meta
            if truth is not None:
                cmp_ = compare_activation_maps(labels == 1, truth.active[k],
                                               truth.site_of_vertex, truth.center_vertices)
                rep.confusion[name] = cmp_.confusion
                rep.extra[f"{name}/sites"] = cmp_.to_dict()
                if preview_dir:
                    Path(preview_dir).mkdir(parents=True, exist_ok=True)
                    write_pgm(Path(preview_dir) / f"errors_{name}.pgm",
                              _image(pixels, cmp_.error_map), -1.0, 1.0)
    if preview_dir and pixels is not None:
        Path(preview_dir).mkdir(parents=True, exist_ok=True)
        for name in res["tasks"]:
            write_pgm(Path(preview_dir) / f"mean_{name}.pgm",
                      _image(pixels, np.asarray(res["mean"][name])))
            if name in maps:
                write_pgm(Path(preview_dir) / f"activation_{name}.pgm",
                          _image(pixels, maps[name]), -1.0, 1.0)
    rep.timings = {"report_s": time.perf_counter() - t0}
    rep.write_json(out_path)
    for name, c in rep.confusion.items():
        click.echo(f"{name}: TP {c.tp} FP {c.fp} TN {c.tn} FN {c.fn} "
                   f"(FPR {c.false_positive_rate:.4f}, sensitivity {c.sensitivity:.3f})")
    click.echo("H per cluster: " + ", ".join(f"{h:.3f}" for h in res["hurst"]))


if __name__ == "__main__":
    main()
