"""TOML run configuration with sections [design], [sites], [priors], [inference], [excursions]."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..validation import check_seed
from .prewhitening import DEFAULT_AR_COEFFICIENTS, check_stationary
from .simulation import Site, SliceSimSpec, default_mask

__all__ = [
    "DesignConfig",
    "SitesConfig",
    "PriorsConfig",
    "InferenceConfig",
    "ExcursionsConfig",
    "RunConfig",
    "load_config",
    "parse_config",
    "read_mask",
]


@dataclass
class DesignConfig:
    seed: int
    n_scans: int = 512
    tr: float = 1.0
    block_on: float = 20.0
    block_rest: float = 10.0
    strengths: list = field(default_factory=lambda: [2.0, 3.0])
    noise_sd: float = 1.0
    background_hurst: float = 0.5
    ar_coefficients: list = field(default_factory=lambda: list(DEFAULT_AR_COEFFICIENTS))
    stimulus_file: str | None = None


@dataclass
class SitesConfig:
    mask_file: str | None = None
    shape: list = field(default_factory=lambda: [55, 46])
    n_background_regions: int = 1
    site: list | None = None    # tables: name, center, radius, smoothness, hurst


@dataclass
class PriorsConfig:
    sigma_shape: float = 1.0
    sigma_rate: float = 1.0
    theta_precision: float = 0.3
    nuisance_precision: float = 1e-8
    sigma0: float = 1.0
    rho0: float | None = None


@dataclass
class InferenceConfig:
    seed: int
    n_clusters: int = 3
    filter: str = "db4"
    min_coeffs: int = 16
    spde_order: int = 2
    max_evaluations: int = 3000
    n_per_axis: int = 5
    prune: float = 10.0
    fd_step: float = 0.05
    center_delta: bool = False


@dataclass
class ExcursionsConfig:
    seed: int
    alpha: float = 0.05
    n_samples: int = 10000
    sign: str = "positive"      # positive, negative or both
    min_component_size: int = 1


@dataclass
class RunConfig:
    design: DesignConfig
    sites: SitesConfig
    priors: PriorsConfig
    inference: InferenceConfig
    excursions: ExcursionsConfig
    base_dir: Path = Path(".")

    def estimator_params(self) -> dict:
        inf, pr = self.inference, self.priors
        return dict(n_clusters=inf.n_clusters, filter_id=inf.filter,
                    min_coeffs=inf.min_coeffs, spde_order=inf.spde_order,
                    sigma0=pr.sigma0, rho0=pr.rho0, sigma_shape=pr.sigma_shape,
                    sigma_rate=pr.sigma_rate, theta_precision=pr.theta_precision,
                    nuisance_precision=pr.nuisance_precision,
                    max_evaluations=inf.max_evaluations, n_per_axis=inf.n_per_axis,
                    prune=inf.prune, fd_step=inf.fd_step,
                    center_delta=inf.center_delta, random_state=inf.seed)

    def slice_spec(self) -> SliceSimSpec:
        d, s = self.design, self.sites
        mask = (read_mask(self.resolve(s.mask_file)) if s.mask_file
                else default_mask(tuple(s.shape)))
        sites = None
        if s.site is not None:
            sites = [Site(name=str(t.get("name", f"site{i + 1}")),
                          center=tuple(float(c) for c in t["center"]),
                          radius=float(t["radius"]), smoothness=float(t["smoothness"]),
                          hurst=float(t["hurst"]))
                     for i, t in enumerate(s.site)]
        return SliceSimSpec(shape=tuple(mask.shape), mask=mask, sites=sites,
                            strengths=tuple(d.strengths), n_scans=d.n_scans,
                            noise_sd=d.noise_sd, background_hurst=d.background_hurst,
                            tr=d.tr, block_on=d.block_on, block_rest=d.block_rest,
                            n_background_regions=s.n_background_regions)

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name != "base_dir":
                out[f.name] = asdict(getattr(self, f.name))
        return out


def _section(cls, raw: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"[{name}] has unknown keys: {sorted(unknown)}")
    try:
        obj = cls(**raw)
    except TypeError as exc:
        raise ValueError(f"[{name}]: {exc}") from exc
    if "seed" in known:
        obj.seed = check_seed(obj.seed, f"[{name}] seed")
    return obj


def parse_config(raw: dict, base_dir=".") -> RunConfig:
    sections = ("design", "sites", "priors", "inference", "excursions")
    extra = set(raw) - set(sections)
    if extra:
        raise ValueError(f"unknown config sections: {sorted(extra)}")
    for name in ("design", "inference", "excursions"):
        if "seed" not in raw.get(name, {}):
            raise ValueError(f"[{name}] seed is mandatory")
    cfg = RunConfig(
        design=_section(DesignConfig, raw.get("design", {}), "design"),
        sites=_section(SitesConfig, raw.get("sites", {}), "sites"),
        priors=_section(PriorsConfig, raw.get("priors", {}), "priors"),
        inference=_section(InferenceConfig, raw.get("inference", {}), "inference"),
        excursions=_section(ExcursionsConfig, raw.get("excursions", {}), "excursions"),
        base_dir=Path(base_dir),
    )
    if cfg.excursions.sign not in ("positive", "negative", "both"):
        raise ValueError("[excursions] sign must be positive, negative or both")
    if not 0 < cfg.excursions.alpha < 1:
        raise ValueError("[excursions] alpha must lie in (0, 1)")
    if not check_stationary(cfg.design.ar_coefficients):
        raise ValueError("[design] ar_coefficients are not stationary")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return parse_config(raw, base_dir=path.parent)


def read_mask(path) -> np.ndarray:
    """Boolean mask from a whitespace-separated 0/1 text grid."""
    arr = np.loadtxt(path, dtype=float, ndmin=2)
    if not np.all(np.isin(arr, (0.0, 1.0))):
        raise ValueError(f"{path}: mask entries must be 0 or 1")
    return arr.astype(bool)
