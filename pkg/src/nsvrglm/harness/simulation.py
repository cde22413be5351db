"""Two-dimensional brain-slice simulation with activation sites of differing temporal memory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..design import DesignMatrix, block_schedule, build_design, standardize_columns
from ..fgn import FgnSpec, simulate_fgn
from ..hurst import Parcellation
from ..mesh import TriangularMesh, grid_mesh

__all__ = [
    "Site",
    "SliceSimSpec",
    "SliceSimulation",
    "default_mask",
    "default_sites",
    "activation_field",
    "generate_slice_simulation",
]


def default_mask(shape=(55, 46)) -> np.ndarray:
    """Elliptical brain-like slice with a central ventricle hole."""
    nr, nc = shape
    r, c = np.mgrid[0:nr, 0:nc].astype(float)
    cr, cc = (nr - 1) / 2.0, (nc - 1) / 2.0
    brain = ((r - cr) / (nr / 2.0 - 0.5)) ** 2 + ((c - cc) / (nc / 2.0 - 0.5)) ** 2 <= 1.0
    ventricle = ((r - cr) / 5.0) ** 2 + ((c - cc) / 2.5) ** 2 <= 1.0
    return brain & ~ventricle


@dataclass(frozen=True)
class Site:
    name: str
    center: tuple       # (row, col)
    radius: float
    smoothness: float   # decay rate lambda
    hurst: float


def default_sites(shape=(55, 46)) -> list:
    nr, nc = shape
    cr, cc = (nr - 1) / 2.0, (nc - 1) / 2.0
    return [
        Site("top", (9.0, cc), 6.0, 0.2, 0.8),
        Site("right", (cr, nc - 9.0), 5.0, 0.2, 0.4),
        Site("bottom", (nr - 10.0, cc), 7.0, 0.05, 0.4),
        Site("left", (cr, 8.0), 6.0, 0.05, 0.8),
    ]


@dataclass
class SliceSimSpec:
    """Image, sites, per-task signal strengths and noise settings."""

    shape: tuple = (55, 46)
    mask: np.ndarray | None = None
    sites: list | None = None        # None: the four default sites
    strengths: tuple = (2.0, 3.0)
    n_scans: int = 512
    noise_sd: float = 1.0
    background_hurst: float = 0.5
    tr: float = 1.0
    block_on: float = 20.0
    block_rest: float = 10.0
    n_background_regions: int = 1

    def __post_init__(self):
        if self.mask is None:
            self.mask = default_mask(self.shape)
        self.mask = np.asarray(self.mask, dtype=bool)
        self.shape = tuple(self.mask.shape)
        if self.sites is None:
            self.sites = default_sites(self.shape)
        for i, a in enumerate(self.sites):
            for b in self.sites[i + 1:]:
                gap = np.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
                if gap < a.radius + b.radius:
                    raise ValueError(f"sites {a.name!r} and {b.name!r} overlap")


def activation_field(shape, site: Site, magnitude: float) -> np.ndarray:
    """``M exp(-lambda d)`` inside the site radius, zero outside."""
    r, c = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    d = np.hypot(r - site.center[0], c - site.center[1])
    return np.where(d < site.radius, magnitude * np.exp(-site.smoothness * d), 0.0)


@dataclass
class SliceSimulation:
    Y: np.ndarray                  # (V, T) vertex series
    design: DesignMatrix           # standardised task regressors
    mesh: TriangularMesh
    pixels: np.ndarray             # (V, 2) row/col of each vertex
    beta_true: np.ndarray          # (K, V)
    active_true: np.ndarray        # (V,) inside any site
    site_of_vertex: np.ndarray     # (V,) -1 background, else site index
    hurst_true: np.ndarray         # (V,)
    parcellation: Parcellation
    spec: SliceSimSpec

    def to_image(self, values, fill=np.nan) -> np.ndarray:
        img = np.full(self.spec.shape, fill, dtype=float)
        img[self.pixels[:, 0], self.pixels[:, 1]] = values
        return img

    def site_centers(self) -> np.ndarray:
        """Vertex index nearest to each site centre."""
        out = []
        for s in self.spec.sites:
            d = np.hypot(self.pixels[:, 0] - s.center[0], self.pixels[:, 1] - s.center[1])
            out.append(int(np.argmin(d)))
        return np.array(out)


def generate_slice_simulation(spec: SliceSimSpec, seed) -> SliceSimulation:
    """Simulate task responses plus fGn noise at every pixel of the analysis mesh."""
    rng = np.random.default_rng(seed)
    mesh, pix = grid_mesh(spec.mask)
    V = mesh.n_vertices
    K = len(spec.strengths)
    courses = block_schedule(K, spec.n_scans, tr=spec.tr, on=spec.block_on, rest=spec.block_rest)
    design = standardize_columns(build_design(courses))

    beta = np.zeros((K, V))
    site_of = -np.ones(V, dtype=np.int64)
    hurst = np.full(V, spec.background_hurst)
    for i, site in enumerate(spec.sites):
        d = np.hypot(pix[:, 0] - site.center[0], pix[:, 1] - site.center[1])
        inside = d < site.radius
        site_of[inside] = i
        hurst[inside] = site.hurst
        for k, m in enumerate(spec.strengths):
            beta[k, inside] = m * np.exp(-site.smoothness * d[inside])

    noise = np.empty((V, spec.n_scans))
    for h in np.unique(hurst):
        rows = np.flatnonzero(hurst == h)
        noise[rows] = simulate_fgn(FgnSpec(float(h), spec.noise_sd ** 2), spec.n_scans,
                                   seed=rng, size=rows.size)
    Y = beta.T @ design.tasks.T + noise

    region = np.empty(V, dtype=np.int64)
    n_sites = len(spec.sites)
    region[site_of >= 0] = site_of[site_of >= 0] + 1
    bg = np.flatnonzero(site_of < 0)
    nb = max(1, int(spec.n_background_regions))
    if nb == 1:
        region[bg] = n_sites + 1
    else:
        # angular sectors around the image centre
        cr, cc = (spec.shape[0] - 1) / 2.0, (spec.shape[1] - 1) / 2.0
        ang = np.arctan2(pix[bg, 0] - cr, pix[bg, 1] - cc)
        sector = np.minimum(((ang + np.pi) / (2 * np.pi) * nb).astype(int), nb - 1)
        region[bg] = n_sites + 1 + sector
    return SliceSimulation(Y=Y, design=design, mesh=mesh, pixels=pix, beta_true=beta,
                           active_true=site_of >= 0, site_of_vertex=site_of,
                           hurst_true=hurst, parcellation=Parcellation(region), spec=spec)
