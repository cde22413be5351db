"""Spatial Bayesian GLM for fMRI with long-memory noise and non-stationary spatial priors."""

from .design import DesignMatrix, StimulusCourse, build_design, canonical_hrf
from .estimator import NSVRBayesGLM
from .excursions import ExcursionResult, excursion_set, sample_posterior_field
from .fgn import FgnSpec, fgn_autocovariance, simulate_fgn
from .hurst import Parcellation, build_clustering, preliminary_hurst_map
from .mesh import TriangularMesh, assemble_fem, grid_mesh, read_mesh, write_mesh
from .wavelet import dwt, idwt

__version__ = "0.1.0"

__all__ = [
    "DesignMatrix",
    "StimulusCourse",
    "build_design",
    "canonical_hrf",
    "NSVRBayesGLM",
    "ExcursionResult",
    "excursion_set",
    "sample_posterior_field",
    "FgnSpec",
    "fgn_autocovariance",
    "simulate_fgn",
    "Parcellation",
    "build_clustering",
    "preliminary_hurst_map",
    "TriangularMesh",
    "assemble_fem",
    "grid_mesh",
    "read_mesh",
    "write_mesh",
    "dwt",
    "idwt",
]
