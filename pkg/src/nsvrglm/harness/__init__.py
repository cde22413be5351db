"""Experiments, configuration and the command line."""

from .pipeline import compare_activation_maps, run_nsvr_pipeline
from .prewhitening import run_prewhitening_experiment
from .simulation import SliceSimSpec, generate_slice_simulation

__all__ = [
    "compare_activation_maps",
    "run_nsvr_pipeline",
    "run_prewhitening_experiment",
    "SliceSimSpec",
    "generate_slice_simulation",
]
