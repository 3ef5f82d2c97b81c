"""Symmetric wavefunctions with prescribed one-particle densities on a grid.

Three stages: ``reallocation`` matches a non-negative field to a new
marginal, ``smoothing`` regularises it without moving the marginal, and
``sign_lift`` attaches smoothed phases for sign-changing targets.
"""
from ._kernels import BACKEND
from .errors import WavemargError
from .grid import GridSpec, make_grid, marginal
from .pipeline import ExperimentConfig, run_pipeline
from .reallocation import l2_match
from .sign_lift import assemble, extract_sign, lift, subsequence_select
from .smoothing import gauss_stencil, theta_eps

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ExperimentConfig",
    "GridSpec",
    "WavemargError",
    "assemble",
    "extract_sign",
    "gauss_stencil",
    "l2_match",
    "lift",
    "make_grid",
    "marginal",
    "run_pipeline",
    "subsequence_select",
    "theta_eps",
]
