"""Picard iteration schemes for viscous Burgers and controlled Navier-Stokes
in Leray form, with kernel-split pressure, Gaussian-majorant diagnostics and
independent oracles."""

from .field import Grid, ScalarField, VectorField, convolve, norm, vector_norm
from .kernels import CutoffSpec, GaussianMajorant, build_kernel_split, poisson_kernel
from .leray import nonlinear_source, pressure_gradient_kernel, pressure_gradient_spectral
from .parabolic import AdvectionDiffusionProblem, Trajectory, propagate_heat, solve

__all__ = [
    "AdvectionDiffusionProblem",
    "CutoffSpec",
    "GaussianMajorant",
    "Grid",
    "ScalarField",
    "Trajectory",
    "VectorField",
    "build_kernel_split",
    "convolve",
    "nonlinear_source",
    "norm",
    "poisson_kernel",
    "pressure_gradient_kernel",
    "pressure_gradient_spectral",
    "propagate_heat",
    "solve",
    "vector_norm",
]
