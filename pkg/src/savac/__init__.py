"""Finite element SAV integrators for the stochastic Allen-Cahn equation.

The package solves the periodic two-dimensional Allen-Cahn equation with
multiplicative spectral noise using linearly implicit scalar-auxiliary-
variable (SAV) time steps, and ships a Monte-Carlo harness that measures
pathwise refinement errors and compares the SAV variants against a fully
implicit reference scheme on shared noise realisations.
"""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, parse_config, preset_config
from .fem import FemOperators, assemble, discrete_laplacian, inner_h, norm_grad, norm_h
from .linsolve import SolverError, SpdSystem, build_sav_system, rank_one_solve, spd_solve
from .mesh import Mesh, build_torus_mesh, node_coordinates
from .montecarlo import EnsembleReport, ensemble_rms, eoc, run_ensemble
from .noise import (
    NoiseField,
    NoisePath,
    SpectralBasis,
    apply_phi_h,
    build_basis,
    make_noise_field,
    sample_path,
    wiener_increment,
)
from .potential import PotentialParams, discrete_energy, total_energy
from .report import RunManifest, emit_report
from .schemes import (
    NewtonConfig,
    SavState,
    SchemeError,
    SchemeKind,
    StepDiagnostics,
    augmented_sav_step,
    chemical_potential,
    implicit_step,
    initial_state,
    standard_sav_step,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "preset_config",
    "FemOperators",
    "assemble",
    "discrete_laplacian",
    "inner_h",
    "norm_grad",
    "norm_h",
    "SolverError",
    "SpdSystem",
    "build_sav_system",
    "rank_one_solve",
    "spd_solve",
    "Mesh",
    "build_torus_mesh",
    "node_coordinates",
    "EnsembleReport",
    "ensemble_rms",
    "eoc",
    "run_ensemble",
    "NoiseField",
    "NoisePath",
    "SpectralBasis",
    "apply_phi_h",
    "build_basis",
    "make_noise_field",
    "sample_path",
    "wiener_increment",
    "PotentialParams",
    "discrete_energy",
    "total_energy",
    "RunManifest",
    "emit_report",
    "NewtonConfig",
    "SavState",
    "SchemeError",
    "SchemeKind",
    "StepDiagnostics",
    "augmented_sav_step",
    "chemical_potential",
    "implicit_step",
    "initial_state",
    "standard_sav_step",
]
