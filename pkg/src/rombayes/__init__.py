"""Bayesian identification of correction tensors in POD-Galerkin reduced models."""

__version__ = "0.1.0"

from .config import PipelineConfig, config_from_dict, load_config
from .enkf import Ensemble, enkf_update, forecast_ensemble
from .errors import RomBayesError, StageError
from .fom import Grid1D, SnapshotMatrix, simulate_burgers
from .pce import PceExpansion, build_multiindex, gmk_pce_update
from .pipeline import RunReport, compute_quantile_bands, emit_report, run_pipeline
from .pod import PodBasis, compute_pod, project_snapshots
from .prior import GaussianPrior, NoiseModel, build_prior
from .rom import ReducedSystem, assemble_reduced_operators, integrate_rom
from .rvm import RvmConfig, rvm_fit
from .sensitivity import screen_variables, sensitivity_analysis, sobol_first_order

__all__ = [
    "Ensemble",
    "GaussianPrior",
    "Grid1D",
    "NoiseModel",
    "PceExpansion",
    "PipelineConfig",
    "PodBasis",
    "ReducedSystem",
    "RomBayesError",
    "RunReport",
    "RvmConfig",
    "SnapshotMatrix",
    "StageError",
    "assemble_reduced_operators",
    "build_multiindex",
    "build_prior",
    "compute_pod",
    "compute_quantile_bands",
    "config_from_dict",
    "emit_report",
    "enkf_update",
    "forecast_ensemble",
    "gmk_pce_update",
    "integrate_rom",
    "load_config",
    "project_snapshots",
    "rvm_fit",
    "run_pipeline",
    "screen_variables",
    "sensitivity_analysis",
    "simulate_burgers",
    "sobol_first_order",
]
