"""MPPI control with frequency-domain colored-noise sampling."""
from .analysis import (
    EnsembleStats,
    Periodogram,
    accumulated_cost,
    ensemble_stats,
    exploration_variance,
    fit_psd_exponent,
    periodogram,
)
from .controller import (
    MppiConfig,
    RolloutCosts,
    RunLog,
    compute_weights,
    mppi_step,
    receding_horizon_run,
    rollout,
    update_mean,
)
from .experiments import ExperimentConfig, run_experiment, run_sweep
from .noise import ColoredSpec, NoiseBatch, inverse_transform, sample_noise_batch, zeta
from .samplers import SamplerConfig, SamplerState, draw
from .systems import System, double_integrator, lagged_vehicle, make_system

__version__ = "0.1.0"

__all__ = [
    "ColoredSpec", "EnsembleStats", "ExperimentConfig", "MppiConfig", "NoiseBatch",
    "Periodogram", "RolloutCosts", "RunLog", "SamplerConfig", "SamplerState", "System",
    "accumulated_cost", "compute_weights", "double_integrator", "draw", "ensemble_stats",
    "exploration_variance", "fit_psd_exponent", "inverse_transform", "lagged_vehicle",
    "make_system", "mppi_step", "periodogram", "receding_horizon_run", "rollout",
    "run_experiment", "run_sweep", "sample_noise_batch", "update_mean", "zeta",
]
