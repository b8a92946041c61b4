"""Loping steepest-descent Kaczmarz solvers with radon and doping test problems."""

from ._lsdk import (
    ConfigError,
    DetectorSet,
    DimensionError,
    DivergenceError,
    DomainError,
    DegenerateStepError,
    Error,
    ExperimentConfig,
    SolverFailure,
    default_true_profile,
    doping_adjoint,
    doping_derivative,
    doping_forward,
    execute,
    load_config,
    make_detectors,
    make_phantom,
    parse_config,
    radon_adjoint,
    radon_forward,
    run_experiment,
    solve_pde,
    voltage_profiles,
)

__all__ = [name for name in dir() if not name.startswith("_")]
