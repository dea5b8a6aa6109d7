"""Optimal control of reaction-diffusion systems coupled to a scalar stop operator."""
from ._backend import NAME as BACKEND
from .adjoint import (
    discrete_gradient,
    limit_diagnostics,
    partition_times,
    reduced_gradient,
    solve_adjoint_regularized,
    verify_adjoint_identity,
)
from .config import build_problem, parse_config, serialize_config
from .discretization import ComponentBoundaryConfig, SpatialGrid, assemble_diffusion
from .dynamics import (
    ControlTrajectory,
    StateSystem,
    cost_eval,
    reg_cost_eval,
    solve_state,
    solve_state_regularized,
)
from .errors import ConfigError, ConvergenceFailure, InvalidInputError, NumericalFailure, RegistryError
from .hysteresis import (
    HysteresisBounds,
    PenaltyFunction,
    ScalarTrajectory,
    play_apply,
    reg_stop_apply,
    stop_apply,
    stop_directional_derivative,
)
from .optimizer import OptimizerConfig, epsilon_continuation, minimize_regularized, value_function_scan
from .problem import ControlProblem, make_system

__all__ = [
    "BACKEND",
    "ComponentBoundaryConfig",
    "ConfigError",
    "ControlProblem",
    "ControlTrajectory",
    "ConvergenceFailure",
    "HysteresisBounds",
    "InvalidInputError",
    "NumericalFailure",
    "OptimizerConfig",
    "PenaltyFunction",
    "RegistryError",
    "ScalarTrajectory",
    "SpatialGrid",
    "StateSystem",
    "assemble_diffusion",
    "build_problem",
    "cost_eval",
    "discrete_gradient",
    "epsilon_continuation",
    "limit_diagnostics",
    "make_system",
    "minimize_regularized",
    "parse_config",
    "partition_times",
    "play_apply",
    "reduced_gradient",
    "reg_cost_eval",
    "reg_stop_apply",
    "serialize_config",
    "solve_adjoint_regularized",
    "solve_state",
    "solve_state_regularized",
    "stop_apply",
    "stop_directional_derivative",
    "value_function_scan",
    "verify_adjoint_identity",
]
