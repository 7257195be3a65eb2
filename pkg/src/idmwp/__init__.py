"""Intelligent Driver Model simulation with well-posed variants.

Quick start::

    from idmwp import builtin_scenarios, integrate, compute_metrics
    tr = integrate(builtin_scenarios()["neg-velocity"])
    compute_metrics(tr).min_velocity
"""

from ._backend import BACKEND
from .accel import (
    AccelInput,
    DomainViolation,
    free_flow_accel,
    h_saturation,
    h_tilde_saturation,
    idm_accel,
    variant_accel,
)
from .analysis import (
    RunClassification,
    RunMetrics,
    TheoreticalBounds,
    check_invariants,
    classify_run,
    compute_bounds,
    compute_metrics,
    epsilon_sweep,
)
from .integrator import (
    Event,
    EventKind,
    NoSignChange,
    Termination,
    TerminationKind,
    Trajectory,
    integrate,
    locate_event,
    reference_integrate,
)
from .platoon import RhsEvaluation, eval_rhs, leader_accel, update_modes
from .scenarios import builtin_scenarios, compare_cases
from .types import (
    ConstantAccel,
    FreeFlow,
    InvalidScenario,
    Mode,
    ModelParams,
    PiecewiseConstant,
    PlatoonState,
    Scenario,
    SolverSettings,
    StopAndGoSine,
    Variant,
    VariantConfig,
    VehicleState,
    Violation,
    ViolationCode,
    validate_scenario,
)

__all__ = [name for name in dir() if not name.startswith("_")]
