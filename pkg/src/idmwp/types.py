"""Domain value types, scenario validation, and their packing into kernel arrays."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from . import _codes


@dataclass(frozen=True)
class ModelParams:
    """The seven IDM constants, in SI units."""

    a: float
    b: float
    v_free: float
    tau: float
    s0: float
    l: float
    delta: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.a, self.b, self.v_free, self.tau, self.s0, self.l, self.delta],
            dtype=np.float64,
        )


class Variant(Enum):
    CLASSIC = "classic"
    VELOCITY_PROJECTED = "velocity-projected"
    ACCELERATION_PROJECTED = "acceleration-projected"
    VELOCITY_REGULARIZED = "velocity-regularized"
    DISTANCE_REGULARIZED = "distance-regularized"
    DISCONTINUOUS = "discontinuous"

    @property
    def code(self) -> int:
        return _VARIANT_CODES[self]


_VARIANT_CODES = {
    Variant.CLASSIC: _codes.CLASSIC,
    Variant.VELOCITY_PROJECTED: _codes.VEL_PROJ,
    Variant.ACCELERATION_PROJECTED: _codes.ACC_PROJ,
    Variant.VELOCITY_REGULARIZED: _codes.VEL_REG,
    Variant.DISTANCE_REGULARIZED: _codes.DIST_REG,
    Variant.DISCONTINUOUS: _codes.DISCONT,
}


@dataclass(frozen=True)
class VariantConfig:
    """Model variant plus the single extra constant it needs, if any.

    ``a_min`` belongs to the acceleration-projected model, ``eps_v`` to the
    velocity-regularized one and ``eps_d`` to the distance-regularized one.
    """

    kind: Variant = Variant.CLASSIC
    a_min: Optional[float] = None
    eps_v: Optional[float] = None
    eps_d: Optional[float] = None
    signed_power: bool = False

    @classmethod
    def classic(cls, signed_power: bool = False) -> "VariantConfig":
        return cls(Variant.CLASSIC, signed_power=signed_power)

    @classmethod
    def velocity_projected(cls) -> "VariantConfig":
        return cls(Variant.VELOCITY_PROJECTED)

    @classmethod
    def acceleration_projected(cls, a_min: float) -> "VariantConfig":
        return cls(Variant.ACCELERATION_PROJECTED, a_min=a_min)

    @classmethod
    def velocity_regularized(cls, eps_v: float) -> "VariantConfig":
        return cls(Variant.VELOCITY_REGULARIZED, eps_v=eps_v)

    @classmethod
    def distance_regularized(cls, eps_d: float) -> "VariantConfig":
        return cls(Variant.DISTANCE_REGULARIZED, eps_d=eps_d)

    @classmethod
    def discontinuous(cls) -> "VariantConfig":
        return cls(Variant.DISCONTINUOUS)

    @property
    def extra(self) -> float:
        """The variant constant as passed to the kernels (0 when unused)."""
        value = {
            Variant.ACCELERATION_PROJECTED: self.a_min,
            Variant.VELOCITY_REGULARIZED: self.eps_v,
            Variant.DISTANCE_REGULARIZED: self.eps_d,
        }.get(self.kind)
        return 0.0 if value is None else float(value)


class Mode(Enum):
    MOVING = "moving"
    STOPPED = "stopped"


@dataclass(frozen=True)
class VehicleState:
    x: float
    v: float
    mode: Mode = Mode.MOVING


@dataclass(frozen=True)
class PlatoonState:
    """Snapshot of the platoon; ``vehicles[0]`` is the leader."""

    t: float
    vehicles: tuple[VehicleState, ...]

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))

    @classmethod
    def from_xv(cls, t: float, xs, vs, stopped=None) -> "PlatoonState":
        stopped = [False] * len(xs) if stopped is None else stopped
        return cls(
            float(t),
            tuple(
                VehicleState(float(x), float(v), Mode.STOPPED if s else Mode.MOVING)
                for x, v, s in zip(xs, vs, stopped)
            ),
        )

    @property
    def size(self) -> int:
        return len(self.vehicles)

    def positions(self) -> np.ndarray:
        return np.array([veh.x for veh in self.vehicles], dtype=np.float64)

    def velocities(self) -> np.ndarray:
        return np.array([veh.v for veh in self.vehicles], dtype=np.float64)

    def stopped_mask(self) -> np.ndarray:
        return np.array([veh.mode is Mode.STOPPED for veh in self.vehicles], dtype=np.int8)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.positions(), self.velocities()])

    def gaps(self, length: float) -> np.ndarray:
        x = self.positions()
        return x[:-1] - x[1:] - length


# leader profiles


@dataclass(frozen=True)
class ConstantAccel:
    u: float


@dataclass(frozen=True)
class FreeFlow:
    pass


@dataclass(frozen=True)
class PiecewiseConstant:
    """Acceleration ``accel_k`` from ``t_start_k`` until the next entry; 0 before the first."""

    schedule: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "schedule", tuple((float(t), float(u)) for t, u in self.schedule)
        )


@dataclass(frozen=True)
class StopAndGoSine:
    """Bang-bang pulses: ``+amplitude`` while sin(t/divisor) >= threshold, ``-amplitude`` while <= -threshold."""

    amplitude: float
    threshold: float = 0.8
    angular_divisor: float = 4.0


LeaderProfile = Union[ConstantAccel, FreeFlow, PiecewiseConstant, StopAndGoSine]


@dataclass(frozen=True)
class SolverSettings:
    """Adaptive solver knobs. ``blowup_speed_threshold=None`` means 50 * v_free."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 0.5
    blowup_speed_threshold: Optional[float] = None
    event_tol: float = 1e-9
    max_steps: int = 1_000_000

    def blowup_threshold(self, params: ModelParams) -> float:
        if self.blowup_speed_threshold is None:
            return 50.0 * params.v_free
        return self.blowup_speed_threshold


@dataclass(frozen=True)
class Scenario:
    params: ModelParams
    variant: VariantConfig
    leader: LeaderProfile
    initial: PlatoonState
    horizon: float
    solver: SolverSettings = field(default_factory=SolverSettings)
    name: str = "custom"
    description: str = ""

    def with_horizon(self, horizon: float) -> "Scenario":
        return replace(self, horizon=float(horizon))

    def with_variant(self, variant: VariantConfig) -> "Scenario":
        return replace(self, variant=variant)

    def with_solver(self, **changes) -> "Scenario":
        return replace(self, solver=replace(self.solver, **changes))


# validation


class ViolationCode(str, Enum):
    NON_POSITIVE_PARAMETER = "NonPositiveParameter"
    DELTA_NOT_GREATER_THAN_ONE = "DeltaNotGreaterThanOne"
    GAP_NOT_EXCEEDING_LENGTH = "GapNotExceedingLength"
    NEGATIVE_INITIAL_VELOCITY = "NegativeInitialVelocity"
    TAU_EXCEEDS_HORIZON = "TauExceedsHorizon"
    INVALID_HORIZON = "InvalidHorizon"
    INVALID_VARIANT_PARAMETER = "InvalidVariantParameter"
    INVALID_LEADER_PROFILE = "InvalidLeaderProfile"
    INVALID_SOLVER_SETTINGS = "InvalidSolverSettings"
    INVALID_INITIAL_STATE = "InvalidInitialState"


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    message: str

    def __str__(self) -> str:
        return f"{self.code.value}: {self.message}"


class InvalidScenario(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _positive(value) -> bool:
    return isinstance(value, (int, float)) and math.isfinite(value) and value > 0


def scenario_violations(s: Scenario) -> list[Violation]:
    """Every invariant breach of ``s``, in a stable order."""
    out: list[Violation] = []

    def add(code, msg):
        out.append(Violation(code, msg))

    p = s.params
    for name in ("a", "b", "v_free", "tau", "s0", "l"):
        if not _positive(getattr(p, name)):
            add(ViolationCode.NON_POSITIVE_PARAMETER, f"{name} = {getattr(p, name)!r} must be > 0")
    if not (math.isfinite(p.delta) and p.delta > 1):
        add(ViolationCode.DELTA_NOT_GREATER_THAN_ONE, f"delta = {p.delta!r} must be > 1")

    T = s.horizon
    if not (math.isfinite(T) and T >= 0):
        add(ViolationCode.INVALID_HORIZON, f"horizon = {T!r} must be finite and >= 0")
    elif T > 0 and _positive(p.tau) and not p.tau < T:
        # T = 0 is the single-sample run and carries no headway requirement
        add(ViolationCode.TAU_EXCEEDS_HORIZON, f"tau = {p.tau!r} must be < horizon {T!r}")

    out.extend(_variant_violations(s.variant, p))
    out.extend(_leader_violations(s.leader))
    out.extend(_solver_violations(s.solver))

    init = s.initial
    if init.size == 0:
        add(ViolationCode.INVALID_INITIAL_STATE, "platoon needs at least the leader")
    if init.t != 0.0:
        add(ViolationCode.INVALID_INITIAL_STATE, f"initial time {init.t!r} must be 0")
    for i, veh in enumerate(init.vehicles, start=1):
        if not (math.isfinite(veh.x) and math.isfinite(veh.v)):
            add(ViolationCode.INVALID_INITIAL_STATE, f"vehicle {i} has a non-finite state")
        elif veh.v < 0:
            add(ViolationCode.NEGATIVE_INITIAL_VELOCITY, f"vehicle {i} has v = {veh.v!r} < 0")
    for i, (lead, fol) in enumerate(zip(init.vehicles, init.vehicles[1:]), start=1):
        spacing = lead.x - fol.x
        if not spacing > p.l:
            add(
                ViolationCode.GAP_NOT_EXCEEDING_LENGTH,
                f"x_{i} - x_{i + 1} = {spacing!r} must exceed l = {p.l!r}",
            )
    return out


def _variant_violations(cfg: VariantConfig, p: ModelParams) -> list[Violation]:
    code = ViolationCode.INVALID_VARIANT_PARAMETER
    k = cfg.kind
    if k is Variant.ACCELERATION_PROJECTED and not _positive(cfg.a_min):
        return [Violation(code, f"a_min = {cfg.a_min!r} must be > 0")]
    if k is Variant.VELOCITY_REGULARIZED and not _positive(cfg.eps_v):
        return [Violation(code, f"eps_v = {cfg.eps_v!r} must be > 0")]
    if k is Variant.DISTANCE_REGULARIZED and not (_positive(cfg.eps_d) and cfg.eps_d < p.s0):
        return [Violation(code, f"eps_d = {cfg.eps_d!r} must lie in (0, s0 = {p.s0!r})")]
    return []


def _leader_violations(lead) -> list[Violation]:
    code = ViolationCode.INVALID_LEADER_PROFILE
    if isinstance(lead, ConstantAccel):
        return [] if math.isfinite(lead.u) else [Violation(code, "u must be finite")]
    if isinstance(lead, FreeFlow):
        return []
    if isinstance(lead, PiecewiseConstant):
        ts = [t for t, _ in lead.schedule]
        bad = []
        if not all(math.isfinite(t) and math.isfinite(u) for t, u in lead.schedule):
            bad.append(Violation(code, "schedule entries must be finite"))
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            bad.append(Violation(code, "schedule start times must be strictly increasing"))
        return bad
    if isinstance(lead, StopAndGoSine):
        bad = []
        if not (math.isfinite(lead.amplitude) and lead.amplitude >= 0):
            bad.append(Violation(code, "amplitude must be >= 0"))
        if not 0 < lead.threshold < 1:
            bad.append(Violation(code, "threshold must lie in (0, 1)"))
        if not _positive(lead.angular_divisor):
            bad.append(Violation(code, "angular_divisor must be > 0"))
        return bad
    return [Violation(code, f"unknown leader profile {type(lead).__name__}")]


def _solver_violations(st: SolverSettings) -> list[Violation]:
    code = ViolationCode.INVALID_SOLVER_SETTINGS
    bad = []
    for name in ("rel_tol", "abs_tol", "event_tol", "dt_min", "dt_init", "dt_max"):
        if not _positive(getattr(st, name)):
            bad.append(Violation(code, f"{name} must be > 0"))
    if not bad and not st.dt_min <= st.dt_init <= st.dt_max:
        bad.append(Violation(code, "need dt_min <= dt_init <= dt_max"))
    if st.blowup_speed_threshold is not None and not _positive(st.blowup_speed_threshold):
        bad.append(Violation(code, "blowup_speed_threshold must be > 0"))
    if not (isinstance(st.max_steps, int) and st.max_steps > 0):
        bad.append(Violation(code, "max_steps must be a positive integer"))
    return bad


def validate_scenario(s: Scenario) -> Scenario:
    """Return ``s`` unchanged, or raise :class:`InvalidScenario` listing every violation."""
    problems = scenario_violations(s)
    if problems:
        raise InvalidScenario(problems)
    return s
