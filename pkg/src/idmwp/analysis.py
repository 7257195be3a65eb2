"""Theoretical bounds, time-weighted run metrics, run classification, and the gap sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .integrator import EventKind, TerminationKind, Trajectory, integrate
from .types import (
    FreeFlow,
    ModelParams,
    PlatoonState,
    Scenario,
    Variant,
    VariantConfig,
    VehicleState,
)


class EmptyTrajectory(ValueError):
    pass


@dataclass(frozen=True)
class TheoreticalBounds:
    v_max: float
    delta_star: float
    eps0_star: float
    eps0_star_proof_variant: float
    safe_distancing_ok: bool
    global_wellposed_ok: bool

    @property
    def eps0_conservative(self) -> float:
        """The smaller of the two gap bounds; the one invariant checks rely on."""
        return min(self.eps0_star, self.eps0_star_proof_variant)


def delta_star(a: float, s0: float, v_max: float) -> float:
    # rationalized form of (-3 v^2 + sqrt(9 v^4 + 4 a^2 s0^2)) / (2a); avoids cancellation
    v2 = v_max * v_max
    return 2.0 * a * s0 * s0 / (3.0 * v2 + math.sqrt(9.0 * v2 * v2 + 4.0 * a * a * s0 * s0))


def compute_bounds(
    p: ModelParams,
    initial: PlatoonState,
    variant: Optional[VariantConfig] = None,
    horizon: Optional[float] = None,
    v_max: Optional[float] = None,
) -> TheoreticalBounds:
    """Velocity cap, minimum-gap bounds and the safe-distancing check for ``initial``.

    ``v_max`` defaults to the largest follower speed at t=0 or ``v_free``. When
    the variant is acceleration-projected and ``horizon`` is given, the cap is
    widened to ``v0 + a T`` since that model can exceed ``v_free``.
    The safe-distancing check uses the first leader/follower pair.
    """
    followers = [veh.v for veh in initial.vehicles[1:]] or [0.0]
    if v_max is None:
        v0 = max(followers)
        v_max = max(v0, p.v_free)
        if variant is not None and variant.kind is Variant.ACCELERATION_PROJECTED and horizon:
            v_max = max(v0 + p.a * horizon, p.v_free)
    ds = delta_star(p.a, p.s0, v_max)
    core = p.a * p.s0**2 * ds
    denom = p.a * ds + 2.0 * v_max**2
    eps_statement = core / (8.0 * denom)
    eps_proof = math.sqrt(core / (4.0 * denom))
    if initial.size >= 2:
        rel = initial.vehicles[1].v - initial.vehicles[0].v
        safe = p.s0 - rel * rel / (2.0 * p.a) > 0
    else:
        safe = True
    return TheoreticalBounds(
        v_max=v_max,
        delta_star=ds,
        eps0_star=eps_statement,
        eps0_star_proof_variant=eps_proof,
        safe_distancing_ok=safe,
        global_wellposed_ok=p.s0 <= eps_statement,
    )


@dataclass(frozen=True)
class RunMetrics:
    """Statistics of one leader/follower pair.

    ``avg_gap`` and ``gap_variance`` are time averages of the net gap.
    ``avg_distance`` is the same average for the front-to-front distance
    ``x_l - x``, the quantity tabulated for the variant comparison.
    """

    avg_gap: float
    gap_variance: float
    min_gap: float
    min_velocity: float
    t_first_negative_v: Optional[float]
    t_blowup_est: Optional[float]
    t_recover_positive_v: Optional[float]
    avg_distance: float


def time_weighted_moments(t: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    """Mean and variance of the piecewise-linear interpolant of ``g`` over ``t``."""
    t = np.asarray(t, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.size == 0:
        raise EmptyTrajectory("no samples")
    span = t[-1] - t[0] if t.size > 1 else 0.0
    if span == 0.0:
        return float(np.mean(g)), 0.0
    dt = np.diff(t)
    mean = float(np.sum(dt * (g[:-1] + g[1:])) / (2.0 * span))
    d = g - mean
    var = float(np.sum(dt * (d[:-1] ** 2 + d[:-1] * d[1:] + d[1:] ** 2)) / (3.0 * span))
    return mean, var


def compute_metrics(tr: Trajectory, vehicle_pair: tuple[int, int] = (0, 1)) -> RunMetrics:
    """Metrics for ``vehicle_pair`` (0-based leader index, follower index)."""
    if len(tr) == 0:
        raise EmptyTrajectory("trajectory has no samples")
    lead, fol = vehicle_pair
    dist = tr.x[:, lead] - tr.x[:, fol]
    gap = dist - tr.scenario.params.l
    avg_gap, var = time_weighted_moments(tr.t, gap)
    avg_dist, _ = time_weighted_moments(tr.t, dist)
    v = tr.v[:, fol]

    neg = np.nonzero(v < 0.0)[0]
    t_neg = float(tr.t[neg[0]]) if neg.size else None
    t_rec = None
    if t_neg is not None:
        after = np.nonzero((tr.t > t_neg) & (v >= 0.0))[0]
        if after.size:
            t_rec = float(tr.t[after[0]])
    else:
        stopped = tr.stopped[:, fol]
        idx = np.nonzero(stopped)[0]
        if idx.size:
            released = np.nonzero((~stopped) & (np.arange(len(tr)) > idx[0]))[0]
            if released.size:
                t_rec = float(tr.t[released[0]])

    t_blow = tr.termination.t if tr.termination.kind is TerminationKind.BLOWUP else None
    return RunMetrics(
        avg_gap=avg_gap,
        gap_variance=var,
        min_gap=float(np.min(gap)),
        min_velocity=float(np.min(v)),
        t_first_negative_v=t_neg,
        t_blowup_est=t_blow,
        t_recover_positive_v=t_rec,
        avg_distance=avg_dist,
    )


@dataclass(frozen=True)
class RunClassification:
    """Which hypotheses held for the input and which conclusions were observed.

    Conclusion fields are ``None`` whenever their hypothesis gate failed.
    """

    initial_condition_wellposedness: bool
    safe_distancing: bool
    global_wellposed_condition: bool
    free_flow_leader: bool
    delta_even: bool
    equilibrium_hypotheses: bool
    initial_gap_below_s0: bool
    gap_bound_hypothesis: bool
    eps0_bound: float
    observed_min_gap: float
    observed_negative_velocity: bool
    gap_bound_held: Optional[bool]
    equilibrium_time: Optional[float]
    notes: tuple[str, ...] = field(default_factory=tuple)


def _first_meeting(t: np.ndarray, diff: np.ndarray) -> Optional[float]:
    # first time diff (follower minus leader speed) reaches zero, linear between samples
    if diff[0] <= 0:
        return None
    idx = np.nonzero(diff <= 0)[0]
    if idx.size == 0:
        return None
    k = idx[0]
    d0, d1 = diff[k - 1], diff[k]
    return float(t[k - 1] + (t[k] - t[k - 1]) * d0 / (d0 - d1))


def classify_run(
    s: Scenario, tr: Trajectory, b: TheoreticalBounds, pair: tuple[int, int] = (0, 1)
) -> RunClassification:
    p = s.params
    lead0 = s.initial.vehicles[pair[0]]
    fol0 = s.initial.vehicles[pair[1]]
    gap0 = lead0.x - fol0.x - p.l
    at_s0 = math.isclose(gap0, p.s0, rel_tol=1e-9, abs_tol=1e-12)
    init_ok = fol0.v > lead0.v > 0 and at_s0
    free = isinstance(s.leader, FreeFlow) and pair[0] == 0
    even = float(p.delta).is_integer() and int(p.delta) % 2 == 0
    eq_hyp = init_ok and free and even and b.safe_distancing_ok

    gaps = tr.x[:, pair[0]] - tr.x[:, pair[1]] - p.l
    min_gap = float(np.min(gaps))
    neg_v = bool(np.min(tr.v[:, pair[1]]) < 0)
    eps = b.eps0_conservative
    bound_hyp = gap0 > eps and s.variant.kind is Variant.CLASSIC
    notes = []
    if gap0 < p.s0:
        notes.append("initial net gap below s0")
    if neg_v:
        notes.append("follower velocity became negative")
    t1 = None
    if eq_hyp:
        t1 = _first_meeting(tr.t, tr.v[:, pair[1]] - tr.v[:, pair[0]])
        notes.append("equilibrium time found" if t1 is not None else "no equilibrium within horizon")
    return RunClassification(
        initial_condition_wellposedness=init_ok,
        safe_distancing=b.safe_distancing_ok,
        global_wellposed_condition=b.global_wellposed_ok,
        free_flow_leader=free,
        delta_even=even,
        equilibrium_hypotheses=eq_hyp,
        initial_gap_below_s0=gap0 < p.s0,
        gap_bound_hypothesis=bound_hyp,
        eps0_bound=eps,
        observed_min_gap=min_gap,
        observed_negative_velocity=neg_v,
        gap_bound_held=(min_gap >= eps) if bound_hyp else None,
        equilibrium_time=t1,
        notes=tuple(notes),
    )


def with_initial_gap(base: Scenario, gap: float) -> Scenario:
    """``base`` with its first follower moved to net gap ``gap`` behind the leader."""
    lead, fol = base.initial.vehicles[0], base.initial.vehicles[1]
    moved = VehicleState(lead.x - base.params.l - gap, fol.v, fol.mode)
    vehicles = (lead, moved) + tuple(base.initial.vehicles[2:])
    return Scenario(
        base.params, base.variant, base.leader, PlatoonState(0.0, vehicles), base.horizon,
        base.solver, name=f"{base.name}@gap={gap:g}", description=base.description,
    )


def epsilon_sweep(base: Scenario, eps_values: Sequence[float]) -> list[tuple[float, RunMetrics]]:
    """Run ``base`` at each initial net gap and collect the metrics.

    A run whose follower never goes negative reports ``t_recover_positive_v = 0``.
    """
    out = []
    for eps in eps_values:
        eps = float(eps)
        if not 0 < eps <= base.params.s0:
            raise ValueError(f"eps={eps} must lie in (0, s0]")
        m = compute_metrics(integrate(with_initial_gap(base, eps)))
        if m.t_first_negative_v is None:
            m = RunMetrics(**{**m.__dict__, "t_recover_positive_v": 0.0})
        out.append((eps, m))
    return out


def velocity_events(tr: Trajectory, vehicle: int) -> list[tuple[float, int]]:
    """``(t, direction)`` of located velocity zero crossings for ``vehicle``."""
    return [
        (e.t, e.direction)
        for e in tr.events
        if e.kind is EventKind.VELOCITY_ZERO_CROSSING and e.vehicle == vehicle
    ]


@dataclass(frozen=True)
class InvariantCheck:
    name: str
    status: str  # "pass", "fail" or "n/a"
    detail: str


_NONNEGATIVE_VARIANTS = (
    Variant.VELOCITY_REGULARIZED,
    Variant.DISTANCE_REGULARIZED,
    Variant.DISCONTINUOUS,
)


def check_invariants(s: Scenario, tr: Trajectory, b: TheoreticalBounds, tol: float = 1e-6) -> list[InvariantCheck]:
    """Numerical checks of the guaranteed properties that apply to ``s``."""
    out = []
    followers_v = tr.v[:, 1:]
    vmin = float(followers_v.min()) if followers_v.size else 0.0
    vmax = float(followers_v.max()) if followers_v.size else 0.0

    if s.variant.kind in _NONNEGATIVE_VARIANTS:
        out.append(InvariantCheck(
            "nonnegative follower velocity", "pass" if vmin >= -tol else "fail", f"min v = {vmin:.6g}"))
    else:
        out.append(InvariantCheck("nonnegative follower velocity", "n/a", "no guarantee for this variant"))

    v0_ok = all(veh.v <= s.params.v_free for veh in s.initial.vehicles[1:])
    if s.variant.kind is Variant.CLASSIC and v0_ok:
        cap = max([veh.v for veh in s.initial.vehicles[1:]] + [s.params.v_free])
        out.append(InvariantCheck(
            "velocity cap", "pass" if vmax <= cap + tol else "fail", f"max v = {vmax:.6g}, cap = {cap:.6g}"))
    else:
        out.append(InvariantCheck("velocity cap", "n/a", "needs classic model with v0 <= v_free"))

    gaps = tr.gaps()
    gap0 = s.initial.gaps(s.params.l)
    eps = b.eps0_conservative
    if s.variant.kind is Variant.CLASSIC and gaps.size and np.all(gap0 > eps):
        gmin = float(gaps.min())
        out.append(InvariantCheck(
            "gap lower bound", "pass" if gmin >= eps - tol else "fail", f"min gap = {gmin:.6g}, bound = {eps:.6g}"))
    else:
        out.append(InvariantCheck("gap lower bound", "n/a", "needs classic model with initial gaps above the bound"))

    vl_min = float(tr.v[:, 0].min())
    out.append(InvariantCheck(
        "leader velocity nonnegative", "pass" if vl_min >= -1e-9 else "fail", f"min v_l = {vl_min:.6g}"))
    return out
