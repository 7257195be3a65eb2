"""Leader profiles, the assembled platoon right-hand side, and hybrid mode updates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _codes
from ._backend import kernels
from .accel import AccelInput, free_flow_accel, variant_accel
from .types import (
    ConstantAccel,
    FreeFlow,
    LeaderProfile,
    Mode,
    PiecewiseConstant,
    PlatoonState,
    Scenario,
    StopAndGoSine,
    Variant,
    VehicleState,
)


@dataclass(frozen=True)
class RhsEvaluation:
    derivatives: tuple[tuple[float, float], ...]
    active_modes: tuple[Mode, ...]
    domain_ok: bool


def leader_accel(profile: LeaderProfile, t: float, v_l: float, params) -> float:
    """Leader acceleration at time ``t``; ``params`` is only read by :class:`FreeFlow`."""
    if isinstance(profile, ConstantAccel):
        return profile.u
    if isinstance(profile, FreeFlow):
        return free_flow_accel(params, v_l)
    if isinstance(profile, PiecewiseConstant):
        u = 0.0
        for start, value in profile.schedule:
            if start <= t:
                u = value
        return u
    if isinstance(profile, StopAndGoSine):
        s = math.sin(t / profile.angular_divisor)
        if s >= profile.threshold:
            return profile.amplitude
        if s <= -profile.threshold:
            return -profile.amplitude
        return 0.0
    raise TypeError(f"unknown leader profile {profile!r}")


def leader_breakpoints(profile: LeaderProfile, horizon: float) -> list[float]:
    """Sorted times in (0, horizon) where the leader acceleration may jump."""
    if isinstance(profile, PiecewiseConstant):
        pts = [t for t, _ in profile.schedule]
    elif isinstance(profile, StopAndGoSine):
        base = math.asin(profile.threshold)
        # sin crosses +thr at base, pi - base and -thr at pi + base, 2 pi - base
        phases = (base, math.pi - base, math.pi + base, 2 * math.pi - base)
        div = profile.angular_divisor
        pts = []
        k = 0
        while 2 * math.pi * k * div < horizon:
            pts.extend(div * (ph + 2 * math.pi * k) for ph in phases)
            k += 1
    else:
        pts = []
    return sorted(t for t in set(pts) if 0.0 < t < horizon)


def leader_segment(profile: LeaderProfile, t_lo: float, t_hi: float, params) -> tuple[int, float]:
    """Kernel leader code for a step inside one breakpoint interval."""
    if isinstance(profile, FreeFlow):
        return _codes.SEG_FREE, 0.0
    return _codes.SEG_CONST, float(leader_accel(profile, 0.5 * (t_lo + t_hi), 0.0, params))


def leader_codes(profile: LeaderProfile):
    """Arrays describing ``profile`` for the fixed-step reference kernel."""
    empty = np.zeros(0)
    if isinstance(profile, ConstantAccel):
        return _codes.LEAD_CONST, np.array([profile.u, 0.0, 1.0]), empty, empty
    if isinstance(profile, FreeFlow):
        return _codes.LEAD_FREE, np.zeros(3), empty, empty
    if isinstance(profile, PiecewiseConstant):
        ts = np.array([t for t, _ in profile.schedule], dtype=np.float64)
        us = np.array([u for _, u in profile.schedule], dtype=np.float64)
        return _codes.LEAD_PIECEWISE, np.zeros(3), ts, us
    if isinstance(profile, StopAndGoSine):
        lpar = np.array([profile.amplitude, profile.threshold, profile.angular_divisor])
        return _codes.LEAD_SINE, lpar, empty, empty
    raise TypeError(f"unknown leader profile {profile!r}")


def eval_rhs(s: Scenario, state: PlatoonState) -> RhsEvaluation:
    """Per-vehicle ``(dx/dt, dv/dt)`` at ``state``.

    Leaving the gap domain does not raise: ``domain_ok`` turns False and the
    affected accelerations are NaN.
    """
    y = state.pack()
    n = state.size
    out = np.empty_like(y)
    p = s.params
    if isinstance(s.leader, FreeFlow):
        seg_kind, seg_u = _codes.SEG_FREE, 0.0
    else:
        seg_kind = _codes.SEG_CONST
        seg_u = float(leader_accel(s.leader, state.t, y[n], p))
    ok = kernels.platoon_rhs(
        y, p.as_array(), s.variant.kind.code, s.variant.extra, s.variant.signed_power,
        state.stopped_mask(), seg_kind, seg_u, out,
    )
    derivs = tuple((float(out[i]), float(out[n + i])) for i in range(n))
    return RhsEvaluation(derivs, tuple(veh.mode for veh in state.vehicles), bool(ok))


def update_modes(s: Scenario, state: PlatoonState) -> PlatoonState:
    """Apply the discontinuous-model switching rules at an event point.

    A moving follower whose velocity has reached zero is pinned to zero and
    latches to Stopped when its gap is below ``s0``. A stopped follower is
    released once its gap is at least ``s0`` and the free-start acceleration is
    positive. Every other variant is left untouched.
    """
    if s.variant.kind is not Variant.DISCONTINUOUS:
        return state
    p = s.params
    vehicles = list(state.vehicles)
    for i in range(1, len(vehicles)):
        lead, veh = vehicles[i - 1], vehicles[i]
        gap = lead.x - veh.x - p.l
        if veh.mode is Mode.STOPPED:
            vehicles[i] = VehicleState(veh.x, 0.0, Mode.STOPPED)
            if gap >= p.s0:
                acc = variant_accel(p, s.variant, AccelInput(veh.x, 0.0, lead.x, lead.v))
                if acc > 0:
                    vehicles[i] = VehicleState(veh.x, 0.0, Mode.MOVING)
        elif veh.v <= 0.0:
            mode = Mode.STOPPED if gap < p.s0 else Mode.MOVING
            vehicles[i] = VehicleState(veh.x, 0.0, mode)
    return PlatoonState(state.t, tuple(vehicles))
