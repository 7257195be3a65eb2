"""Scalar acceleration laws: classic IDM, free flow, saturations, and the variants.

These are the plain-Python reference forms. The kernels re-implement the same
arithmetic over whole platoons and are cross-checked against these functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .types import Mode, ModelParams, Variant, VariantConfig


class DomainViolation(ValueError):
    """Raised when the net gap is not strictly positive."""


@dataclass(frozen=True)
class AccelInput:
    x: float
    v: float
    x_l: float
    v_l: float

    def gap(self, length: float) -> float:
        return self.x_l - self.x - length


def _power(v: float, p: ModelParams, signed: bool) -> float:
    r = abs(v) / p.v_free
    if r == 0.0:
        return 0.0
    value = math.exp(p.delta * math.log(r))
    return -value if signed and v < 0 else value


def _interaction(p: ModelParams, v: float, v_l: float, gap: float) -> float:
    sab = 2.0 * math.sqrt(p.a * p.b)
    return (sab * (p.s0 + v * p.tau) + v * (v - v_l)) / (sab * gap)


def idm_accel(p: ModelParams, inp: AccelInput, signed_power: bool = False) -> float:
    gap = inp.gap(p.l)
    if not gap > 0:
        raise DomainViolation(f"net gap {gap!r} is not positive")
    inter = _interaction(p, inp.v, inp.v_l, gap)
    return p.a * (1.0 - _power(inp.v, p, signed_power) - inter * inter)


def free_flow_accel(p: ModelParams, v: float) -> float:
    return p.a * (1.0 - _power(v, p, False))


def h_saturation(eps_v: float, v: float) -> float:
    if eps_v <= 0:
        raise ValueError("eps_v must be > 0")
    if v <= 0:
        return 0.0
    return 1.0 if v >= eps_v else v / eps_v


def h_tilde_saturation(eps_d: float, s0: float, gap: float) -> float:
    if not 0 < eps_d < s0:
        raise ValueError("need 0 < eps_d < s0")
    if gap <= eps_d:
        return eps_d / s0
    if gap >= s0:
        return 1.0
    return eps_d / s0 + (gap - eps_d) * (1.0 - eps_d / s0) / (s0 - eps_d)


def variant_accel(
    p: ModelParams, cfg: VariantConfig, inp: AccelInput, mode: Mode = Mode.MOVING
) -> float:
    """Follower acceleration under ``cfg``.

    The acceleration-projected model is defined for every gap, including
    zero and negative ones (after overtaking); all other models raise
    :class:`DomainViolation` when the net gap is not positive.
    """
    gap = inp.gap(p.l)
    kind = cfg.kind
    signed = cfg.signed_power

    if kind is Variant.ACCELERATION_PROJECTED:
        if gap == 0.0:
            return -cfg.a_min
        v = max(inp.v, 0.0)
        inter = _interaction(p, v, inp.v_l, gap)
        raw = p.a * (1.0 - _power(v, p, signed) - inter * inter)
        return max(raw, -cfg.a_min)

    if not gap > 0:
        raise DomainViolation(f"net gap {gap!r} is not positive")

    if kind is Variant.CLASSIC:
        return idm_accel(p, inp, signed)
    if kind is Variant.VELOCITY_PROJECTED:
        return idm_accel(p, AccelInput(inp.x, max(inp.v, 0.0), inp.x_l, inp.v_l), signed)
    if kind is Variant.DISCONTINUOUS:
        if mode is Mode.STOPPED or (inp.v == 0.0 and gap < p.s0):
            return 0.0
        return idm_accel(p, inp, signed)

    inter = _interaction(p, inp.v, inp.v_l, gap)
    if kind is Variant.VELOCITY_REGULARIZED:
        weight = h_saturation(cfg.eps_v, inp.v)
    else:
        weight = h_tilde_saturation(cfg.eps_d, p.s0, gap)
    return p.a * (1.0 - _power(inp.v, p, signed) - (inter * inter) * weight)
