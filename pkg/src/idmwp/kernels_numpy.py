"""Vectorized numpy fallback for the compiled kernels (same signatures)."""

import math

import numpy as np

from ._codes import (
    ACC_PROJ,
    DISCONT,
    DIST_REG,
    LEAD_CONST,
    LEAD_FREE,
    LEAD_PIECEWISE,
    SEG_CONST,
    SEG_FREE,
    VEL_PROJ,
    VEL_REG,
)
from ._tableau import A as _A
from ._tableau import E as _E

NAME = "numpy"


def power_term(v, v_free, delta, signed):
    r = np.abs(np.asarray(v, dtype=np.float64)) / v_free
    with np.errstate(divide="ignore"):
        p = np.where(r == 0.0, 0.0, np.exp(delta * np.log(np.where(r == 0.0, 1.0, r))))
    if signed:
        p = np.where(np.asarray(v) < 0.0, -p, p)
    return p


def h_sat(v, eps_v):
    return np.clip(np.asarray(v, dtype=np.float64) / eps_v, 0.0, 1.0)


def h_tilde_sat(gap, eps_d, s0):
    gap = np.asarray(gap, dtype=np.float64)
    lin = eps_d / s0 + (gap - eps_d) * (1.0 - eps_d / s0) / (s0 - eps_d)
    return np.where(gap <= eps_d, eps_d / s0, np.where(gap >= s0, 1.0, lin))


def follower_accel_vec(p, variant, vparam, signed, v, gap, v_lead):
    """Vectorized follower acceleration; returns ``(acc, ok_mask)``."""
    a, b, v_free, tau, s0 = p[0], p[1], p[2], p[3], p[4]
    delta = p[6]
    v = np.asarray(v, dtype=np.float64)
    gap = np.asarray(gap, dtype=np.float64)
    if variant == ACC_PROJ:
        ok = np.ones(gap.shape, dtype=bool)
    else:
        ok = gap > 0.0
    if variant in (VEL_PROJ, ACC_PROJ):
        v = np.maximum(v, 0.0)
    sab = 2.0 * math.sqrt(a * b)
    safe_gap = np.where(gap == 0.0, 1.0, gap)
    inter = (sab * (s0 + v * tau) + v * (v - v_lead)) / (sab * safe_gap)
    inter2 = inter * inter
    if variant == VEL_REG:
        inter2 = inter2 * h_sat(v, vparam)
    elif variant == DIST_REG:
        inter2 = inter2 * h_tilde_sat(gap, vparam, s0)
    acc = a * (1.0 - power_term(v, v_free, delta, signed) - inter2)
    if variant == ACC_PROJ:
        acc = np.where(gap == 0.0, -vparam, np.maximum(acc, -vparam))
    if variant == DISCONT:
        acc = np.where((v == 0.0) & (gap < s0), 0.0, acc)
    acc = np.where(ok, acc, np.nan)
    return acc, ok


def follower_accel(p, variant, vparam, signed, v, gap, v_lead):
    acc, ok = follower_accel_vec(p, variant, vparam, signed, v, gap, v_lead)
    return float(acc), bool(ok)


def platoon_rhs(y, p, variant, vparam, signed, stopped, seg_kind, seg_u, out):
    n = y.size // 2
    x = y[:n]
    v = y[n:]
    out[0] = v[0]
    if seg_kind == SEG_FREE:
        out[n] = p[0] * (1.0 - float(power_term(v[0], p[2], p[6], False)))
    else:
        out[n] = seg_u
    if n == 1:
        return True
    gap = x[:-1] - x[1:] - p[5]
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        acc, ok = follower_accel_vec(p, variant, vparam, signed, v[1:], gap, v[:-1])
    dx = np.maximum(v[1:], 0.0) if variant in (VEL_PROJ, ACC_PROJ) else v[1:]
    if variant == DISCONT:
        halt = stopped[1:] != 0
        acc = np.where(halt, 0.0, acc)
        dx = np.where(halt, 0.0, dx)
        ok = ok | halt
    out[1:n] = dx
    out[n + 1:] = acc
    return bool(ok.all())


def dopri_step(y, f0, h, p, variant, vparam, signed, stopped, seg_kind, seg_u,
               rtol, atol, K, y_new, work):
    K[0] = f0
    for s in range(1, 7):
        work[:] = y + h * (_A[s, :s] @ K[:s])
        if s == 6:
            y_new[:] = work
        if not platoon_rhs(work, p, variant, vparam, signed, stopped, seg_kind, seg_u, K[s]):
            return False, math.inf
    if not (np.isfinite(y_new).all() and np.isfinite(K[6]).all()):
        return False, math.inf
    err = h * (_E @ K)
    sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return True, float(np.sqrt(np.mean((err / sc) ** 2)))


def leader_accel_at(code, t, v_l, p, lpar, sched_t, sched_a):
    if code == LEAD_CONST:
        return float(lpar[0])
    if code == LEAD_FREE:
        return p[0] * (1.0 - float(power_term(v_l, p[2], p[6], False)))
    if code == LEAD_PIECEWISE:
        idx = np.searchsorted(sched_t, t, side="right") - 1
        return float(sched_a[idx]) if idx >= 0 else 0.0
    s = math.sin(t / lpar[2])
    if s >= lpar[1]:
        return float(lpar[0])
    if s <= -lpar[1]:
        return -float(lpar[0])
    return 0.0


def _seg(code, t, v_l, p, lpar, sched_t, sched_a):
    if code == LEAD_FREE:
        return SEG_FREE, 0.0
    return SEG_CONST, leader_accel_at(code, t, v_l, p, lpar, sched_t, sched_a)


def _post_step_modes(y, p, variant, vparam, signed, stopped):
    if variant != DISCONT:
        return
    n = y.size // 2
    s0, length = p[4], p[5]
    for i in range(1, n):
        gap = y[i - 1] - y[i] - length
        if stopped[i] != 0:
            y[n + i] = 0.0
            if gap >= s0:
                acc, good = follower_accel(p, variant, vparam, signed, 0.0, gap, y[n + i - 1])
                if good and acc > 0.0:
                    stopped[i] = 0
        elif y[n + i] <= 0.0:
            y[n + i] = 0.0
            if gap < s0:
                stopped[i] = 1


def rk4_run(y0, dt, nsteps, stride, p, variant, vparam, signed, stopped0,
            lead_code, lpar, sched_t, sched_a, out_y, out_stopped, out_acc):
    m = y0.size
    n = m // 2
    y = y0.copy()
    stopped = stopped0.copy()
    k1, k2, k3, k4 = (np.empty(m) for _ in range(4))
    _post_step_modes(y, p, variant, vparam, signed, stopped)
    kind, u = _seg(lead_code, 0.0, y[n], p, lpar, sched_t, sched_a)
    platoon_rhs(y, p, variant, vparam, signed, stopped, kind, u, k1)
    out_y[0] = y
    out_stopped[0] = stopped
    out_acc[0] = k1[n:]
    rec = 1
    for step in range(nsteps):
        t = step * dt
        kind, u = _seg(lead_code, t, y[n], p, lpar, sched_t, sched_a)
        ok = platoon_rhs(y, p, variant, vparam, signed, stopped, kind, u, k1)
        tmp = y + 0.5 * dt * k1
        kind, u = _seg(lead_code, t + 0.5 * dt, tmp[n], p, lpar, sched_t, sched_a)
        ok = platoon_rhs(tmp, p, variant, vparam, signed, stopped, kind, u, k2) and ok
        tmp = y + 0.5 * dt * k2
        kind, u = _seg(lead_code, t + 0.5 * dt, tmp[n], p, lpar, sched_t, sched_a)
        ok = platoon_rhs(tmp, p, variant, vparam, signed, stopped, kind, u, k3) and ok
        tmp = y + dt * k3
        kind, u = _seg(lead_code, t + dt, tmp[n], p, lpar, sched_t, sched_a)
        ok = platoon_rhs(tmp, p, variant, vparam, signed, stopped, kind, u, k4) and ok
        if not ok:
            return step
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(y).all():
            return step
        _post_step_modes(y, p, variant, vparam, signed, stopped)
        if (step + 1) % stride == 0:
            kind, u = _seg(lead_code, t + dt, y[n], p, lpar, sched_t, sched_a)
            platoon_rhs(y, p, variant, vparam, signed, stopped, kind, u, k1)
            out_y[rec] = y
            out_stopped[rec] = stopped
            out_acc[rec] = k1[n:]
            rec += 1
    return nsteps
