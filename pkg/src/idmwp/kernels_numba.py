"""Compiled inner loops: follower acceleration, platoon RHS, DOPRI5 step, RK4 run.

Every function here has a twin with the same signature in ``kernels_numpy``.
Domain failures are reported through return flags, never exceptions, so the
compiled code stays in nopython mode.
"""

import math

import numpy as np
from numba import njit

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

NAME = "numba"


@njit(cache=True)
def power_term(v, v_free, delta, signed):
    r = abs(v) / v_free
    if r == 0.0:
        return 0.0
    p = math.exp(delta * math.log(r))
    if signed and v < 0.0:
        return -p
    return p


@njit(cache=True)
def h_sat(v, eps_v):
    if v <= 0.0:
        return 0.0
    if v >= eps_v:
        return 1.0
    return v / eps_v


@njit(cache=True)
def h_tilde_sat(gap, eps_d, s0):
    if gap <= eps_d:
        return eps_d / s0
    if gap >= s0:
        return 1.0
    return eps_d / s0 + (gap - eps_d) * (1.0 - eps_d / s0) / (s0 - eps_d)


@njit(cache=True)
def follower_accel(p, variant, vparam, signed, v, gap, v_lead):
    """Return ``(acceleration, ok)``; ``ok`` is False outside the gap domain."""
    a = p[0]
    b = p[1]
    v_free = p[2]
    tau = p[3]
    s0 = p[4]
    delta = p[6]
    if variant == ACC_PROJ:
        if gap == 0.0:
            return -vparam, True
    elif not gap > 0.0:
        return math.nan, False
    if variant == VEL_PROJ or variant == ACC_PROJ:
        if v < 0.0:
            v = 0.0
    if variant == DISCONT and v == 0.0 and gap < s0:
        return 0.0, True
    sab = 2.0 * math.sqrt(a * b)
    inter = (sab * (s0 + v * tau) + v * (v - v_lead)) / (sab * gap)
    inter2 = inter * inter
    if variant == VEL_REG:
        inter2 *= h_sat(v, vparam)
    elif variant == DIST_REG:
        inter2 *= h_tilde_sat(gap, vparam, s0)
    acc = a * (1.0 - power_term(v, v_free, delta, signed) - inter2)
    if variant == ACC_PROJ and acc < -vparam:
        acc = -vparam
    return acc, True


@njit(cache=True)
def platoon_rhs(y, p, variant, vparam, signed, stopped, seg_kind, seg_u, out):
    n = y.size // 2
    length = p[5]
    out[0] = y[n]
    if seg_kind == SEG_FREE:
        out[n] = p[0] * (1.0 - power_term(y[n], p[2], p[6], False))
    else:
        out[n] = seg_u
    ok = True
    for i in range(1, n):
        if variant == DISCONT and stopped[i] != 0:
            out[i] = 0.0
            out[n + i] = 0.0
            continue
        v = y[n + i]
        gap = y[i - 1] - y[i] - length
        acc, good = follower_accel(p, variant, vparam, signed, v, gap, y[n + i - 1])
        if not good:
            ok = False
        out[n + i] = acc
        if (variant == VEL_PROJ or variant == ACC_PROJ) and v < 0.0:
            out[i] = 0.0
        else:
            out[i] = v
    return ok


@njit(cache=True)
def dopri_step(y, f0, h, p, variant, vparam, signed, stopped, seg_kind, seg_u,
               rtol, atol, K, y_new, work):
    """One Dormand-Prince attempt from ``y`` with FSAL slope ``f0``.

    Fills ``K`` (7 x dim stage slopes) and ``y_new``. Returns ``(ok, err_norm)``;
    ``ok`` is False when a stage leaves the domain or produces non-finite values.
    """
    m = y.size
    for j in range(m):
        K[0, j] = f0[j]
    for s in range(1, 7):
        for j in range(m):
            acc = 0.0
            for r in range(s):
                acc += _A[s, r] * K[r, j]
            work[j] = y[j] + h * acc
        if s == 6:
            for j in range(m):
                y_new[j] = work[j]
        if not platoon_rhs(work, p, variant, vparam, signed, stopped, seg_kind, seg_u, K[s]):
            return False, math.inf
    total = 0.0
    for j in range(m):
        e = 0.0
        for r in range(7):
            e += _E[r] * K[r, j]
        e *= h
        sc = atol + rtol * max(abs(y[j]), abs(y_new[j]))
        q = e / sc
        total += q * q
        if not math.isfinite(y_new[j]) or not math.isfinite(K[6, j]):
            return False, math.inf
    return True, math.sqrt(total / m)


@njit(cache=True)
def leader_accel_at(code, t, v_l, p, lpar, sched_t, sched_a):
    if code == LEAD_CONST:
        return lpar[0]
    if code == LEAD_FREE:
        return p[0] * (1.0 - power_term(v_l, p[2], p[6], False))
    if code == LEAD_PIECEWISE:
        u = 0.0
        for k in range(sched_t.size):
            if sched_t[k] <= t:
                u = sched_a[k]
        return u
    s = math.sin(t / lpar[2])
    if s >= lpar[1]:
        return lpar[0]
    if s <= -lpar[1]:
        return -lpar[0]
    return 0.0


@njit(cache=True)
def _seg(code, t, v_l, p, lpar, sched_t, sched_a):
    if code == LEAD_FREE:
        return SEG_FREE, 0.0
    return SEG_CONST, leader_accel_at(code, t, v_l, p, lpar, sched_t, sched_a)


@njit(cache=True)
def _post_step_modes(y, p, variant, vparam, signed, stopped):
    # pointwise hybrid handling for the fixed-step oracle
    if variant != DISCONT:
        return
    n = y.size // 2
    s0 = p[4]
    length = p[5]
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


@njit(cache=True)
def rk4_run(y0, dt, nsteps, stride, p, variant, vparam, signed, stopped0,
            lead_code, lpar, sched_t, sched_a, out_y, out_stopped, out_acc):
    """Classical fixed-step RK4 from t=0; records every ``stride``-th state.

    Returns the number of completed steps (less than ``nsteps`` on domain
    failure or non-finite state).
    """
    m = y0.size
    n = m // 2
    y = y0.copy()
    stopped = stopped0.copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    _post_step_modes(y, p, variant, vparam, signed, stopped)
    kind, u = _seg(lead_code, 0.0, y[n], p, lpar, sched_t, sched_a)
    platoon_rhs(y, p, variant, vparam, signed, stopped, kind, u, k1)
    for j in range(m):
        out_y[0, j] = y[j]
    for j in range(n):
        out_stopped[0, j] = stopped[j]
        out_acc[0, j] = k1[n + j]
    rec = 1
    for step in range(nsteps):
        t = step * dt
        kind, u = _seg(lead_code, t, y[n], p, lpar, sched_t, sched_a)
        ok = platoon_rhs(y, p, variant, vparam, signed, stopped, kind, u, k1)
        for j in range(m):
            tmp[j] = y[j] + 0.5 * dt * k1[j]
        kind, u = _seg(lead_code, t + 0.5 * dt, tmp[n], p, lpar, sched_t, sched_a)
        ok = platoon_rhs(tmp, p, variant, vparam, signed, stopped, kind, u, k2) and ok
        for j in range(m):
            tmp[j] = y[j] + 0.5 * dt * k2[j]
        kind, u = _seg(lead_code, t + 0.5 * dt, tmp[n], p, lpar, sched_t, sched_a)
        ok = platoon_rhs(tmp, p, variant, vparam, signed, stopped, kind, u, k3) and ok
        for j in range(m):
            tmp[j] = y[j] + dt * k3[j]
        kind, u = _seg(lead_code, t + dt, tmp[n], p, lpar, sched_t, sched_a)
        ok = platoon_rhs(tmp, p, variant, vparam, signed, stopped, kind, u, k4) and ok
        if not ok:
            return step
        finite = True
        for j in range(m):
            y[j] = y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not math.isfinite(y[j]):
                finite = False
        if not finite:
            return step
        _post_step_modes(y, p, variant, vparam, signed, stopped)
        if (step + 1) % stride == 0:
            kind, u = _seg(lead_code, t + dt, y[n], p, lpar, sched_t, sched_a)
            platoon_rhs(y, p, variant, vparam, signed, stopped, kind, u, k1)
            for j in range(m):
                out_y[rec, j] = y[j]
            for j in range(n):
                out_stopped[rec, j] = stopped[j]
                out_acc[rec, j] = k1[n + j]
            rec += 1
    return nsteps
