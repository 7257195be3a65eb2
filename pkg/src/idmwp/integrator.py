"""Adaptive Dormand-Prince integration with event location and blow-up detection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import _codes
from ._backend import kernels
from ._tableau import P as _DENSE_P
from .platoon import leader_breakpoints, leader_codes, leader_segment, update_modes
from .types import Mode, PlatoonState, Scenario, Variant, validate_scenario

# slack for leader velocity round-off before declaring the input invalid
LEADER_VELOCITY_TOL = 1e-9


class NoSignChange(ValueError):
    pass


class EventKind(Enum):
    VELOCITY_ZERO_CROSSING = "VelocityZeroCrossing"
    GAP_REACHES_S0 = "GapReachesS0"
    GAP_COLLAPSE = "GapCollapse"
    BLOWUP_DETECTED = "BlowupDetected"


@dataclass(frozen=True)
class Event:
    """A located state event.

    ``vehicle`` is the 0-based platoon index (0 is the leader). ``direction``
    is -1 for a velocity falling below zero, +1 for one recovering, 0 otherwise.
    """

    kind: EventKind
    vehicle: int
    t: float
    state: PlatoonState
    direction: int = 0


class TerminationKind(Enum):
    COMPLETED = "Completed"
    BLOWUP = "Blowup"
    GAP_COLLAPSE = "GapCollapse"
    LEADER_VELOCITY_NEGATIVE = "LeaderVelocityNegative"
    STEP_LIMIT_REACHED = "StepLimitReached"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    t: float
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind.value}(t={self.t!r})"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense samples of one run.

    Arrays are indexed ``[sample, vehicle]`` with the leader in column 0;
    ``acc`` holds dv/dt and ``stopped`` the discontinuous-model mode.
    """

    scenario: Scenario
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    acc: np.ndarray
    stopped: np.ndarray
    events: tuple[Event, ...]
    termination: Termination
    accepted_steps: int = 0
    rejected_steps: int = 0

    def __len__(self) -> int:
        return self.t.size

    def state(self, k: int) -> PlatoonState:
        return PlatoonState.from_xv(self.t[k], self.x[k], self.v[k], self.stopped[k])

    def gaps(self) -> np.ndarray:
        """Net gaps, shape ``(samples, vehicles - 1)``."""
        return self.x[:, :-1] - self.x[:, 1:] - self.scenario.params.l


def dense_eval(y0: np.ndarray, h: float, K: np.ndarray, theta: float) -> np.ndarray:
    """Quartic continuous extension of an accepted DOPRI5 step at ``t0 + theta h``."""
    q = np.array([theta, theta * theta, theta**3, theta**4])
    return y0 + h * (K.T @ (_DENSE_P @ q))


def _bisect(pred: Callable[[float], bool], lo: float, hi: float, tol: float) -> float:
    # pred(lo) is False and pred(hi) is True; returns a point where pred holds
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def locate_event(f: Callable[[float], float], t_lo: float, t_hi: float, tol: float = 1e-9) -> float:
    """Root of ``f`` on ``[t_lo, t_hi]`` by bisection.

    Returns ``t_lo`` when ``f(t_lo) == 0``; otherwise the first bracketing
    point past the sign change, within ``tol`` of the root.
    """
    f_lo = f(t_lo)
    if f_lo == 0:
        return t_lo
    f_hi = f(t_hi)
    if f_lo * f_hi > 0 or math.isnan(f_lo * f_hi):
        raise NoSignChange(f"f({t_lo})={f_lo}, f({t_hi})={f_hi}")
    side = math.copysign(1.0, f_lo)

    def crossed(t: float) -> bool:
        value = f(t)
        return value == 0 or math.copysign(1.0, value) != side

    return _bisect(crossed, t_lo, t_hi, tol)


class _Predicates:
    """Boolean event predicates per follower; an event fires on a False -> True flip."""

    DOWN, UP, RELEASE, COLLAPSE = range(4)

    def __init__(self, s: Scenario):
        self.n = s.initial.size
        self.l = s.params.l
        self.s0 = s.params.s0
        self.hybrid = s.variant.kind is Variant.DISCONTINUOUS

    def evaluate(self, y: np.ndarray, stopped: np.ndarray) -> np.ndarray:
        n = self.n
        v = y[n + 1:]
        gap = y[: n - 1] - y[1:n] - self.l
        halted = stopped[1:] != 0
        out = np.empty((4, n - 1), dtype=bool)
        out[self.DOWN] = ~halted & (v < 0.0)
        out[self.UP] = v >= 0.0
        out[self.RELEASE] = halted & (gap > self.s0) if self.hybrid else False
        out[self.COLLAPSE] = gap <= 0.0
        return out


def _state(t: float, y: np.ndarray, stopped: np.ndarray) -> PlatoonState:
    n = y.size // 2
    return PlatoonState.from_xv(t, y[:n], y[n:], stopped)


def integrate(s: Scenario) -> Trajectory:
    """Integrate ``s`` over ``[0, horizon]`` or until a terminal condition.

    Raises :class:`~idmwp.types.InvalidScenario` for invalid input.
    """
    validate_scenario(s)
    return _Integration(s).run()


class _Integration:
    def __init__(self, s: Scenario):
        self.s = s
        st = s.solver
        self.st = st
        self.p = s.params.as_array()
        self.variant = s.variant.kind.code
        self.vparam = s.variant.extra
        self.signed = s.variant.signed_power
        self.n = s.initial.size
        self.T = float(s.horizon)
        self.thr = st.blowup_threshold(s.params)
        self.allow_overlap = s.variant.kind is Variant.ACCELERATION_PROJECTED
        self.hybrid = s.variant.kind is Variant.DISCONTINUOUS
        self.preds = _Predicates(s)

        init = update_modes(s, s.initial)
        self.y = init.pack()
        self.stopped = init.stopped_mask()
        self.t = 0.0

        m = self.y.size
        self.K = np.empty((7, m))
        self.y_new = np.empty(m)
        self.work = np.empty(m)
        self.f0 = np.empty(m)

        self.ts: list[float] = []
        self.ys: list[np.ndarray] = []
        self.stops: list[np.ndarray] = []
        self.accs: list[np.ndarray] = []
        self.events: list[Event] = []
        self.accepted = 0
        self.rejected = 0

    # helpers

    def _rhs(self, y, seg, out) -> bool:
        return kernels.platoon_rhs(
            y, self.p, self.variant, self.vparam, self.signed, self.stopped, seg[0], seg[1], out
        )

    def _record(self):
        self.ts.append(self.t)
        self.ys.append(self.y.copy())
        self.stops.append(self.stopped.copy())
        self.accs.append(self.f0[self.n:].copy())

    def _finish(self, kind: TerminationKind, t: float, detail: str = "") -> Trajectory:
        n = self.n
        Y = np.array(self.ys)
        return Trajectory(
            scenario=self.s,
            t=np.array(self.ts),
            x=Y[:, :n],
            v=Y[:, n:],
            acc=np.array(self.accs),
            stopped=np.array(self.stops, dtype=bool),
            events=tuple(self.events),
            termination=Termination(kind, float(t), detail),
            accepted_steps=self.accepted,
            rejected_steps=self.rejected,
        )

    def _segment(self, t_lo, t_hi):
        return leader_segment(self.s.leader, t_lo, t_hi, self.s.params)

    def _max_follower_accel(self) -> float:
        if self.n < 2:
            return 0.0
        return float(np.max(np.abs(self.f0[self.n + 1:])))

    # main loop

    def run(self) -> Trajectory:
        st = self.st
        T = self.T
        bps = leader_breakpoints(self.s.leader, T) + [T]
        bp = 0
        seg_end = bps[0]
        seg = self._segment(0.0, seg_end)
        self._rhs(self.y, seg, self.f0)
        self._record()
        if T == 0.0:
            return self._finish(TerminationKind.COMPLETED, 0.0)

        h = min(st.dt_init, st.dt_max)
        acc_hist = [self._max_follower_accel()]
        attempts = 0
        while True:
            if self.t >= T:
                return self._finish(TerminationKind.COMPLETED, T)
            attempts += 1
            if attempts > st.max_steps:
                return self._finish(TerminationKind.STEP_LIMIT_REACHED, self.t)

            h_wanted = h
            hit = False
            if self.t + h >= seg_end - 1e-12 * max(1.0, abs(seg_end)):
                h = seg_end - self.t
                hit = True

            ok, err = kernels.dopri_step(
                self.y, self.f0, h, self.p, self.variant, self.vparam, self.signed,
                self.stopped, seg[0], seg[1], st.rel_tol, st.abs_tol,
                self.K, self.y_new, self.work,
            )
            if not ok or not err <= 1.0:
                self.rejected += 1
                if ok:
                    h *= max(0.2, 0.9 * err ** -0.2)
                else:
                    h *= 0.25
                if h < st.dt_min:
                    return self._collapse(acc_hist)
                continue

            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h_next = min(h * factor, st.dt_max)
            if hit:
                h_next = max(h_next, min(h_wanted, st.dt_max))

            fired = self._scan_events(h)
            restart = fired is not None
            if restart:
                done = self._handle_events(h, fired)
                if done is not None:
                    return done
            else:
                self.t = self.t + h
                self.y, self.y_new = self.y_new, self.y
            self.accepted += 1

            at_end = hit and self.t >= seg_end - 1e-12 * max(1.0, abs(seg_end))
            if at_end:
                self.t = seg_end
            if at_end and self.t < T:
                while bp < len(bps) and bps[bp] <= self.t:
                    bp += 1
                seg_end = bps[bp]
                seg = self._segment(self.t, seg_end)
                self._rhs(self.y, seg, self.f0)
            elif restart:
                self._rhs(self.y, seg, self.f0)
            else:
                self.f0[:] = self.K[6]
            self._record()
            acc_hist.append(self._max_follower_accel())
            h = h_next

            if len(acc_hist) > 3:
                del acc_hist[0]
            done = self._check_state()
            if done is not None:
                return done

    def _check_state(self) -> Optional[Trajectory]:
        n = self.n
        v_f = self.y[n + 1:]
        if v_f.size and np.min(v_f) < -self.thr:
            i = int(np.argmin(v_f)) + 1
            self.events.append(
                Event(EventKind.BLOWUP_DETECTED, i, self.t, _state(self.t, self.y, self.stopped))
            )
            return self._finish(TerminationKind.BLOWUP, self.t, f"v_{i + 1} < -{self.thr:g}")
        if self.y[n] < -LEADER_VELOCITY_TOL:
            return self._finish(TerminationKind.LEADER_VELOCITY_NEGATIVE, self.t)
        return None

    def _collapse(self, acc_hist) -> Trajectory:
        n = self.n
        if n > 1:
            gap = self.y[: n - 1] - self.y[1:n] - self.s.params.l
            closing = np.maximum(self.y[n + 1:] - self.y[n:-1], 0.0)
            # the gap would close within a few minimum steps
            if np.any(gap <= 1e3 * self.st.dt_min * np.maximum(closing, 1.0)):
                return self._finish(TerminationKind.GAP_COLLAPSE, self.t, "step size collapsed at gap boundary")
        growing = len(acc_hist) >= 2 and acc_hist[-1] >= acc_hist[-2]
        if growing or not np.all(np.isfinite(self.y)):
            i = int(np.argmin(self.y[n + 1:])) + 1 if n > 1 else 0
            self.events.append(
                Event(EventKind.BLOWUP_DETECTED, i, self.t, _state(self.t, self.y, self.stopped))
            )
            return self._finish(TerminationKind.BLOWUP, self.t, "step size collapsed")
        return self._finish(TerminationKind.STEP_LIMIT_REACHED, self.t, "step size below dt_min")

    def _scan_events(self, h):
        if self.n < 2:
            return None
        before = self.preds.evaluate(self.y, self.stopped)
        after = self.preds.evaluate(self.y_new, self.stopped)
        flips = ~before & after
        if not self.hybrid:
            flips[_Predicates.RELEASE] = False
        if not flips.any():
            return None
        return before, flips

    def _handle_events(self, h, fired) -> Optional[Trajectory]:
        before, flips = fired
        y0, K, stopped = self.y, self.K, self.stopped
        tol = self.st.event_tol / h

        def at(theta):
            return dense_eval(y0, h, K, theta)

        best = 1.0
        for kind, j in zip(*np.nonzero(flips)):
            theta = _bisect(
                lambda th, kind=kind, j=j: bool(self.preds.evaluate(at(th), stopped)[kind, j]),
                0.0, best, tol,
            ) if self.preds.evaluate(at(best), stopped)[kind, j] else best
            best = min(best, theta)
        y_e = at(best) if best < 1.0 else self.y_new.copy()
        t_e = self.t + best * h
        if t_e <= self.t:
            t_e = float(np.nextafter(self.t, math.inf))
        now = self.preds.evaluate(y_e, stopped)
        hits = ~before & now
        if not self.hybrid:
            hits[_Predicates.RELEASE] = False

        terminal = False
        if self.hybrid:
            pre = _state(t_e, y_e, stopped)
            post = update_modes(self.s, pre)
            y_e = post.pack()
            self.stopped = post.stopped_mask()
        state = _state(t_e, y_e, self.stopped)
        for kind, j in zip(*np.nonzero(hits)):
            i = int(j) + 1
            if kind == _Predicates.DOWN:
                self.events.append(Event(EventKind.VELOCITY_ZERO_CROSSING, i, t_e, state, -1))
            elif kind == _Predicates.UP:
                self.events.append(Event(EventKind.VELOCITY_ZERO_CROSSING, i, t_e, state, +1))
            elif kind == _Predicates.RELEASE:
                self.events.append(Event(EventKind.GAP_REACHES_S0, i, t_e, state))
            else:
                self.events.append(Event(EventKind.GAP_COLLAPSE, i, t_e, state))
                terminal = terminal or not self.allow_overlap
        self.t = t_e
        self.y = y_e
        if terminal:
            self.f0[:] = np.nan
            self._record()
            return self._finish(TerminationKind.GAP_COLLAPSE, t_e)
        return None


def reference_integrate(s: Scenario, dt: float, stride: int = 1) -> Trajectory:
    """Brute-force fixed-step RK4 oracle; no event location.

    ``dt`` must divide the horizon. Discontinuous-model switching and velocity
    pinning are applied pointwise after each step. Every ``stride``-th state
    is kept.
    """
    validate_scenario(s)
    if not dt > 0:
        raise ValueError("dt must be > 0")
    T = float(s.horizon)
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"dt={dt} does not divide the horizon {T}")
    n = s.initial.size
    rows = nsteps // stride + 1
    out_y = np.zeros((rows, 2 * n))
    out_stopped = np.zeros((rows, n), dtype=np.int8)
    out_acc = np.zeros((rows, n))
    code, lpar, sched_t, sched_a = leader_codes(s.leader)
    init = update_modes(s, s.initial)
    done = kernels.rk4_run(
        init.pack(), dt, nsteps, stride, s.params.as_array(), s.variant.kind.code,
        s.variant.extra, s.variant.signed_power, init.stopped_mask(),
        code, lpar, sched_t, sched_a, out_y, out_stopped, out_acc,
    )
    kept = done // stride + 1
    t = np.arange(kept) * (dt * stride)
    if done == nsteps:
        t[-1] = T
        term = Termination(TerminationKind.COMPLETED, T)
    else:
        last_v = out_y[kept - 1, n + 1:]
        kind = (
            TerminationKind.BLOWUP
            if last_v.size and np.min(last_v) < -s.solver.blowup_threshold(s.params)
            else TerminationKind.GAP_COLLAPSE
        )
        term = Termination(kind, done * dt, "fixed-step run stopped early")
    return Trajectory(
        scenario=s,
        t=t,
        x=out_y[:kept, :n].copy(),
        v=out_y[:kept, n:].copy(),
        acc=out_acc[:kept].copy(),
        stopped=out_stopped[:kept].astype(bool),
        events=(),
        termination=term,
        accepted_steps=done,
    )
