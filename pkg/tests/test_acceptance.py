"""Acceptance criteria; each test prints exactly one PASS/FAIL line."""

import math
import time
from functools import lru_cache

import mpmath as mp
import numpy as np
import pytest
from scipy.interpolate import CubicHermiteSpline

from idmwp.analysis import compute_bounds, compute_metrics, epsilon_sweep
from idmwp.cli import DEFAULT_COMPARE_VARIANTS, run_compare
from idmwp.integrator import TerminationKind, integrate, reference_integrate
from idmwp.scenarios import STOP_GO, TYPICAL, builtin_scenarios, chain, compare_cases
from idmwp.types import (
    ConstantAccel,
    FreeFlow,
    ModelParams,
    PiecewiseConstant,
    PlatoonState,
    Scenario,
    StopAndGoSine,
    VariantConfig,
    VehicleState,
)
from oracles import blowup_upper_bound, recovery_time

CATALOG = builtin_scenarios()

# published comparison values: average distance, variance
PUBLISHED = {
    "acceleration-projected": ((7.99, 1.19), (8.09, 3.55), (14.94, 54.99)),
    "velocity-regularized": ((7.76, 1.00), (7.24, 1.70), (12.81, 25.51)),
    "distance-regularized": ((7.73, 1.02), (7.29, 1.77), (12.79, 25.87)),
    "discontinuous": ((7.75, 1.01), (7.31, 1.75), (12.39, 25.18)),
}


@pytest.fixture(scope="module", autouse=True)
def warm_up():
    # compile the kernels before any timed run
    integrate(CATALOG["neg-velocity"])
    integrate(CATALOG["overtake"])
    reference_integrate(CATALOG["safe-gap"], 0.01)


def timed(s):
    t0 = time.perf_counter()
    tr = integrate(s)
    return tr, time.perf_counter() - t0


def test_criterion_01_negative_velocity(report):
    s = CATALOG["neg-velocity"]
    tr, secs = timed(s)
    a0 = tr.acc[0, 1]
    expected = s.params.a * (1 - (s.params.s0 / 1.5) ** 2)
    vmin = tr.v[:, 1].min()
    ok = abs(a0 - expected) <= 1e-9 and abs(expected + 7 / 9) <= 1e-15 and vmin < 0 and secs < 1.0
    assert report(1, "negative-velocity counterexample", ok,
                  f"a(0)={a0:.12f}, min v={vmin:.4f}, {secs * 1e3:.1f} ms")


def test_criterion_02_safe_gap(report):
    tr, secs = timed(CATALOG["safe-gap"])
    vmin = tr.v[:, 1].min()
    ok = vmin >= -1e-8 and tr.termination.kind is TerminationKind.COMPLETED and secs < 1.0
    assert report(2, "safe gap keeps v >= 0", ok, f"min v={vmin:.3e}, {secs * 1e3:.1f} ms")


def test_criterion_03_blowup(report):
    tr, secs = timed(CATALOG["blowup"])
    t_est = compute_metrics(tr).t_blowup_est
    ok = tr.termination.kind is TerminationKind.BLOWUP and 0.96 <= t_est <= 1.16 and secs < 1.0
    assert report(3, "finite-time blow-up", ok, f"{tr.termination}, {secs * 1e3:.1f} ms")


def test_criterion_04_analytic_blowup_bound(report):
    tr = integrate(CATALOG["analytic-blowup"])
    below = np.nonzero(tr.v[:, 1] < -1)[0]
    reached = below.size > 0 and tr.t[below[0]] <= 1.0
    if reached:
        k = below[0]
        bound = blowup_upper_bound(tr.t[k], tr.v[k, 1])
    else:
        bound = math.nan
    ok = reached and tr.termination.kind is TerminationKind.BLOWUP and tr.termination.t <= bound + 0.05
    assert report(4, "analytic blow-up bound", ok,
                  f"t_end={tr.termination.t:.5f}, bound={bound:.5f}")


def test_criterion_05_bounds_arithmetic(report):
    p = ModelParams(a=1.0, b=1.0, v_free=1.0, tau=1.0, s0=2.0, l=4.0, delta=4.0)
    b = compute_bounds(p, PlatoonState(0.0, (VehicleState(10.0, 0.0), VehicleState(0.0, 0.0))), v_max=1.0)
    with mp.workdps(40):
        # positive root of a d^2 + 3 v^2 d - a s0^2 = 0, independently by root finding
        d = mp.findroot(lambda x: x * x + 3 * x - 4, 0.7)
        eps = 1 * 4 * d / (8 * (1 * d + 2))
    ok = abs(b.delta_star - float(d)) <= 1e-12 and abs(b.eps0_star - 1 / 6) <= 1e-12
    ok = ok and abs(b.eps0_star - float(eps)) <= 1e-12
    assert report(5, "bounds arithmetic", ok,
                  f"delta*={b.delta_star!r}, eps0*={b.eps0_star!r}")


@lru_cache(maxsize=None)
def random_suite(n=200, seed=20240611, horizon=30.0):
    """Admissible two-car scenarios around the typical parameter set."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        def around(x):
            return float(x * np.exp(rng.uniform(math.log(0.5), math.log(2.0))))

        p = ModelParams(
            a=around(TYPICAL.a), b=around(TYPICAL.b), v_free=around(TYPICAL.v_free), tau=around(TYPICAL.tau),
            s0=around(TYPICAL.s0), l=around(TYPICAL.l), delta=float(rng.uniform(2.0, 8.0)),
        )
        gap = float(rng.uniform(0.1, 3 * p.s0))
        v0 = float(rng.uniform(0, p.v_free))
        v_l0 = float(rng.uniform(0, p.v_free))
        kind = k % 4
        if kind == 0:
            lead = ConstantAccel(float(rng.uniform(0, p.a)))
        elif kind == 1:
            lead = FreeFlow()
        elif kind == 2:
            t1, u1 = float(rng.uniform(1, 10)), float(rng.uniform(0, p.a))
            u2 = float(rng.uniform(0.1, p.b))
            # braking phase ends before the leader would reverse
            t2 = t1 + float(rng.uniform(0, 1)) * (v_l0 + u1 * t1) / u2
            lead = PiecewiseConstant(((0.0, u1), (t1, -u2), (t2, 0.0)))
        else:
            lead = StopAndGoSine(float(rng.uniform(0.2, 1.0) * p.a))
        init = PlatoonState(0.0, (VehicleState(p.l + gap, v_l0), VehicleState(0.0, v0)))
        out.append(Scenario(p, VariantConfig.classic(), lead, init, horizon, name=f"random-{k}"))
    return tuple(out)


def test_criterion_06_nonnegativity_suite(report):
    variants = {
        "VRA": lambda p: VariantConfig.velocity_regularized(0.1),
        "DRA": lambda p: VariantConfig.distance_regularized(0.5),
        "DISC": lambda p: VariantConfig.discontinuous(),
    }
    bad = {}
    worst = {}
    for name, make in variants.items():
        bad[name] = 0
        worst[name] = 0.0
        for s in random_suite():
            tr = integrate(s.with_variant(make(s.params)))
            vmin = float(tr.v[:, 1].min())
            worst[name] = min(worst[name], vmin)
            if vmin < -1e-6 or tr.termination.kind is TerminationKind.BLOWUP:
                bad[name] += 1
    ok = not any(bad.values())
    detail = ", ".join(f"{k} {bad[k]}/200 bad (min v {worst[k]:.3g})" for k in variants)
    assert report(6, "regularized variants keep v >= 0", ok, detail)


def test_criterion_07_velocity_cap(report):
    violations = 0
    margin = -math.inf
    for s in random_suite():
        tr = integrate(s)
        cap = max(s.initial.vehicles[1].v, s.params.v_free)
        excess = float(tr.v[:, 1].max() - cap)
        margin = max(margin, excess)
        if excess > 1e-6:
            violations += 1
    ok = violations == 0
    assert report(7, "classic velocity cap", ok, f"{violations}/200 over cap, max excess {margin:.3e}")


def test_criterion_08_overtaking(report):
    tr = integrate(CATALOG["overtake"])
    gmin = float(tr.gaps().min())
    crossing = [e.t for e in tr.events if e.kind.value == "GapCollapse"]
    ok = gmin < 0 and bool(crossing) and math.isfinite(crossing[0])
    assert report(8, "acceleration-projected follower overtakes", ok,
                  f"min gap={gmin:.3f}, gap reaches 0 at t={crossing[0] if crossing else math.nan:.4f}")


def test_criterion_09_epsilon_sweep(report):
    eps = [round(0.2 * k, 12) for k in range(1, 10)]
    times = [m.t_recover_positive_v for _, m in epsilon_sweep(CATALOG["eps-sweep"], eps)]
    oracle = [recovery_time(e) for e in eps]
    monotone = all(a >= b for a, b in zip(times, times[1:]))
    worst = max(abs(t - o) for t, o in zip(times, oracle))
    ok = monotone and worst <= 1e-3
    assert report(9, "epsilon sweep recovery times", ok,
                  f"monotone={monotone}, max |t - closed form|={worst:.2e} s")


def test_criterion_10_variant_comparison(report):
    cases = list(compare_cases().values())
    rows = run_compare(cases, DEFAULT_COMPARE_VARIANTS)
    table = {(r[0], r[1]): (r[5], r[4]) for r in rows}  # avg distance, variance
    ordering = True
    spreads = []
    misses = []
    for j, case in enumerate(cases):
        vals = {v: table[(v, case.name)] for v in DEFAULT_COMPARE_VARIANTS}
        ap = vals["acceleration-projected"]
        others = [vals[v] for v in DEFAULT_COMPARE_VARIANTS[1:]]
        ordering &= all(ap[0] > o[0] and ap[1] > o[1] for o in others)
        avgs = [o[0] for o in others]
        spreads.append((max(avgs) - min(avgs)) / min(avgs))
        for v in DEFAULT_COMPARE_VARIANTS:
            ref_avg, ref_var = PUBLISHED[v][j]
            got_avg, got_var = vals[v]
            if abs(got_avg - ref_avg) > 0.15 * ref_avg or abs(got_var - ref_var) > 0.15 * ref_var:
                misses.append(f"{v}/{case.name}")
    # soft-target misses are documented horizon sensitivity, not failures
    ok = ordering and all(s <= 0.05 for s in spreads)
    detail = (
        f"AP largest avg and variance in all cases={ordering}, "
        f"spread of the others={', '.join(f'{100 * s:.1f}%' for s in spreads)}, "
        f"soft-target misses={len(misses)} ({'; '.join(misses) or 'none'})"
    )
    assert report(10, "variant comparison ordering", ok, detail)


def test_criterion_11_oracle_equivalence(report):
    s = CATALOG["safe-gap"]
    ref = reference_integrate(s, 1e-4)
    tr = integrate(s)
    err = max(
        float(np.max(np.abs(CubicHermiteSpline(ref.t, ref.x[:, j], ref.v[:, j])(tr.t) - tr.x[:, j])))
        for j in range(2)
    )
    ends = [reference_integrate(s, dt).x[-1] for dt in (0.01, 0.005, 0.0025)]
    order = math.log2(np.max(np.abs(ends[0] - ends[1])) / np.max(np.abs(ends[1] - ends[2])))
    ok = err < 1e-5 and 3.7 <= order <= 4.3
    assert report(11, "adaptive vs fixed-step oracle", ok, f"max position diff={err:.2e}, order={order:.3f}")


def test_criterion_12_five_car_platoon(report):
    s = Scenario(STOP_GO, VariantConfig.velocity_regularized(0.1), StopAndGoSine(STOP_GO.a),
                 chain(5, 1.0, STOP_GO.l), 100.0, name="platoon-5")
    tr, secs = timed(s)
    vmin = float(tr.v.min())
    gmin = float(tr.gaps().min())
    ok = (tr.termination.kind is TerminationKind.COMPLETED and vmin >= -1e-6 and gmin > 0 and secs < 10.0)
    assert report(12, "five-car platoon stays admissible", ok,
                  f"min v={vmin:.3e}, min gap={gmin:.4f}, {secs:.2f} s")

