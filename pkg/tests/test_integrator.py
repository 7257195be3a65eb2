import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import CubicHermiteSpline

from idmwp import kernels_numba
from idmwp.analysis import velocity_events
from idmwp.integrator import (
    EventKind,
    NoSignChange,
    TerminationKind,
    dense_eval,
    integrate,
    locate_event,
    reference_integrate,
)
from idmwp.scenarios import TOY, pair
from idmwp.types import (
    ConstantAccel,
    FreeFlow,
    InvalidScenario,
    Mode,
    Scenario,
    VariantConfig,
)
from oracles import BLOWUP_V_MINUS_50_T, NEG_VELOCITY_RECOVERY_T, blowup_upper_bound


def test_neg_velocity_reverses_and_recovers(catalog):
    tr = integrate(catalog["neg-velocity"])
    assert tr.termination.kind is TerminationKind.COMPLETED
    assert tr.termination.t == 3.0
    assert tr.v[:, 1].min() < 0
    crossings = velocity_events(tr, 1)
    assert [d for _, d in crossings] == [-1, 1]
    assert crossings[0][0] < 1e-3
    assert crossings[1][0] == pytest.approx(NEG_VELOCITY_RECOVERY_T, abs=1e-7)


def test_safe_gap_stays_nonnegative(catalog):
    tr = integrate(catalog["safe-gap"])
    assert tr.termination.kind is TerminationKind.COMPLETED
    assert tr.v[:, 1].min() >= -1e-8
    assert velocity_events(tr, 1) == []


def test_blowup_time(catalog):
    tr = integrate(catalog["blowup"])
    assert tr.termination.kind is TerminationKind.BLOWUP
    assert tr.termination.t == pytest.approx(BLOWUP_V_MINUS_50_T, abs=1e-5)
    assert tr.events[-1].kind is EventKind.BLOWUP_DETECTED
    assert tr.v[-1, 1] < -50 * TOY.v_free
    # positions converge even though the velocity diverges
    assert np.all(np.isfinite(tr.x))
    assert tr.x[-1, 1] > -2.0


def test_analytic_blowup_respects_explicit_bound(catalog):
    tr = integrate(catalog["analytic-blowup"])
    assert tr.termination.kind is TerminationKind.BLOWUP
    below = np.nonzero(tr.v[:, 1] < -1)[0]
    k = below[0]
    assert tr.t[k] <= 1.0
    bound = blowup_upper_bound(tr.t[k], tr.v[k, 1])
    assert tr.termination.t <= bound + 0.05


def test_tight_gap_goes_deep_but_survives(catalog):
    tr = integrate(catalog["tight-gap"])
    assert tr.termination.kind is TerminationKind.COMPLETED
    assert tr.v[:, 1].min() < -0.5


def test_overtake_passes_through_leader(catalog):
    tr = integrate(catalog["overtake"])
    assert tr.termination.kind is TerminationKind.COMPLETED
    assert tr.gaps().min() < 0
    collapse = [e for e in tr.events if e.kind is EventKind.GAP_COLLAPSE]
    assert len(collapse) == 1
    assert collapse[0].state.gaps(TOY.l)[0] == pytest.approx(0.0, abs=1e-7)


def test_hybrid_model_holds_then_releases(catalog):
    s = catalog["neg-velocity"].with_variant(VariantConfig.discontinuous())
    tr = integrate(s)
    assert tr.v[:, 1].min() == 0.0
    assert tr.stopped[0, 1] and not tr.stopped[-1, 1]
    release = [e for e in tr.events if e.kind is EventKind.GAP_REACHES_S0]
    assert len(release) == 1
    assert release[0].state.gaps(TOY.l)[0] == pytest.approx(TOY.s0, abs=1e-6)
    assert release[0].state.vehicles[1].mode is Mode.MOVING


def test_projected_positions_never_move_backwards(catalog):
    s = catalog["neg-velocity"].with_variant(VariantConfig.velocity_projected())
    tr = integrate(s)
    assert tr.v[:, 1].min() < 0
    assert np.all(np.diff(tr.x[:, 1]) >= 0.0)


def test_zero_horizon(catalog):
    tr = integrate(catalog["neg-velocity"].with_horizon(0.0))
    assert len(tr) == 1
    assert tr.termination.kind is TerminationKind.COMPLETED
    assert tr.acc[0, 1] == pytest.approx(-7 / 9, abs=1e-12)


def test_step_limit(catalog):
    tr = integrate(catalog["safe-gap"].with_solver(max_steps=5))
    assert tr.termination.kind is TerminationKind.STEP_LIMIT_REACHED
    assert tr.termination.t < 3.0


def test_braking_leader_going_backwards_stops_the_run():
    s = Scenario(TOY, VariantConfig.classic(), ConstantAccel(-1.0), pair(3.0, TOY.l, v_l0=0.5), 3.0)
    tr = integrate(s)
    assert tr.termination.kind is TerminationKind.LEADER_VELOCITY_NEGATIVE
    assert 0.5 <= tr.termination.t < 1.0


def test_invalid_scenario_is_rejected(catalog):
    with pytest.raises(InvalidScenario):
        integrate(catalog["safe-gap"].with_horizon(1.0))
    with pytest.raises(InvalidScenario):
        reference_integrate(catalog["safe-gap"].with_horizon(1.0), 0.01)


def test_runs_are_bit_identical(catalog):
    a = integrate(catalog["stop-and-go"])
    b = integrate(catalog["stop-and-go"])
    assert np.array_equal(a.t, b.t)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.v, b.v)
    assert [e.t for e in a.events] == [e.t for e in b.events]


def test_steps_land_on_leader_breakpoints(catalog):
    from idmwp.platoon import leader_breakpoints

    s = catalog["stop-and-go"]
    tr = integrate(s)
    times = set(tr.t.tolist())
    for bp in leader_breakpoints(s.leader, s.horizon):
        assert bp in times


def test_locate_event_simple_roots():
    assert locate_event(lambda t: t - 1.0, 0.0, 3.0, 1e-12) == pytest.approx(1.0, abs=1e-12)
    assert locate_event(lambda t: 0.0, 0.2, 3.0) == 0.2
    with pytest.raises(NoSignChange):
        locate_event(lambda t: t + 1.0, 0.0, 1.0)


@given(root=st.floats(0.01, 0.99), tol=st.sampled_from([1e-6, 1e-9, 1e-12]))
def test_locate_event_is_within_tolerance_past_the_root(root, tol):
    t = locate_event(lambda x: math.tanh(x - root), 0.0, 1.0, tol)
    assert root - 1e-15 <= t <= root + tol + 1e-15


def test_dense_output_matches_step_endpoint():
    s = pair(1.5, TOY.l)
    y = s.pack()
    p = TOY.as_array()
    f0 = np.empty_like(y)
    kernels_numba.platoon_rhs(y, p, 0, 0.0, False, s.stopped_mask(), 1, 0.0, f0)
    K = np.empty((7, y.size))
    y_new, work = np.empty_like(y), np.empty_like(y)
    ok, _ = kernels_numba.dopri_step(
        y, f0, 0.05, p, 0, 0.0, False, s.stopped_mask(), 1, 0.0, 1e-8, 1e-10, K, y_new, work
    )
    assert ok
    np.testing.assert_allclose(dense_eval(y, 0.05, K, 1.0), y_new, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(dense_eval(y, 0.05, K, 0.0), y)


def test_adaptive_agrees_with_fine_rk4(catalog):
    s = catalog["safe-gap"]
    ref = reference_integrate(s, 1e-4)
    tr = integrate(s)
    for j in range(2):
        spline = CubicHermiteSpline(ref.t, ref.x[:, j], ref.v[:, j])
        assert np.max(np.abs(spline(tr.t) - tr.x[:, j])) < 1e-5


def test_reference_scheme_is_fourth_order(catalog):
    s = catalog["safe-gap"]
    ends = [reference_integrate(s, dt).x[-1] for dt in (0.01, 0.005, 0.0025)]
    e1 = np.max(np.abs(ends[0] - ends[1]))
    e2 = np.max(np.abs(ends[1] - ends[2]))
    order = math.log2(e1 / e2)
    assert 3.7 <= order <= 4.3


def test_up_crossing_matches_fixed_step_sign_change(catalog):
    s = catalog["neg-velocity"]
    ref = reference_integrate(s, 1e-5)
    v = ref.v[:, 1]
    k = np.nonzero((v[:-1] < 0) & (v[1:] >= 0))[0][0]
    (t_up, _), = [e for e in velocity_events(integrate(s), 1) if e[1] == 1]
    assert abs(t_up - ref.t[k + 1]) < 1e-3


def test_reference_rejects_non_dividing_step(catalog):
    with pytest.raises(ValueError):
        reference_integrate(catalog["safe-gap"], 0.7)


def test_reference_flags_blowup(catalog):
    ref = reference_integrate(catalog["blowup"], 1e-4)
    assert ref.termination.kind is TerminationKind.BLOWUP
    assert ref.termination.t == pytest.approx(BLOWUP_V_MINUS_50_T, abs=1e-3)


@settings(max_examples=30)
@given(
    gap=st.floats(2.0, 8.0),
    v0=st.floats(0.0, 1.0),
    v_l0=st.floats(0.0, 1.0),
)
def test_gap_stays_above_theoretical_bound(gap, v0, v_l0):
    from idmwp.analysis import compute_bounds

    s = Scenario(TOY, VariantConfig.classic(), FreeFlow(), pair(gap, TOY.l, v0, v_l0), 20.0)
    b = compute_bounds(TOY, s.initial)
    tr = integrate(s)
    assert tr.termination.kind is TerminationKind.COMPLETED
    assert tr.gaps().min() >= b.eps0_conservative - 1e-9
    assert tr.v[:, 1].max() <= max(v0, TOY.v_free) + 1e-9
