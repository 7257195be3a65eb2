"""Builtin scenario catalog."""

from __future__ import annotations

from dataclasses import replace


from .types import (
    ConstantAccel,
    FreeFlow,
    ModelParams,
    PlatoonState,
    Scenario,
    StopAndGoSine,
    VariantConfig,
    VehicleState,
)

KMH = 1000.0 / 3600.0

#: a, b, v_free (120 km/h), tau, s0, l, delta as typically quoted for the IDM
TYPICAL = ModelParams(a=0.73, b=1.67, v_free=120 * KMH, tau=1.6, s0=2.0, l=5.0, delta=4.0)

#: small-scale constants used by the counterexamples
TOY = ModelParams(a=1.0, b=2.0, v_free=1.0, tau=1.6, s0=2.0, l=4.0, delta=4.0)

#: TOY with 2 sqrt(ab) = 1, which reproduces the reported blow-up near t = 1.06
TOY_UNIT_SAB = ModelParams(a=1.0, b=0.25, v_free=1.0, tau=1.6, s0=2.0, l=4.0, delta=4.0)

#: the slower benchmark setting with a stop-and-go leader
STOP_GO = ModelParams(a=0.73, b=1.67, v_free=120 / 36, tau=1.6, s0=2.0, l=4.0, delta=4.0)


def pair(gap: float, length: float, v0: float = 0.0, v_l0: float = 0.0, x0: float = 0.0) -> PlatoonState:
    """Two-vehicle initial datum with net gap ``gap``."""
    return PlatoonState(
        0.0, (VehicleState(x0 + length + gap, v_l0), VehicleState(x0, v0))
    )


def chain(n: int, gap: float, length: float, v: float = 0.0) -> PlatoonState:
    """``n`` vehicles at equal net gaps, leader at the largest position."""
    step = gap + length
    return PlatoonState(0.0, tuple(VehicleState((n - 1 - k) * step, v) for k in range(n)))


def _analytic_blowup(eps: float = 0.5) -> Scenario:
    p = ModelParams(a=1.0, b=0.25, v_free=1.0, tau=8.0, s0=16.0, l=4.0, delta=4.0)
    init = PlatoonState(0.0, (VehicleState(0.0, 0.0), VehicleState(-p.l - eps, 0.0)))
    return Scenario(
        p, VariantConfig.classic(), ConstantAccel(0.0), init, horizon=10.0,
        name="analytic-blowup",
        description="parked leader, unit-scaled constants, gap 0.5: velocity is driven below -1 then diverges",
    )


def builtin_scenarios() -> dict[str, Scenario]:
    classic = VariantConfig.classic()
    l = TOY.l
    cat = [
        Scenario(TOY, classic, FreeFlow(), pair(1.5, l), 3.0, name="neg-velocity",
                 description="gap 1.5 < s0 from rest: the follower reverses"),
        Scenario(TOY, classic, FreeFlow(), pair(2.0, l), 3.0, name="safe-gap",
                 description="gap = s0 from rest: velocity stays nonnegative"),
        Scenario(TOY_UNIT_SAB, classic, FreeFlow(), pair(1.0, l), 3.0, name="blowup",
                 description="gap 1.0 with 2 sqrt(ab) = 1: velocity diverges near t = 1.06"),
        Scenario(TOY, classic, FreeFlow(), pair(1.0, l), 3.0, name="tight-gap",
                 description="gap 1.0 with b = 2: deep negative velocity but no blow-up"),
        _analytic_blowup(),
        Scenario(STOP_GO, VariantConfig.velocity_regularized(0.1), StopAndGoSine(STOP_GO.a),
                 pair(1.0, STOP_GO.l), 100.0, name="stop-and-go",
                 description="bang-bang stop-and-go leader, follower 1 m behind from rest"),
        Scenario(TOY, VariantConfig.acceleration_projected(1.0), FreeFlow(),
                 pair(1.5, l, v0=5.0), 3.0, name="overtake",
                 description="fast follower with braking capped at a_min = 1 runs through the leader"),
        Scenario(STOP_GO, VariantConfig.velocity_regularized(0.1), StopAndGoSine(STOP_GO.a),
                 chain(5, 1.0, STOP_GO.l), 100.0, name="platoon-5",
                 description="five vehicles behind a stop-and-go leader, regularized by velocity"),
        Scenario(TOY, VariantConfig.velocity_projected(), ConstantAccel(2.0), pair(1.0, l), 60.0,
                 name="eps-sweep",
                 description="velocity-projected follower behind a leader accelerating at 2 m/s^2"),
        Scenario(TOY, classic, FreeFlow(), pair(TOY.s0, l, v0=0.8, v_l0=0.5), 30.0,
                 name="equilibrium",
                 description="faster follower at gap s0 behind a free-flow leader: speeds meet"),
    ]
    return {s.name: s for s in cat}


def compare_cases() -> dict[str, Scenario]:
    """The three benchmark setups of the variant comparison, with their horizons."""
    cat = builtin_scenarios()
    return {
        "case1": Scenario(TOY, VariantConfig.classic(), FreeFlow(), pair(1.5, TOY.l), 10.0,
                          name="case1", description="neg-velocity setup"),
        "case2": Scenario(TOY_UNIT_SAB, VariantConfig.classic(), FreeFlow(), pair(1.0, TOY.l), 10.0,
                          name="case2", description="blow-up setup"),
        "case3": replace(cat["stop-and-go"], name="case3", horizon=100.0,
                         description="stop-and-go setup"),
    }


#: variant settings used by the comparison table
COMPARE_VARIANTS = {
    "acceleration-projected": lambda p: VariantConfig.acceleration_projected(p.a),
    "velocity-regularized": lambda p: VariantConfig.velocity_regularized(0.1),
    "distance-regularized": lambda p: VariantConfig.distance_regularized(0.5),
    "discontinuous": lambda p: VariantConfig.discontinuous(),
    "classic": lambda p: VariantConfig.classic(),
    "velocity-projected": lambda p: VariantConfig.velocity_projected(),
}
