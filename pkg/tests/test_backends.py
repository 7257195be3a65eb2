import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idmwp import kernels_numba, kernels_numpy
from idmwp.platoon import leader_codes
from idmwp.scenarios import STOP_GO, TOY
from idmwp.types import StopAndGoSine, VariantConfig

VARIANTS = [
    VariantConfig.classic(),
    VariantConfig.classic(signed_power=True),
    VariantConfig.velocity_projected(),
    VariantConfig.acceleration_projected(1.0),
    VariantConfig.velocity_regularized(0.1),
    VariantConfig.distance_regularized(0.5),
    VariantConfig.discontinuous(),
]


def platoon(gaps, speeds, length):
    n = len(gaps) + 1
    x = np.zeros(n)
    for i in range(1, n):
        x[i] = x[i - 1] - length - gaps[i - 1]
    return np.concatenate([x, np.asarray(speeds[:n], dtype=np.float64)])


states = st.tuples(
    st.lists(st.floats(0.2, 15.0), min_size=1, max_size=5),
    st.lists(st.floats(0.0, 3.0), min_size=6, max_size=6),
    st.lists(st.booleans(), min_size=6, max_size=6),
)


@settings(max_examples=60)
@given(state=states, cfg=st.sampled_from(VARIANTS), seg=st.sampled_from([(0, 0.5), (1, 0.0)]))
def test_rhs_backends_agree(state, cfg, seg):
    gaps, speeds, stopped = state
    y = platoon(gaps, speeds, TOY.l)
    n = y.size // 2
    mask = np.array(stopped[:n], dtype=np.int8)
    mask[0] = 0
    if cfg.kind.name == "DISCONTINUOUS":
        y[n:][mask != 0] = 0.0
    else:
        mask[:] = 0
    outs = []
    for k in (kernels_numba, kernels_numpy):
        out = np.empty_like(y)
        ok = k.platoon_rhs(y, TOY.as_array(), cfg.kind.code, cfg.extra, cfg.signed_power, mask, *seg, out)
        outs.append((bool(ok), out))
    assert outs[0][0] == outs[1][0]
    np.testing.assert_allclose(outs[0][1], outs[1][1], rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("cfg", VARIANTS, ids=lambda c: c.kind.value)
def test_dopri_step_backends_agree(cfg):
    y = platoon([1.5, 2.5, 0.8], [0.3, 0.5, 0.0, 1.0], TOY.l)
    mask = np.zeros(4, dtype=np.int8)
    p = TOY.as_array()
    res = []
    for k in (kernels_numba, kernels_numpy):
        f0 = np.empty_like(y)
        k.platoon_rhs(y, p, cfg.kind.code, cfg.extra, cfg.signed_power, mask, 1, 0.0, f0)
        K = np.empty((7, y.size))
        y_new, work = np.empty_like(y), np.empty_like(y)
        ok, err = k.dopri_step(
            y, f0, 0.02, p, cfg.kind.code, cfg.extra, cfg.signed_power, mask, 1, 0.0,
            1e-8, 1e-10, K, y_new, work,
        )
        res.append((bool(ok), err, y_new.copy(), K.copy()))
    assert res[0][0] == res[1][0]
    # the error norm is a cancellation-heavy difference; compare it in tolerance units
    assert res[0][1] == pytest.approx(res[1][1], abs=1e-6)
    np.testing.assert_allclose(res[0][2], res[1][2], rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(res[0][3], res[1][3], rtol=1e-12, atol=1e-13)


def test_rk4_backends_agree():
    y0 = platoon([1.0] * 4, [0.0] * 5, STOP_GO.l)
    cfg = VariantConfig.velocity_regularized(0.1)
    code, lpar, ts, us = leader_codes(StopAndGoSine(STOP_GO.a))
    results = []
    for k in (kernels_numba, kernels_numpy):
        rows = 201
        out_y, out_s, out_a = np.zeros((rows, 10)), np.zeros((rows, 5), dtype=np.int8), np.zeros((rows, 5))
        done = k.rk4_run(
            y0.copy(), 0.01, 2000, 10, STOP_GO.as_array(), cfg.kind.code, cfg.extra, False,
            np.zeros(5, dtype=np.int8), code, lpar, ts, us, out_y, out_s, out_a,
        )
        results.append((done, out_y))
    assert results[0][0] == results[1][0] == 2000
    np.testing.assert_allclose(results[0][1], results[1][1], rtol=1e-10, atol=1e-10)


def test_numpy_backend_via_environment(tmp_path):
    env = {**os.environ, "IDMWP_BACKEND": "numpy"}
    code = (
        "from idmwp._backend import BACKEND;"
        "from idmwp.integrator import integrate;"
        "from idmwp.scenarios import builtin_scenarios as b;"
        "tr = integrate(b()['neg-velocity']);"
        "print(BACKEND, tr.termination.kind.value, repr(float(tr.v[:, 1].min())))"
    )
    proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, term, vmin = proc.stdout.split()
    assert backend == "numpy"
    assert term == "Completed"
    from idmwp.integrator import integrate
    from idmwp.scenarios import builtin_scenarios

    ref = integrate(builtin_scenarios()["neg-velocity"]).v[:, 1].min()
    assert float(vmin) == pytest.approx(ref, rel=1e-8)
