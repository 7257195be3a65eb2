"""Time the numba kernels against the numpy fallback.

Usage: python3 benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from idmwp import kernels_numba, kernels_numpy
from idmwp.platoon import leader_codes
from idmwp.scenarios import builtin_scenarios

_END_TO_END = (
    "import time;"
    "from idmwp.integrator import integrate;"
    "from idmwp.scenarios import builtin_scenarios as b;"
    "s = b()['platoon-5']; integrate(s.with_horizon(5.0));"
    "t0 = time.perf_counter(); integrate(s); print(time.perf_counter() - t0)"
)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def rk4_job(kernels, s, dt=1e-3):
    n = s.initial.size
    nsteps = int(round(s.horizon / dt))
    code, lpar, ts, us = leader_codes(s.leader)
    y0 = s.initial.pack()
    rows = nsteps // 100 + 1

    def run():
        kernels.rk4_run(
            y0.copy(), dt, nsteps, 100, s.params.as_array(), s.variant.kind.code, s.variant.extra,
            s.variant.signed_power, np.zeros(n, dtype=np.int8), code, lpar, ts, us,
            np.zeros((rows, 2 * n)), np.zeros((rows, n), dtype=np.int8), np.zeros((rows, n)),
        )

    return run


def rhs_job(kernels, s, calls=20000):
    y = s.initial.pack()
    out = np.empty_like(y)
    p = s.params.as_array()
    mask = np.zeros(s.initial.size, dtype=np.int8)

    def run():
        for _ in range(calls):
            kernels.platoon_rhs(y, p, s.variant.kind.code, s.variant.extra, False, mask, 0, 0.5, out)

    return run


def end_to_end(backend):
    env = {**os.environ, "IDMWP_BACKEND": backend}
    out = subprocess.run([sys.executable, "-c", _END_TO_END], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    s = builtin_scenarios()["platoon-5"]

    rows = []
    for label, make in [("rk4 platoon-5, 1e5 steps", rk4_job), ("platoon_rhs x 20000", rhs_job)]:
        fast, slow = make(kernels_numba, s), make(kernels_numpy, s)
        fast()  # JIT warm-up
        t_fast, t_slow = best_of(fast, args.repeat), best_of(slow, args.repeat)
        rows.append((label, t_fast, t_slow))
    rows.append(("integrate platoon-5 (T=100)", end_to_end("numba"), end_to_end("numpy")))

    print(f"{'workload':<30} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for label, t_fast, t_slow in rows:
        print(f"{label:<30} {t_fast:>10.4f} {t_slow:>10.4f} {t_slow / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
