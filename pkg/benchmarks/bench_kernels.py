#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-numpy fallback.

Runs the orbit-tracing and Lyapunov kernels on a wild-rose table in a
subprocess per backend (the backend is fixed at import time by the
EFLOWER_NUMBA environment variable) and reports per-bounce timings.

Usage: python3 benchmarks/bench_kernels.py [n_bounces]
"""

import os
import subprocess
import sys

WORKER = """
import sys, time
import numpy as np
from eflower import kernels
from eflower.geometry import build_sol_flower, make_regular_polygon
from eflower.dynamics import random_states, trace_orbit
from eflower.analysis import lyapunov_exponent

n = int(sys.argv[1])
table = build_sol_flower(make_regular_polygon(5, 1.0), 1.95)
st = random_states(table, 1, np.random.default_rng(0))[0]

trace_orbit(table, st, 10)  # one-time JIT compilation outside the timing
t0 = time.perf_counter()
rec = trace_orbit(table, st, n)
t_trace = time.perf_counter() - t0

lyapunov_exponent(table, st, 10)
t0 = time.perf_counter()
est = lyapunov_exponent(table, st, n)
t_lyap = time.perf_counter() - t0

print(f"{kernels.KERNEL_BACKEND} {rec.n_links} {t_trace:.6f} {t_lyap:.6f} "
      f"{rec.x[-1]:.17g} {est.lam:.17g}")
"""


def run(backend_flag, n):
    env = dict(os.environ, EFLOWER_NUMBA=backend_flag)
    out = subprocess.run(
        [sys.executable, "-c", WORKER, str(n)], env=env,
        capture_output=True, text=True, check=True,
    )
    name, links, t_trace, t_lyap, x_last, lam = out.stdout.split()
    return name, int(links), float(t_trace), float(t_lyap), x_last, lam


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    n_numpy = min(n, 20_000)  # the fallback is orders of magnitude slower
    rows = [run("1", n), run("0", n_numpy)]
    print(f"{'backend':>8} {'bounces':>9} {'trace us/bounce':>16} "
          f"{'lyapunov us/bounce':>19}")
    for name, links, t_trace, t_lyap, *_ in rows:
        print(f"{name:>8} {links:>9} {1e6 * t_trace / links:>16.3f} "
              f"{1e6 * t_lyap / links:>19.3f}")
    speed = (rows[1][2] / rows[1][1]) / (rows[0][2] / rows[0][1])
    print(f"\nnumba speedup on the tracing kernel: {speed:.0f}x")
    a = run("1", 400)
    b = run("0", 400)
    dx = abs(float(a[4]) - float(b[4]))
    print(f"final-position agreement over 400 bounces: |dx| = {dx:.3e}")


if __name__ == "__main__":
    main()
