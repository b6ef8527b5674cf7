"""Numba vs numpy kernels, plus one end-to-end estimate on each path.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Times are best-of-repeat wall clock after a warm-up call (so numba
compilation is excluded).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from rootest import _kernels


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for npts, size in ((2000, 5), (20000, 32), (2000, 512)):
        y = rng.standard_normal(npts) * 3
        a = best_of(lambda: _kernels.hermite_table_numpy(y, size), repeat)
        b = best_of(lambda: _kernels.hermite_table_numba(y, size), repeat)
        rows.append((f"hermite_table n={npts} s={size}", a, b))
    nodes = np.linspace(-40, 40, 2051)
    a = best_of(lambda: _kernels.christoffel_numpy(nodes, 2051), max(1, repeat // 4))
    b = best_of(lambda: _kernels.christoffel_numba(nodes, 2051), max(1, repeat // 4))
    rows.append(("christoffel order=2051", a, b))
    for npts, size in ((2000, 5), (20000, 16)):
        table = _kernels.hermite_table(rng.standard_normal(npts), size)
        d = rng.standard_normal(size)
        a = best_of(lambda: _kernels.chart_terms_numpy(table, d, 1e-12), repeat * 10)
        b = best_of(lambda: _kernels.chart_terms_numba(table, d, 1e-12), repeat * 10)
        rows.append((f"chart_terms n={npts} s={size}", a, b))
    return rows


_SOLVE = """
import time
from rootest import ContinuousBasis, random_state, sample_coordinate, solve
b = ContinuousBasis(5)
t = random_state(5, 12345, real=True, basis_tag=b.tag)
solve(b, [sample_coordinate(t, b, 2000, seed=0)])
t0 = time.perf_counter()
for k in range(1, 21):
    solve(b, [sample_coordinate(t, b, 2000, seed=k)])
print((time.perf_counter() - t0) / 20)
"""


def solve_time(no_numba):
    env = dict(os.environ, ROOTEST_NO_NUMBA="1" if no_numba else "0")
    out = subprocess.run([sys.executable, "-c", _SOLVE], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-solve", action="store_true")
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        sys.exit("numba is not installed")

    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, a, b in kernel_rows(args.repeat):
        print(f"{name:34s} {a * 1e3:11.3f} {b * 1e3:11.3f} {a / b:8.1f}x")
    if not args.skip_solve:
        a, b = solve_time(True), solve_time(False)
        print(f"{'solve s=5 n=2000 (per fit)':34s} {a * 1e3:11.3f} {b * 1e3:11.3f} {a / b:8.1f}x")


if __name__ == "__main__":
    main()
