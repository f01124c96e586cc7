"""Time the compiled kernels against the paths used when GEOKNOT_NUMBA=0.

    python benchmarks/bench_kernels.py [--repeat 3]

The in-process rows compare each numba kernel with its ``py_func`` (and the
vectorised numpy writhe twin). A ``py_func`` still calls compiled helpers, so
those rows understate the gap. The last row runs a short ``geoknot sample`` in
a subprocess under both settings of the environment flag, which is the
honest end-to-end comparison.
"""
import argparse
import os
import subprocess
import sys
import tempfile
import time

import numpy as np

from geoknot import _accel
from geoknot.geometry import (crossings_kernel, projection_basis, writhe_matrix_kernel,
                              writhe_matrix_numpy)
from geoknot.lattice import PERPENDICULAR, load_seed_polygon, make_rng
from geoknot.sampler import biased_sweep, lattice_functional


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def ring(n, seed=0):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    noise = np.random.default_rng(seed).normal(scale=0.05, size=(n, 3))
    return np.c_[np.sin(t) + 2 * np.sin(2 * t), np.cos(t) - 2 * np.cos(2 * t), -np.sin(3 * t)] + noise


def sweep_runner(fn, moves):
    def run():
        p = load_seed_polygon("3_1")
        buf = np.zeros((130, 3), dtype=np.int64)
        buf[:24] = p.vertices
        ist = np.zeros(6, dtype=np.int64)
        ist[0] = 24
        value = np.array([lattice_functional(p.vertices, "writhe")])
        nb = 12
        arrays = [np.zeros(nb), np.zeros(nb), np.zeros(nb), np.zeros(nb, np.bool_)]
        fs = np.array([1.0, 1e-3, 0.8, 200.0, 0.0])
        params = np.array([-6.0, 1.0, 5.0])
        iparams = np.array([1, 1, 0, nb, 128, 128, 10**9, 10**9, 10], dtype=np.int64)
        fn(buf, np.zeros_like(buf), moves, make_rng(5), PERPENDICULAR, ist, value, params,
           iparams, *arrays, fs, np.zeros(3, dtype=np.int64), np.zeros(nb, np.int64),
           np.full(nb, 5, np.int64))
    return run


def cli_seconds(flag):
    with tempfile.TemporaryDirectory() as out:
        env = dict(os.environ, GEOKNOT_NUMBA=flag)
        t0 = time.perf_counter()
        subprocess.run([sys.executable, "-m", "geoknot", "sample", "--knot", "3_1",
                        "--n-vertices", "40", "--count", "3", "--bins=-6:6:6", "--seed", "1",
                        "--out", out], env=env, check=True, capture_output=True)
        return time.perf_counter() - t0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--no-cli", action="store_true", help="skip the subprocess row")
    args = ap.parse_args(argv)
    if not _accel.ENABLED:
        sys.exit("numba is disabled; unset GEOKNOT_NUMBA to compare both paths")

    c = ring(100)
    d, e1, e2 = projection_basis(np.array([0.2, 0.1, 1.0]))
    out = np.empty((4096, 6))
    rows = [
        ("writhe matrix N=100", lambda: writhe_matrix_kernel(c),
         lambda: writhe_matrix_numpy(c), "numpy twin"),
        ("writhe matrix N=100", lambda: writhe_matrix_kernel(c),
         lambda: writhe_matrix_kernel.py_func(c), "py_func"),
        ("crossings N=100", lambda: crossings_kernel(c, d, e1, e2, out),
         lambda: crossings_kernel.py_func(c, d, e1, e2, out), "py_func"),
        ("biased sweep 2000 moves", sweep_runner(biased_sweep, 2000),
         sweep_runner(biased_sweep.py_func, 2000), "py_func"),
    ]
    print(f"{'kernel':28s} {'numba s':>10s} {'python s':>10s} {'speedup':>8s}  python path")
    for name, fast, slow, label in rows:
        fast()  # compile outside the timing
        tf, ts = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:28s} {tf:10.5f} {ts:10.5f} {ts / tf:8.1f}  {label}")
    if not args.no_cli:
        cli_seconds("1")  # warm the on-disk cache
        tf, ts = cli_seconds("1"), cli_seconds("0")
        print(f"{'cli sample 3_1 N=40 x3':28s} {tf:10.3f} {ts:10.3f} {ts / tf:8.1f}  GEOKNOT_NUMBA=0")


if __name__ == "__main__":
    main()
