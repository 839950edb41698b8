"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from artifact import _kernels
from artifact.sampling import make_kernel


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=200_000)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    grid = rng.normal(size=(256, 256)) + 0j
    u = rng.uniform(2, 250, (args.points, 2))
    lines = rng.normal(size=(64, 4096)) + 0j
    pos = rng.uniform(0.0, 40.0, (args.points // 64, 64))
    none = np.zeros(1)

    print(f"backend selected at import: {_kernels.backend()}")
    print(f"{'kernel':<28} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}")
    for name in ("linear", "keys", "bspline2"):
        k = make_kernel(name)
        np_t = best_of(lambda: _kernels.interp_lattice_2d_np(grid, u, k.code, k.radius, none, none, True), args.repeat)
        if _kernels.HAVE_NUMBA:
            _kernels._interp_lattice_2d_nb(grid, u[:10], k.code, k.radius, none, none, True)  # compile
            nb_t = best_of(lambda: _kernels._interp_lattice_2d_nb(grid, u, k.code, k.radius, none, none, True), args.repeat)
            print(f"{'interp_lattice_2d/' + name:<28} {np_t:10.4f} {nb_t:10.4f} {np_t / nb_t:8.1f}")
        else:
            print(f"{'interp_lattice_2d/' + name:<28} {np_t:10.4f} {'-':>10} {'-':>8}")

    np_t = best_of(lambda: _kernels.sample_lines_np(lines, 0.0, 0.01, pos), args.repeat)
    if _kernels.HAVE_NUMBA:
        _kernels._sample_lines_nb(lines, 0.0, 0.01, pos[:2])
        nb_t = best_of(lambda: _kernels._sample_lines_nb(lines, 0.0, 0.01, pos), args.repeat)
        print(f"{'sample_lines':<28} {np_t:10.4f} {nb_t:10.4f} {np_t / nb_t:8.1f}")
    else:
        print(f"{'sample_lines':<28} {np_t:10.4f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
