"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Both backends are imported directly, so the env var is not needed here.  The
first numba call of each kernel (compilation) is excluded from the timings.
"""

import argparse
import time

import numpy as np

from metric_ext.kernels import numba_impl, numpy_impl


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(quick):
    g = np.random.default_rng(0)
    n = 600 if quick else 2000
    X, Y = g.standard_normal((n, 20)), g.standard_normal((n, 12))
    yield f"pair_ratio_extremes n={n}", (X, Y), "pair_ratio_extremes"

    A, B = g.standard_normal((300, 6)), g.standard_normal((300, 4))
    rmax = numpy_impl.pair_ratio_extremes(A, B)[0]
    idx = np.arange(300, dtype=np.int64)
    z = g.standard_normal(6)
    args = (z, A, B, idx, rmax * 1.001, 300, 0.0, 10.0, 1e-10, 5000, np.zeros(0), 30)
    yield "kirszbraun_solve 300 anchors", args, "kirszbraun_solve"

    C = g.standard_normal((400, 8))
    a = 0.05 * g.standard_normal(400)
    c = np.full(400, 0.02)
    yield "one_point_feasibility 400 rows", (C, a, c, np.zeros(8), 1e-14, 3000), "one_point_feasibility"

    m = 9 if quick else 11
    perm = np.concatenate([np.arange(m, 0, -1)]).astype(np.int64)  # avoids both patterns: full scan
    yield f"forbidden_pattern_scan n={m}", (perm,), "forbidden_pattern_scan"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args()
    print(f"{'kernel':38s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, inputs, name in cases(args.quick):
        fa, fb = getattr(numpy_impl, name), getattr(numba_impl, name)
        fb(*inputs)  # compile
        ta = best_of(lambda: fa(*inputs), args.repeat)
        tb = best_of(lambda: fb(*inputs), args.repeat)
        print(f"{label:38s} {1e3 * ta:11.3f} {1e3 * tb:11.3f} {ta / tb:8.1f}x")


if __name__ == "__main__":
    main()
