"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 2000000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tracelens import _kernels_py

try:
    from tracelens import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2_000_000, help="samples for bucket_mean")
    ap.add_argument("--kde-n", type=int, default=200_000, help="samples for the KDE cdf sweep")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    ts = np.cumsum(rng.integers(1, 30, args.n)).astype(np.float64)
    vals = rng.normal(100.0, 15.0, args.n)
    present = (rng.random(args.n) > 0.02).astype(np.uint8)
    xs = np.sort(rng.standard_t(3, args.kde_n))
    h = 1.06 * xs.std(ddof=1) * xs.size ** -0.2
    edges = np.linspace(xs[0] - 3 * h, xs[-1] + 3 * h, 201)

    cases = {
        "bucket_mean": lambda k: k.bucket_mean(ts, vals, present, 60.0),
        "gauss_cdf_mean": lambda k: k.gauss_cdf_mean(xs, edges, h),
    }
    print(f"{'kernel':<16}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, call in cases.items():
        t_py = best_of(lambda: call(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{name:<16}{t_py:>12.4f}{'n/a':>12}{'':>10}")
            continue
        t_c = best_of(lambda: call(_kernels_c), args.repeat)
        print(f"{name:<16}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
