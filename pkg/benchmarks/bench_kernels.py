"""Compare the numpy and numba builds of the metrics kernels.

    python3 benchmarks/bench_kernels.py --n 200000 --repeat 5
"""

import argparse
import time

import numpy as np

from pfaas.metrics import _kernels


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n, rng):
    lat = rng.integers(400_000, 5_000_000, size=n).astype(np.float64)
    starts = np.sort(rng.integers(0, 600_000_000, size=n)).astype(np.float64)
    ends = starts + rng.integers(500, 8_000, size=n)
    weights = np.full(n, 0.128)
    codes = rng.integers(0, 31, size=n)
    ranks = rng.integers(1, n + 1, size=1000)
    sorted_lat = np.sort(lat)
    return {
        "sliding_median(w=20)": lambda k: k.sliding_median(lat, 20),
        "overlap_sum": lambda k: k.overlap_sum(starts, ends, weights, 1e8, 5e8),
        "group_sum_count(31)": lambda k: k.group_sum_count(codes, ends - starts, 31),
        "rank_select(1000)": lambda k: k.rank_select(sorted_lat, ranks),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _kernels.numba_kernels is None:
        print("numba is not installed; only the numpy build can run")
    builds = [b for b in (_kernels.numpy_kernels, _kernels.numba_kernels) if b is not None]
    rng = np.random.default_rng(args.seed)

    print(f"n={args.n}  best of {args.repeat}")
    print(f"{'kernel':24s}" + "".join(f"{b.name:>12s}" for b in builds) + ("     speedup" if len(builds) == 2 else ""))
    for name, run in cases(args.n, rng).items():
        outs = [run(b) for b in builds]  # also triggers compilation
        if len(outs) == 2:
            a, b = outs
            ok = all(np.allclose(x, y) for x, y in zip(a, b)) if isinstance(a, tuple) else np.allclose(a, b)
            if not ok:
                raise SystemExit(f"{name}: builds disagree")
        times = [best_of(lambda b=b: run(b), args.repeat) for b in builds]
        row = f"{name:24s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
