"""Time the compiled kernels against the pure-numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 5] [--quick]

Reports best-of-N wall time per backend and the resulting speedup. Both
backends are imported directly, so the CYCLESYNTH_PURE_KERNELS switch is
irrelevant here; parity itself is covered by the test suite.
"""

import argparse
import time

import numpy as np

from cyclesynth.kernels import available_backends


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        times.append(time.perf_counter() - started)
    return min(times)


def make_cases(quick):
    rng = np.random.default_rng(0)
    scale = 0.25 if quick else 1.0
    n_points = int(20_000 * scale)
    n_centroids = 200
    dim = 64

    points = rng.standard_normal((n_points, dim))
    centroids = rng.standard_normal((n_centroids, dim))
    coverage = rng.standard_normal((int(2_000 * scale), 16))
    # One long-ish document per row, unicode mixed in.
    texts = ["How should item %d be stored? 保管方法は？ %s" % (i, "x" * (i % 40))
             for i in range(int(5_000 * scale))]

    return [
        ("assign_nearest", lambda mod: mod.assign_nearest(points, centroids)),
        ("kcenter_select", lambda mod: mod.kcenter_select(coverage, coverage.shape[0] // 2, 0)),
        ("bigram_counts", lambda mod: mod.bigram_counts(texts, 256)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="best-of repeats")
    parser.add_argument("--quick", action="store_true", help="smaller inputs")
    args = parser.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not importable; benchmarking fallback only")

    print(f"{'kernel':<16} " + " ".join(f"{name:>12}" for name in backends)
          + ("  speedup" if len(backends) > 1 else ""))
    for name, call in make_cases(args.quick):
        row = {bname: best_of(lambda m=mod: call(m), args.repeats)
               for bname, mod in backends.items()}
        line = f"{name:<16} " + " ".join(f"{row[b] * 1e3:>10.2f}ms" for b in backends)
        if "cython" in row and "python" in row:
            line += f"  {row['python'] / row['cython']:>6.2f}x"
        print(line)


if __name__ == "__main__":
    main()
