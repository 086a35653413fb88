"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so this works whichever one
``homog._backend`` would pick. Outputs are checked for equality first.
"""

import argparse
import time

import numpy as np

from homog import _fallback

try:
    from homog import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(rng):
    n, k = 200_000, 6
    failures = (rng.random((n, k)) < 0.3).astype(np.uint8)
    mask = (rng.random((n, k)) < 0.8).astype(np.uint8)
    codes = rng.integers(0, 8, size=(n, k))
    x = rng.standard_normal(50)
    y = x + rng.standard_normal(50)
    x = (x - x.mean()) / np.linalg.norm(x - x.mean())
    y = (y - y.mean()) / np.linalg.norm(y - y.mean())
    return {
        "outcome_counts N=200k k=6": lambda m: m.outcome_counts(failures, mask),
        "group_counts N=200k k=6 G=8": lambda m: m.group_counts(failures, mask, codes, 8),
        "permutation null n=50 x 10k": lambda m: m.permuted_statistics(x, y, 7, 0, 10_000),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(u, v) for u, v in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'compiled':>10s} {'numpy':>10s} {'speedup':>8s}  equal")
    for name, run in cases(rng).items():
        eq = same(run(_kernels), run(_fallback))
        tc = best_of(lambda: run(_kernels), args.repeat)
        tp = best_of(lambda: run(_fallback), args.repeat)
        print(f"{name:32s} {tc * 1e3:8.2f}ms {tp * 1e3:8.2f}ms {tp / tc:7.1f}x  {eq}")


if __name__ == "__main__":
    main()
