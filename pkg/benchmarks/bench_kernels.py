"""Timing comparison of the JIT kernels against the pure-numpy fallbacks.

Runs each hot kernel on representative workloads, checks that the two
backends agree, and prints a table of per-call times and speedups.

    python benchmarks/bench_kernels.py [--repeats 200] [--seed 0]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from outlierseq._kernels import NUMBA_IMPL, NUMPY_IMPL


def _gammas(rng: np.random.Generator, m: int, k: int, n: int = 400) -> np.ndarray:
    probs = rng.dirichlet(np.ones(k), size=m)
    counts = np.stack([rng.multinomial(n, p) for p in probs])
    return np.ascontiguousarray(counts / float(n))


def _workloads(rng: np.random.Generator) -> dict:
    small = _gammas(rng, 20, 10)
    large = _gammas(rng, 200, 10)
    values = rng.exponential(1.0, 200)
    return {
        "kl_rows (M=200)": lambda impl: impl.kl_rows(large, large.mean(axis=0)),
        "kth_smallest (200)": lambda impl: impl.kth_smallest(values, 100),
        "top_t (200 pick 40)": lambda impl: impl.top_t(values, 40),
        "group_cost (M=200)": lambda impl: impl.group_cost(large, np.arange(150, dtype=np.int64)),
        "delta2_iterate (M=200, t=40)": lambda impl: impl.delta2_iterate(large, 40, large[0], 100),
        "kmeans2_iterate (M=200)": lambda impl: impl.kmeans2_iterate(large, large[0], large[1], 100),
        "gl_known_scan (M=20, t=3)": lambda impl: impl.gl_known_scan(small, 3),
        "gl_unknown_scan (M=20)": lambda impl: impl.gl_unknown_scan(small, 9),
    }


def _agree(a, b) -> bool:
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_agree(x, y) for x, y in zip(a, b))
    return bool(np.allclose(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64), atol=1e-10))


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        begin = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - begin)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if NUMBA_IMPL is None:
        print("JIT backend unavailable (numba not importable or disabled); nothing to compare.")
        return 0

    rng = np.random.default_rng(args.seed)
    workloads = _workloads(rng)

    print(f"{'kernel':<30} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, call in workloads.items():
        reference = call(NUMPY_IMPL)
        call(NUMBA_IMPL)  # warmup: first call includes compilation
        jitted = call(NUMBA_IMPL)
        assert _agree(reference, jitted), f"backend disagreement on {name}"
        t_np = _time(lambda: call(NUMPY_IMPL), args.repeats)
        t_nb = _time(lambda: call(NUMBA_IMPL), args.repeats)
        print(f"{name:<30} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us {t_np / t_nb:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
