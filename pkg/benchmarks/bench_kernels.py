"""Benchmark the numba kernels against the pure-numpy fallbacks on
pipeline-shaped workloads, verifying that both paths agree exactly.

Run with:  python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from actiseq import kernels
from actiseq.gp_core import HUGE, generate_tree


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_eval_program(rng, repeats):
    x = rng.normal(0, 1000, (500, 3))
    programs = [generate_tree(4, "grow", rng, 3).program() for _ in range(200)]

    def run(fn):
        def inner():
            for ops, args, vals, need in programs:
                fn(ops, args, vals, need, x, HUGE)
        return inner

    check = [
        np.array_equal(
            kernels.eval_program_numpy(*p, x, HUGE), kernels.eval_program_numba(*p, x, HUGE)
        )
        for p in programs
    ]
    assert all(check)
    return (
        timeit(run(kernels.eval_program_numba), repeats),
        timeit(run(kernels.eval_program_numpy), repeats),
        "200 trees x 500 rows",
    )


def bench_fit_threshold(rng, repeats):
    cases = [
        (rng.normal(size=500), rng.integers(0, 2, 500).astype(np.int64)) for _ in range(200)
    ]
    for y, lab in cases:
        assert kernels.fit_threshold_numpy(y, lab) == tuple(kernels.fit_threshold_numba(y, lab))

    def run(fn):
        def inner():
            for y, lab in cases:
                fn(y, lab)
        return inner

    return (
        timeit(run(kernels.fit_threshold_numba), repeats),
        timeit(run(kernels.fit_threshold_numpy), repeats),
        "200 scans x 500 responses",
    )


def bench_pareto_ranks(rng, repeats):
    cases = [
        (rng.integers(0, 100, 200).astype(float), rng.integers(1, 40, 200)) for _ in range(100)
    ]
    for err, size in cases:
        assert np.array_equal(
            kernels.pareto_ranks_numpy(err, size), kernels.pareto_ranks_numba(err, size)
        )

    def run(fn):
        def inner():
            for err, size in cases:
                fn(err, size)
        return inner

    return (
        timeit(run(kernels.pareto_ranks_numba), repeats),
        timeit(run(kernels.pareto_ranks_numpy), repeats),
        "100 rankings x 200 points",
    )


def bench_viterbi(rng, repeats):
    k, m, n = 5, 6, 364
    with np.errstate(divide="ignore"):
        lp = np.log(rng.dirichlet(np.ones(k)))
        la = np.log(rng.dirichlet(np.ones(k), size=k))
        lb = np.log(rng.dirichlet(np.ones(m), size=k))
    cases = [rng.integers(0, m, n) for _ in range(100)]
    for obs in cases:
        a = kernels.viterbi_numpy(lp, la, lb, obs)
        b = kernels.viterbi_numba(lp, la, lb, obs)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def run(fn):
        def inner():
            for obs in cases:
                fn(lp, la, lb, obs)
        return inner

    return (
        timeit(run(kernels.viterbi_numba), repeats),
        timeit(run(kernels.viterbi_numpy), repeats),
        "100 decodes, N=364 K=5",
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is unavailable (or disabled); nothing to compare")
    kernels.warmup()
    rng = np.random.default_rng(0)

    benches = [
        ("eval_program", bench_eval_program),
        ("fit_threshold", bench_fit_threshold),
        ("pareto_ranks", bench_pareto_ranks),
        ("viterbi", bench_viterbi),
    ]
    print(f"{'kernel':<15} {'numba':>10} {'numpy':>10} {'speedup':>8}  workload")
    for name, bench in benches:
        t_jit, t_py, workload = bench(rng, args.repeats)
        print(
            f"{name:<15} {t_jit * 1e3:>8.2f}ms {t_py * 1e3:>8.2f}ms "
            f"{t_py / t_jit:>7.1f}x  {workload}"
        )
    print("all kernels agree bit-for-bit across both paths")


if __name__ == "__main__":
    main()
