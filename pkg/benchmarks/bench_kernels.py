#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the reference backend.

Run from the repository root:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from cfsync.kernels import _reference

try:
    from cfsync.kernels import _speedups
except ImportError:
    _speedups = None


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_outer_moment():
    rng = np.random.default_rng(0)
    taus = rng.uniform(0, 3, 1_000_000)
    return ("mc_delay_outer_moment (1e6 draws)",
            [(m.mc_delay_outer_moment, (taus, 0.3, 6))
             for m in (_reference, _speedups) if m])


def bench_contamination():
    rng = np.random.default_rng(1)
    chips = rng.choice([-1.0, 1.0], 256)
    taus = rng.uniform(0, 3, 200_000)
    psi = rng.standard_normal(200_000) ** 2
    return ("mc_contamination_diag (2e5 draws, N=256)",
            [(m.mc_contamination_diag, (chips, taus, psi, 0.3, 266))
             for m in (_reference, _speedups) if m])


def bench_grid():
    rng = np.random.default_rng(2)
    bases = np.ascontiguousarray(np.linalg.qr(rng.standard_normal((64, 266, 4)))[0])
    shifted = np.ascontiguousarray(
        rng.standard_normal((266, 64)) + 1j * rng.standard_normal((266, 64)))
    return ("projection_energy_grid (64x64 grid, M=266, L=4)",
            [(m.projection_energy_grid, (bases, shifted))
             for m in (_reference, _speedups) if m])


def bench_swap_chain():
    rng = np.random.default_rng(3)
    n = 36
    cluster = rng.integers(0, 8, n).astype(np.int64)
    pilot = np.arange(n, dtype=np.int64) % 12
    # legal start: spread clusters round-robin
    order = np.argsort(cluster, kind="stable")
    pilot = np.empty(n, dtype=np.int64)
    pilot[order] = np.arange(n) % 12
    t = rng.uniform(0.01, 1.0, (n, n))
    np.fill_diagonal(t, 0.0)
    desired = rng.uniform(5, 50, n)
    req = np.full(n, 0.5)
    n_iter = 20_000
    pairs = rng.integers(0, n, size=(n_iter * 8, 2))
    unis = rng.random(n_iter)
    args = (pilot, cluster, t, desired, 0.5, req, 12, pairs, unis, n_iter, 0.01)
    return (f"swap_chain ({n_iter} iterations, 36 slaves)",
            [(m.swap_chain, args) for m in (_reference, _speedups) if m])


def main():
    if _speedups is None:
        print("compiled extension not built; timing the reference backend only")
    rows = []
    for name, entries in (bench_outer_moment(), bench_contamination(),
                          bench_grid(), bench_swap_chain()):
        ref = timeit(*entries[0][:1], *entries[0][1])
        if len(entries) > 1:
            fast = timeit(entries[1][0], *entries[1][1])
            rows.append((name, ref, fast, ref / fast))
        else:
            rows.append((name, ref, float("nan"), float("nan")))
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'reference':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, ref, fast, ratio in rows:
        print(f"{name:<{width}}  {ref * 1e3:>8.1f}ms  {fast * 1e3:>8.1f}ms  {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
