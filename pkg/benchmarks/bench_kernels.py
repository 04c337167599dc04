#!/usr/bin/env python3
"""Benchmark the jitted kernels against their fallback paths.

Runs both implementations in one process (the env flag APGM_PURE_NUMPY
only selects which one the library binds at import time), so numbers are
directly comparable:

    python benchmarks/bench_kernels.py [--rays N] [--cells N] [--repeat K]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from apgm.kernels import (
    _combine_masses_loop,
    _combine_masses_numpy,
    _traverse_rays_impl,
    ray_cell_cap,
)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _time(fn, args, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_traversal(n_rays: int, repeat: int) -> list[tuple[str, float]]:
    rng = np.random.default_rng(0)
    u0 = rng.uniform(0.0, 10.0, n_rays)
    v0 = rng.uniform(0.0, 10.0, n_rays)
    ang = rng.uniform(0.0, 2.0 * np.pi, n_rays)
    length = rng.uniform(50.0, 300.0, n_rays)  # cells
    u1 = u0 + np.cos(ang) * length
    v1 = v0 + np.sin(ang) * length
    cap = ray_cell_cap(u0, v0, u1, v1)

    rows = [("traverse pure-python", _time(_traverse_rays_impl, (u0, v0, u1, v1, cap), repeat))]
    if HAVE_NUMBA:
        jitted = njit(cache=True)(_traverse_rays_impl)
        jitted(u0[:1], v0[:1], u1[:1], v1[:1], 8)  # compile
        rows.append(("traverse numba", _time(jitted, (u0, v0, u1, v1, cap), repeat)))
    return rows


def bench_combine(n_cells: int, repeat: int) -> list[tuple[str, float]]:
    rng = np.random.default_rng(1)
    a = rng.dirichlet((1.0, 1.0, 1.0), n_cells)[:, :2].copy()
    b = rng.dirichlet((1.0, 1.0, 1.0), n_cells)[:, :2].copy()
    out = np.empty_like(a)
    conflict = np.empty(n_cells)

    rows = [("combine numpy", _time(_combine_masses_numpy, (a, b, out, conflict), repeat))]
    if HAVE_NUMBA:
        jitted = njit(cache=True)(_combine_masses_loop)
        jitted(a[:1].copy(), b[:1].copy(), out[:1].copy(), conflict[:1].copy())
        rows.append(("combine numba", _time(jitted, (a, b, out, conflict), repeat)))
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rays", type=int, default=2000)
    parser.add_argument("--cells", type=int, default=500_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rows = bench_traversal(args.rays, args.repeat)
    rows += bench_combine(args.cells, args.repeat)
    print(f"{'kernel':<24} {'best of ' + str(args.repeat):>12}")
    base: dict[str, float] = {}
    for name, seconds in rows:
        kind = name.split()[0]
        speedup = ""
        if kind in base:
            speedup = f"  ({base[kind] / seconds:.1f}x vs fallback)"
        else:
            base[kind] = seconds
        print(f"{name:<24} {seconds * 1e3:>10.2f} ms{speedup}")
    if not HAVE_NUMBA:
        print("numba not installed: only fallback paths measured")


if __name__ == "__main__":
    main()
