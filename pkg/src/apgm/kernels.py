"""Hot numeric kernels: ray-batch grid traversal and cell-wise combination.

These two loops dominate a mapping cycle (hundreds of rays times hundreds
of cells, plus Dempster folds over whole layers), so both are compiled
with numba by default. Set ``APGM_PURE_NUMPY=1`` to select the fallback
paths instead: a plain-interpreter loop for the traversal and a vectorized
numpy implementation for the combination. ``benchmarks/bench_kernels.py``
compares the paths.

Traversal coordinates are pre-scaled so cells are unit squares:
u = (x - datum) / w. Cell binning is floor(u), matching the half-open
cell convention used by the container module.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _pure_numpy_requested() -> bool:
    return os.environ.get("APGM_PURE_NUMPY", "").strip().lower() in {
        "1",
        "true",
        "yes",
        "on",
    }


def _traverse_rays_impl(u0, v0, u1, v1, cap):
    """Parametric grid walk for a batch of segments (amanatides style).

    Emits, for every ray, the cells strictly between the origin cell and
    the endpoint cell, in traversal order. Exact corner crossings step
    diagonally, so only cells whose interior the segment passes through
    are emitted. Returns flat (x, y) cell-coordinate arrays of length n.
    """
    out_x = np.empty(cap, dtype=np.int64)
    out_y = np.empty(cap, dtype=np.int64)
    n = 0
    for i in range(u0.shape[0]):
        ax = u0[i]
        ay = v0[i]
        bx = u1[i]
        by = v1[i]
        cx = int(math.floor(ax))
        cy = int(math.floor(ay))
        ex = int(math.floor(bx))
        ey = int(math.floor(by))
        if cx == ex and cy == ey:
            continue
        dx = bx - ax
        dy = by - ay
        sx = 1 if dx > 0.0 else -1
        sy = 1 if dy > 0.0 else -1
        if dx != 0.0:
            tmax_x = ((cx + 1 if sx > 0 else cx) - ax) / dx
            tdelta_x = sx / dx
        else:
            tmax_x = math.inf
            tdelta_x = math.inf
        if dy != 0.0:
            tmax_y = ((cy + 1 if sy > 0 else cy) - ay) / dy
            tdelta_y = sy / dy
        else:
            tmax_y = math.inf
            tdelta_y = math.inf
        while True:
            if tmax_x < tmax_y:
                t = tmax_x
                cx += sx
                tmax_x += tdelta_x
            elif tmax_y < tmax_x:
                t = tmax_y
                cy += sy
                tmax_y += tdelta_y
            else:
                t = tmax_x
                cx += sx
                cy += sy
                tmax_x += tdelta_x
                tmax_y += tdelta_y
            if t >= 1.0:
                break
            if cx == ex and cy == ey:
                break
            if n >= cap:  # capacity guard; ray_cell_cap makes this unreachable
                break
            out_x[n] = cx
            out_y[n] = cy
            n += 1
    return out_x[:n], out_y[:n]


def _combine_masses_loop(a, b, out, conflict):
    """Dempster combination per row; singleton masses, frame mass implicit.

    Total-conflict rows (K >= 1 - 1e-12) come back vacuous; the caller
    reads the conflict array. Inputs are float64 rows of shape (n, k).
    """
    n, k = a.shape
    for i in range(n):
        sa = 0.0
        sb = 0.0
        dot = 0.0
        for j in range(k):
            sa += a[i, j]
            sb += b[i, j]
            dot += a[i, j] * b[i, j]
        big_k = sa * sb - dot
        conflict[i] = big_k
        norm = 1.0 - big_k
        if norm <= 1e-12:
            for j in range(k):
                out[i, j] = 0.0
            continue
        wa = 1.0 - sa
        wb = 1.0 - sb
        total = wa * wb / norm
        for j in range(k):
            v = (a[i, j] * b[i, j] + a[i, j] * wb + wa * b[i, j]) / norm
            out[i, j] = v
            total += v
        if total > 0.0:
            inv = 1.0 / total
            for j in range(k):
                out[i, j] *= inv
    return out, conflict


def _combine_masses_numpy(a, b, out, conflict):
    """Vectorized fallback with identical semantics to the loop kernel."""
    sa = a.sum(axis=-1)
    sb = b.sum(axis=-1)
    wa = 1.0 - sa
    wb = 1.0 - sb
    agree = a * b
    np.copyto(conflict, sa * sb - agree.sum(axis=-1))
    norm = 1.0 - conflict
    dead = norm <= 1e-12
    safe = np.where(dead, 1.0, norm)
    fused = (agree + a * wb[:, None] + b * wa[:, None]) / safe[:, None]
    omega = wa * wb / safe
    scale = fused.sum(axis=-1) + omega
    scale = np.where(scale <= 0.0, 1.0, scale)
    fused /= scale[:, None]
    fused[dead] = 0.0
    np.copyto(out, fused)
    return out, conflict


USING_NUMBA = False
if not _pure_numpy_requested():
    try:
        from numba import njit

        traverse_rays = njit(cache=True)(_traverse_rays_impl)
        combine_masses = njit(cache=True)(_combine_masses_loop)
        USING_NUMBA = True
    except ImportError:
        traverse_rays = _traverse_rays_impl
        combine_masses = _combine_masses_numpy
else:
    traverse_rays = _traverse_rays_impl
    combine_masses = _combine_masses_numpy


def ray_cell_cap(u0, v0, u1, v1) -> int:
    """Upper bound on the number of cells a ray batch can emit.

    A ray crosses at most |du| + 1 vertical and |dv| + 1 horizontal
    boundaries at parameters below one, so floor deltas plus three slots
    per ray cover every start/end alignment.
    """
    dx = np.abs(np.floor(u1) - np.floor(u0))
    dy = np.abs(np.floor(v1) - np.floor(v0))
    return int((dx + dy + 3.0).sum())
