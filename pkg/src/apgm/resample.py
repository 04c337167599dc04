"""Spatial cell merge/split operators and layer resampling.

Occupancy cells are merged and split in the measurement space by inverting
the grid measurement model: merged occupancy is the complement of the
product of the children's miss probabilities, and a split distributes the
miss probability evenly over the children. That keeps resampled layers
consistent with the evidence a sensor would have produced at the target
resolution, which plain Dempster combination does not (free neighbours
erode occupied cells there).

Free-space mass is merged by median and split by value copy, clipped
against the occupancy mass so cells stay normalized; occupancy wins the
clip because it is the safety-critical quantity.

Semantic layers use a pragmatic mean/copy pair; a principled operator for
arbitrary hypothesis counts is an open problem.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import StepDeltaTooLargeError, UnsupportedTypeError
from .evidence import BBA, make_bba
from .grid import Layer

# Cap on |r_target - r| per request; 4 already means a 256x cell blowup.
MAX_STEP_DELTA = 4


# -- occupancy, block level ------------------------------------------------
# Arrays have shape (..., B, 2) for merge (B children per block) and
# (..., 2) for split; channel 0 is occupied, channel 1 free.


def occ_block_merge(children: np.ndarray) -> np.ndarray:
    children = np.asarray(children, dtype=np.float64)
    occ = 1.0 - np.prod(1.0 - children[..., 0], axis=-1)
    free = np.median(children[..., 1], axis=-1)
    free = np.minimum(free, 1.0 - occ)
    return np.stack([occ, free], axis=-1)


def occ_cell_split(parent: np.ndarray, n: int) -> np.ndarray:
    """Per-child masses; identical for all n children of a cell."""
    parent = np.asarray(parent, dtype=np.float64)
    occ = 1.0 - (1.0 - parent[..., 0]) ** (1.0 / n)
    free = np.minimum(parent[..., 1], 1.0 - occ)
    return np.stack([occ, free], axis=-1)


def sem_block_merge(children: np.ndarray) -> np.ndarray:
    children = np.asarray(children, dtype=np.float64)
    mean = children.mean(axis=-2)
    total = mean.sum(axis=-1)
    over = total > 1.0
    if np.any(over):
        mean = np.where(over[..., None], mean / total[..., None], mean)
    return mean


def sem_cell_split(parent: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(parent, dtype=np.float64).copy()


BlockMerge = Callable[[np.ndarray], np.ndarray]
CellSplit = Callable[[np.ndarray, int], np.ndarray]

_OPERATORS: dict[str, tuple[BlockMerge, CellSplit]] = {
    "occupancy": (occ_block_merge, occ_cell_split),
    "semantic": (sem_block_merge, sem_cell_split),
}


def register_operators(type_name: str, merge: BlockMerge, split: CellSplit) -> None:
    _OPERATORS[type_name] = (merge, split)


# -- cell-level interface ----------------------------------------------------


def merge_occ(cells: Sequence[BBA]) -> BBA:
    """Merge occupancy evidence of any number of co-located cells."""
    if not cells:
        raise ValueError("need at least one cell to merge")
    frame = cells[0].frame
    stack = np.stack([c.masses for c in cells])  # (B, 2)
    merged = occ_block_merge(stack[None, :, :])[0]
    return make_bba(frame, merged)


def split_occ(cell: BBA, n: int) -> list[BBA]:
    """Distribute occupancy evidence evenly over n child cells."""
    if n < 1:
        raise ValueError("child count must be positive")
    child = occ_cell_split(cell.masses, n)
    return [make_bba(cell.frame, child) for _ in range(n)]


def merge_sem(cells: Sequence[BBA]) -> BBA:
    if not cells:
        raise ValueError("need at least one cell to merge")
    stack = np.stack([c.masses for c in cells])
    return make_bba(cells[0].frame, sem_block_merge(stack[None, :, :])[0])


def split_sem(cell: BBA, n: int) -> list[BBA]:
    return [make_bba(cell.frame, cell.masses.copy()) for _ in range(n)]


# -- layer-level resampling ---------------------------------------------------


def resample_layer(
    layer: Layer, r_target: int, max_delta: int = MAX_STEP_DELTA
) -> Layer:
    """Resample a layer to a new resolution step.

    Upsampling splits every cell into a 2^d x 2^d block; downsampling
    merges aligned blocks. Equal steps return the same layer object
    (no copy), so callers that need a private result must copy.
    """
    delta = r_target - layer.step
    if delta == 0:
        return layer
    if layer.type_name not in _OPERATORS:
        raise UnsupportedTypeError(
            f"no merge/split operators registered for {layer.type_name!r}"
        )
    if abs(delta) > max_delta:
        raise StepDeltaTooLargeError(
            f"step change {layer.step} -> {r_target} exceeds cap {max_delta}"
        )
    if r_target < 0:
        raise ValueError("resolution step must be nonnegative")
    merge, split = _OPERATORS[layer.type_name]
    src = layer.masses.astype(np.float64)
    k = src.shape[-1]
    if delta > 0:
        factor = 1 << delta
        child = split(src, factor * factor)
        out = np.repeat(np.repeat(child, factor, axis=0), factor, axis=1)
    else:
        factor = 1 << (-delta)
        m_out = src.shape[0] // factor
        blocks = (
            src.reshape(m_out, factor, m_out, factor, k)
            .transpose(0, 2, 1, 3, 4)
            .reshape(m_out, m_out, factor * factor, k)
        )
        out = merge(blocks)
    return Layer(layer.type_name, layer.frame, r_target, out.astype(np.float32))
