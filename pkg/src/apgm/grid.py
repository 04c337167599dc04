"""Patched grid map container with typed, power-of-two layers.

A grid map is a sparse set of square patches anchored to a global datum.
Each patch holds at most one layer per information type; a layer is a
2^r x 2^r lattice of evidence cells, so layers of different resolution
steps nest exactly on shared boundaries.

Concurrency: a GridMap is single-writer. Distinct patches are independent
units, so a fusion driver may fill different output patches from different
threads as long as no patch is touched by more than one writer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .errors import (
    CellOutOfBoundsError,
    PointOutsidePatchError,
    ResolutionConflictError,
)
from .evidence import Frame

OCCUPIED = "occupied"
FREE = "free"
OCCUPANCY_FRAME = Frame((OCCUPIED, FREE))

ROAD = "road"
MARKING = "marking"
BLOCKED = "blocked"
UNKNOWN = "unknown"
SEMANTIC_FRAME = Frame((ROAD, MARKING, BLOCKED, UNKNOWN))

BYTES_PER_MASS = 4  # cells store one float32 per hypothesis


@dataclass(frozen=True)
class GridConfig:
    """Immutable geometry and type table shared by compatible grid maps."""

    datum: tuple[float, float] = (0.0, 0.0)
    edge_length: float = 12.8
    types: Mapping[str, Frame] = field(
        default_factory=lambda: {
            "occupancy": OCCUPANCY_FRAME,
            "semantic": SEMANTIC_FRAME,
        }
    )
    max_step: int = 10

    def __post_init__(self):
        if self.edge_length <= 0.0:
            raise ValueError("edge length must be positive")
        if not self.types:
            raise ValueError("type table must not be empty")

    def cell_width(self, step: int) -> float:
        return self.edge_length / (1 << step)

    def frame_of(self, type_name: str) -> Frame:
        try:
            return self.types[type_name]
        except KeyError:
            raise ValueError(
                f"unknown information type {type_name!r}; "
                f"this map knows {sorted(self.types)}"
            ) from None


class Layer:
    """One information type rasterized at resolution step r inside a patch.

    ``masses`` has shape (m, m, k) with m = 2^r and k = len(frame); the
    first axis is the x cell index, the second the y cell index. Cells
    store singleton masses as float32; the frame mass is the remainder.
    """

    __slots__ = ("type_name", "frame", "step", "masses")

    def __init__(self, type_name: str, frame: Frame, step: int, masses=None):
        m = 1 << step
        if masses is None:
            masses = np.zeros((m, m, len(frame)), dtype=np.float32)
        else:
            masses = np.asarray(masses, dtype=np.float32)
            if masses.shape != (m, m, len(frame)):
                raise ValueError(
                    f"mass array shape {masses.shape} does not match "
                    f"step {step} over a {len(frame)}-hypothesis frame"
                )
        self.type_name = type_name
        self.frame = frame
        self.step = step
        self.masses = masses

    @property
    def cells(self) -> int:
        return 1 << (2 * self.step)

    @property
    def payload_bytes(self) -> int:
        return self.cells * len(self.frame) * BYTES_PER_MASS

    def omega(self) -> np.ndarray:
        """Frame mass per cell, computed from the stored singletons."""
        return 1.0 - self.masses.astype(np.float64).sum(axis=-1)

    def copy(self) -> "Layer":
        return Layer(self.type_name, self.frame, self.step, self.masses.copy())

    def __repr__(self) -> str:
        return f"Layer({self.type_name!r}, r={self.step})"


@dataclass
class Patch:
    """Square sub-map at a lattice index, holding at most one layer per type."""

    index: tuple[int, int]
    layers: dict[str, Layer] = field(default_factory=dict)


class GridMap:
    """Sparse collection of patches over a fixed datum and edge length."""

    def __init__(self, config: GridConfig):
        self.config = config
        self.patches: dict[tuple[int, int], Patch] = {}

    @classmethod
    def like(cls, other: "GridMap") -> "GridMap":
        """An empty map sharing the other map's geometry and type table."""
        return cls(other.config)

    # -- datum arithmetic -------------------------------------------------

    def patch_datum(self, index: tuple[int, int]) -> np.ndarray:
        """World reference of the patch square's low corner."""
        e = self.config.edge_length
        return np.array(
            [
                self.config.datum[0] + e * index[0],
                self.config.datum[1] + e * index[1],
            ]
        )

    def cell_datum(
        self, index: tuple[int, int], step: int, cell: tuple[int, int]
    ) -> np.ndarray:
        """World reference of a cell's low corner within a patch."""
        m = 1 << step
        a, b = cell
        if not (0 <= a < m and 0 <= b < m):
            raise CellOutOfBoundsError(f"cell {cell} outside 2^{step} lattice")
        width = self.config.cell_width(step)
        return self.patch_datum(index) + width * np.array([a, b])

    def patch_index_of(self, point) -> tuple[int, int]:
        """Patch containing a world point; edges belong to the upper patch."""
        e = self.config.edge_length
        return (
            math.floor((point[0] - self.config.datum[0]) / e),
            math.floor((point[1] - self.config.datum[1]) / e),
        )

    # -- structure --------------------------------------------------------

    def get_or_create_layer(
        self, index: tuple[int, int], type_name: str, step: int
    ) -> Layer:
        """Lazily allocate the patch/layer; fresh cells are vacuous.

        An existing layer's step is never changed implicitly; request a
        resample instead (raises :class:`ResolutionConflictError`).
        """
        if not 0 <= step <= self.config.max_step:
            raise ValueError(
                f"step {step} outside configured bounds [0, {self.config.max_step}]"
            )
        frame = self.config.frame_of(type_name)
        patch = self.patches.get(index)
        if patch is None:
            patch = Patch(index)
            self.patches[index] = patch
        layer = patch.layers.get(type_name)
        if layer is None:
            layer = Layer(type_name, frame, step)
            patch.layers[type_name] = layer
        elif layer.step != step:
            raise ResolutionConflictError(
                f"{type_name} layer at {index} has step {layer.step}, "
                f"requested {step}"
            )
        return layer

    def layer_at(self, index: tuple[int, int], type_name: str) -> Layer | None:
        patch = self.patches.get(index)
        if patch is None:
            return None
        return patch.layers.get(type_name)

    def set_layer(self, index: tuple[int, int], layer: Layer) -> None:
        patch = self.patches.get(index)
        if patch is None:
            patch = Patch(index)
            self.patches[index] = patch
        patch.layers[layer.type_name] = layer

    def delete_patch(self, index: tuple[int, int]) -> None:
        self.patches.pop(index, None)

    def iter_layers(self) -> Iterator[tuple[tuple[int, int], Layer]]:
        for index, patch in self.patches.items():
            for layer in patch.layers.values():
                yield index, layer

    # -- accounting -------------------------------------------------------

    def cell_count(self, type_name: str | None = None) -> int:
        """Total allocated cells, optionally restricted to one type."""
        return sum(
            layer.cells
            for _, layer in self.iter_layers()
            if type_name is None or layer.type_name == type_name
        )

    def memory_bytes(self) -> int:
        """Cell payload bytes only; container bookkeeping is not included."""
        return sum(layer.payload_bytes for _, layer in self.iter_layers())

    def layer_count(self) -> int:
        return sum(len(p.layers) for p in self.patches.values())

    def copy(self) -> "GridMap":
        out = GridMap(self.config)
        for index, patch in self.patches.items():
            out.patches[index] = Patch(
                index, {t: l.copy() for t, l in patch.layers.items()}
            )
        return out

    def __repr__(self) -> str:
        return (
            f"GridMap({len(self.patches)} patches, "
            f"{self.layer_count()} layers, {self.cell_count()} cells)"
        )


def cell_index_of(
    point, patch_datum, edge_length: float, step: int
) -> tuple[int, int]:
    """Cell of a point inside a patch square; half-open cell extents.

    The point must lie in [datum, datum + e) per axis; the result is
    clamped to the lattice to absorb float rounding at the far edge.
    """
    m = 1 << step
    out = []
    for axis in range(2):
        off = point[axis] - patch_datum[axis]
        if off < 0.0 or off >= edge_length:
            raise PointOutsidePatchError(
                f"point {tuple(point)} outside patch at {tuple(patch_datum)}"
            )
        out.append(min(math.floor(off * m / edge_length), m - 1))
    return out[0], out[1]


def global_cells_of(points: np.ndarray, datum, width: float) -> np.ndarray:
    """Absolute cell coordinates (floor binning) for an (N, 2) point array."""
    pts = np.asarray(points, dtype=np.float64)
    return np.floor((pts - np.asarray(datum, dtype=np.float64)) / width).astype(
        np.int64
    )


def split_global_cells(cells: np.ndarray, step: int) -> tuple[np.ndarray, np.ndarray]:
    """Split absolute cell coordinates into (patch index, local cell index)."""
    m = 1 << step
    patch = np.floor_divide(cells, m)
    local = cells - patch * m
    return patch, local
