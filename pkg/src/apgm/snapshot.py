"""Binary snapshot format for grid maps.

Self-describing little-endian container:

    magic  "APGM\\x01"
    header datum (2 x f64), edge length (f64), max step (u32)
    types  count (u32); per type: name, then label count + labels
           (strings are u32 length + utf-8 bytes)
    body   patch count (u32); per patch (sorted by index for determinism):
           index (2 x i64), layer count (u32); per layer: type id (u32),
           step (u32), raw float32 mass lattice

Payload masses are written exactly as stored, so save/load round-trips
bit-for-bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .evidence import Frame
from .grid import GridConfig, GridMap, Layer

MAGIC = b"APGM\x01"


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _read(fh, fmt: str):
    size = struct.calcsize(fmt)
    data = fh.read(size)
    if len(data) != size:
        raise ValueError("truncated snapshot")
    return struct.unpack(fmt, data)


def _read_str(fh) -> str:
    (n,) = _read(fh, "<I")
    data = fh.read(n)
    if len(data) != n:
        raise ValueError("truncated snapshot")
    return data.decode("utf-8")


def save_grid(grid: GridMap, path) -> Path:
    path = Path(path)
    cfg = grid.config
    type_names = list(cfg.types)
    type_ids = {name: i for i, name in enumerate(type_names)}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(
            struct.pack(
                "<dddI",
                cfg.datum[0],
                cfg.datum[1],
                cfg.edge_length,
                cfg.max_step,
            )
        )
        fh.write(struct.pack("<I", len(type_names)))
        for name in type_names:
            fh.write(_pack_str(name))
            labels = cfg.types[name].hypotheses
            fh.write(struct.pack("<I", len(labels)))
            for label in labels:
                fh.write(_pack_str(label))
        indices = sorted(grid.patches)
        fh.write(struct.pack("<I", len(indices)))
        for index in indices:
            patch = grid.patches[index]
            fh.write(struct.pack("<qqI", index[0], index[1], len(patch.layers)))
            for name in sorted(patch.layers):
                layer = patch.layers[name]
                fh.write(struct.pack("<II", type_ids[name], layer.step))
                fh.write(
                    np.ascontiguousarray(layer.masses, dtype="<f4").tobytes()
                )
    return path


def load_grid(path) -> GridMap:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a grid snapshot")
        dx, dy, edge, max_step = _read(fh, "<dddI")
        (n_types,) = _read(fh, "<I")
        types: dict[str, Frame] = {}
        type_names = []
        for _ in range(n_types):
            name = _read_str(fh)
            (n_labels,) = _read(fh, "<I")
            labels = tuple(_read_str(fh) for _ in range(n_labels))
            types[name] = Frame(labels)
            type_names.append(name)
        grid = GridMap(GridConfig((dx, dy), edge, types, max_step))
        (n_patches,) = _read(fh, "<I")
        for _ in range(n_patches):
            ix, iy, n_layers = _read(fh, "<qqI")
            for _ in range(n_layers):
                type_id, step = _read(fh, "<II")
                name = type_names[type_id]
                frame = types[name]
                m = 1 << step
                count = m * m * len(frame)
                raw = fh.read(count * 4)
                if len(raw) != count * 4:
                    raise ValueError("truncated snapshot")
                masses = np.frombuffer(raw, dtype="<f4").reshape(
                    m, m, len(frame)
                )
                grid.set_layer(
                    (ix, iy), Layer(name, frame, step, masses.copy())
                )
    return grid
