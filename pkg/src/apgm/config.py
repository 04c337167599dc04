"""Scenario configuration files (INI sections, documented in the README).

``load_scenario`` turns a file into the (script, world, config) triple the
runner consumes; every problem found is collected and raised as one
:class:`ConfigError` so the CLI can print complete diagnostics.
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path

from .errors import ConfigError
from .grid import GridConfig
from .requirements import RequirementProfile, TypeRequirement
from .scenario import (
    CameraConfig,
    LidarConfig,
    ScenarioConfig,
    ScenarioScript,
    validate_scenario,
)
from .world import WorldModel, default_world

WORLD_PRESETS = {
    "default": default_world,
    "empty": WorldModel,
}


class _Reader:
    """Typed section access that records problems instead of raising."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.problems: list[str] = []

    def get(self, section, key, cast, default):
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key)
        try:
            return cast(raw)
        except (TypeError, ValueError):
            self.problems.append(f"[{section}] {key}: cannot parse {raw!r}")
            return default


def _as_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in {"1", "true", "yes", "on"}:
        return True
    if value in {"0", "false", "no", "off"}:
        return False
    raise ValueError(raw)


def _parse_keyframes(raw: str, problems: list[str]):
    frames = []
    for chunk in raw.replace(",", " ").split():
        parts = chunk.split(":")
        if len(parts) != 4:
            problems.append(f"keyframe {chunk!r} is not t:x:y:heading")
            continue
        frames.append(tuple(float(p) for p in parts))
    return frames


def _parse_modes(raw: str, problems: list[str]):
    modes = []
    for chunk in raw.replace(",", " ").split():
        parts = chunk.split(":")
        if len(parts) != 2:
            problems.append(f"mode switch {chunk!r} is not time:label")
            continue
        try:
            modes.append((float(parts[0]), parts[1]))
        except ValueError:
            problems.append(f"mode switch {chunk!r} has a bad time")
    return modes


def _lidar_from(reader: _Reader, section: str, name: str, mount) -> LidarConfig:
    return LidarConfig(
        name=name,
        beams=reader.get(section, "beams", int, 720),
        max_range=reader.get(section, "max_range", float, 100.0),
        noise_sigma=reader.get(section, "noise_sigma", float, 0.02),
        mount=(
            reader.get(section, "mount_x", float, mount[0]),
            reader.get(section, "mount_y", float, mount[1]),
        ),
        mu_hit=reader.get(section, "mu_hit", float, 0.6),
        mu_free=reader.get(section, "mu_free", float, 0.3),
    )


def _profile_from(reader: _Reader, section: str) -> RequirementProfile:
    def type_req(prefix: str, defaults: TypeRequirement) -> TypeRequirement:
        fov_deg = reader.get(section, f"{prefix}_fov_half_angle_deg", float, None)
        if fov_deg is None:
            fov = defaults.fov_half_angle_rad
        else:
            fov = math.radians(fov_deg)
        return TypeRequirement(
            active=reader.get(section, f"{prefix}_active", _as_bool, defaults.active),
            horizon_m=reader.get(
                section, f"{prefix}_horizon_m", float, defaults.horizon_m
            ),
            max_cell_size_m=reader.get(
                section, f"{prefix}_cell_size_m", float, defaults.max_cell_size_m
            ),
            fov_half_angle_rad=fov,
        )

    return RequirementProfile(
        {
            "occupancy": type_req("occupancy", TypeRequirement(True, 20.0, 0.1)),
            "semantic": type_req(
                "semantic",
                TypeRequirement(False, 40.0, 0.2, math.radians(30.0)),
            ),
        }
    )


def load_scenario(path) -> tuple[ScenarioScript, WorldModel, ScenarioConfig]:
    """Parse and validate a scenario file; raises ConfigError on problems."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    reader = _Reader(parser)

    grid = GridConfig(
        datum=(
            reader.get("grid", "datum_x", float, 0.0),
            reader.get("grid", "datum_y", float, 0.0),
        ),
        edge_length=reader.get("grid", "edge_length", float, 12.8),
        max_step=reader.get("grid", "max_step", int, 10),
    )

    preset = reader.get("world", "preset", str, "default")
    if preset not in WORLD_PRESETS:
        reader.problems.append(
            f"[world] preset: unknown {preset!r}, known: {sorted(WORLD_PRESETS)}"
        )
        preset = "default"
    world = WORLD_PRESETS[preset]()

    lidars = [
        _lidar_from(reader, "lidar.front", "lidar_front", (1.0, 0.0)),
        _lidar_from(reader, "lidar.rear", "lidar_rear", (-1.0, 0.0)),
    ]
    camera = CameraConfig(
        fov_half_angle_rad=math.radians(
            reader.get("camera", "fov_half_angle_deg", float, 30.0)
        ),
        max_range=reader.get("camera", "max_range", float, 40.0),
        range_step=reader.get("camera", "range_step", float, 0.4),
        angle_step_rad=math.radians(
            reader.get("camera", "angle_step_deg", float, 1.0)
        ),
        confidence_near=reader.get("camera", "confidence_near", float, 0.9),
        confidence_far=reader.get("camera", "confidence_far", float, 0.4),
    )

    modes = {}
    for section in parser.sections():
        if section.startswith("mode."):
            modes[section.removeprefix("mode.")] = _profile_from(reader, section)
    if not modes:
        reader.problems.append("no [mode.*] sections defined")

    keyframes = _parse_keyframes(
        reader.get("timeline", "keyframes", str, ""), reader.problems
    )
    mode_times = _parse_modes(
        reader.get("timeline", "modes", str, ""), reader.problems
    )
    script = ScenarioScript(
        keyframes=keyframes,
        mode_times=mode_times,
        duration_s=reader.get("run", "duration_s", float, 60.0),
        cycle_s=reader.get("run", "cycle_s", float, 0.1),
    )
    config = ScenarioConfig(
        grid=grid,
        lidars=lidars,
        camera=camera,
        modes=modes,
        seed=reader.get("run", "seed", int, 7),
        temporal_alpha=reader.get("run", "temporal_alpha", float, 0.95),
        measure_timing=reader.get("run", "timing", _as_bool, True),
    )

    problems = reader.problems + validate_scenario(script, config)
    if problems:
        raise ConfigError("; ".join(problems))
    return script, world, config


def validate_file(path) -> list[str]:
    """Diagnostics for a config file; empty list means it is usable."""
    try:
        load_scenario(path)
    except ConfigError as exc:
        return str(exc).split("; ")
    return []
