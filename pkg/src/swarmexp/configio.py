"""Environment configuration files: one INI document, sections map/radar/
vehicle/dwa/reward/run.  Every key is optional and falls back to the library
default, so a minimal file can be a single [map] section."""

from __future__ import annotations

import configparser
from dataclasses import fields

from .dynamics import VehicleParams
from .env import EnvConfig, RewardWeights
from .planner import DwaParams
from .scenario import ScenarioSpec
from .sensing import RadarConfig


def _section(parser: configparser.ConfigParser, name: str) -> dict:
    return dict(parser[name]) if parser.has_section(name) else {}


def _build(cls, raw: dict, casts: dict):
    kwargs = {}
    for key, cast in casts.items():
        if key in raw:
            kwargs[cast[0]] = cast[1](raw[key])
    return cls(**kwargs)


_BOOL = {"1": True, "0": False, "true": True, "false": False,
         "yes": True, "no": False}


def _bool(v: str) -> bool:
    return _BOOL[v.strip().lower()]


def load_env_config(path) -> EnvConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)

    m = _section(parser, "map")
    kind = m.get("kind", "random_obstacle")
    if kind == "file":
        if "path" not in m:
            raise ValueError("[map] kind=file requires path=")
        map_source: ScenarioSpec | str = m["path"]
    else:
        spec_kwargs = {"kind": kind}
        for key, cast in (("seed", int), ("size", float), ("resolution", float),
                          ("density", float), ("cells", int),
                          ("corridor_width", float)):
            if key in m:
                field = {"density": "obstacle_density", "cells": "cell_count"}.get(key, key)
                spec_kwargs[field] = cast(m[key])
        map_source = ScenarioSpec(**spec_kwargs)

    radar = _build(RadarConfig, _section(parser, "radar"), {
        "range": ("detection_range", float),
        "alpha1": ("alpha1", float),
        "alpha2": ("alpha2", float),
        "max_returns": ("max_returns", int),
        "paper_literal": ("paper_literal_inequality", _bool),
    })
    vehicle = _build(VehicleParams, _section(parser, "vehicle"), {
        f.name: (f.name, float) for f in fields(VehicleParams)})
    dwa = _build(DwaParams, _section(parser, "dwa"), {
        "accel_samples": ("accel_samples", int),
        "steer_samples": ("steer_samples", int),
        "horizon": ("horizon", float),
        "goal_heading_weight": ("goal_heading_weight", float),
        "clearance_weight": ("clearance_weight", float),
        "velocity_weight": ("velocity_weight", float),
        "clearance_cap": ("clearance_cap", float),
        "goal_tolerance": ("goal_tolerance", float),
    })
    reward_raw = _section(parser, "reward")
    weights = _build(RewardWeights, reward_raw, {
        "w_success": ("success", float),
        "w_explore": ("explore", float),
        "w_overlap": ("overlap", float),
        "w_collision": ("collision", float),
        "w_time": ("time", float),
    })
    run = _section(parser, "run")

    return EnvConfig(
        n_agents=int(run.get("n_agents", 3)),
        horizon=int(run.get("horizon", 600)),
        micro_steps=int(run.get("micro_steps", 15)),
        map_source=map_source,
        radar=radar,
        vehicle=vehicle,
        dwa=dwa,
        weights=weights,
        success_threshold=float(reward_raw.get("success_threshold", 0.95)),
        success_bonus=float(reward_raw.get("success_bonus", 100.0)),
        collision_penalty=float(reward_raw.get("collision_penalty", 200.0)),
        region_grid=int(run.get("region_grid", 8)),
        seed=int(run.get("seed", 0)),
    )


def config_overrides(config: EnvConfig, overrides: dict) -> EnvConfig:
    """Apply a flat {key: value} override dict (the protocol configure verb).

    Supported keys: n_agents, horizon, micro_steps, region_grid, seed,
    success_threshold, success_bonus, collision_penalty, plus map.* keys
    (map.kind, map.seed, map.size, map.resolution, map.density, map.cells,
    map.corridor_width, map.path) and radar.* keys (radar.range,
    radar.alpha1, radar.alpha2, radar.max_returns).
    """
    from dataclasses import replace

    plain_int = {"n_agents", "horizon", "micro_steps", "region_grid", "seed"}
    plain_float = {"success_threshold", "success_bonus", "collision_penalty"}
    cfg_kwargs = {}
    map_kwargs = {}
    radar_kwargs = {}
    for key, value in overrides.items():
        if key in plain_int:
            cfg_kwargs[key] = int(value)
        elif key in plain_float:
            cfg_kwargs[key] = float(value)
        elif key.startswith("map."):
            map_kwargs[key[4:]] = value
        elif key.startswith("radar."):
            radar_kwargs[key[6:]] = value
        else:
            raise ValueError(f"unknown config override {key!r}")
    if map_kwargs:
        if map_kwargs.get("kind") == "file" or "path" in map_kwargs:
            cfg_kwargs["map_source"] = str(map_kwargs["path"])
        else:
            base = (config.map_source if isinstance(config.map_source, ScenarioSpec)
                    else ScenarioSpec(kind="random_obstacle"))
            spec_kwargs = {}
            for key, value in map_kwargs.items():
                field = {"density": "obstacle_density", "cells": "cell_count"}.get(key, key)
                cast = {"kind": str, "seed": int, "size": float, "resolution": float,
                        "obstacle_density": float, "cell_count": int,
                        "corridor_width": float}[field]
                spec_kwargs[field] = cast(value)
            cfg_kwargs["map_source"] = replace(base, **spec_kwargs)
    if radar_kwargs:
        rk = {}
        for key, value in radar_kwargs.items():
            field = {"range": "detection_range"}.get(key, key)
            cast = {"detection_range": float, "alpha1": float, "alpha2": float,
                    "max_returns": int,
                    "paper_literal_inequality": lambda v: bool(v) if isinstance(v, bool) else _bool(str(v))}[field]
            rk[field] = cast(value)
        cfg_kwargs["radar"] = replace(config.radar, **rk)
    return replace(config, **cfg_kwargs)


EXAMPLE_CONFIG = """\
; swarmexp environment configuration
[map]
kind = random_obstacle   ; random_obstacle | maze | file
seed = 0
size = 125
resolution = 1.0
density = 0.15
; kind = maze also reads: cells = 10, corridor_width = 5.0
; kind = file reads: path = maps/scene.mxm

[radar]
range = 20.0
alpha1 = 1e-3
alpha2 = 1e-6
max_returns = 4096
paper_literal = no

[vehicle]
wheelbase = 0.5
footprint_radius = 0.5
v_max = 2.0
a_max = 2.0
steer_max = 0.6
steer_rate_max = 2.0
dt = 0.1

[dwa]
accel_samples = 7
steer_samples = 11
horizon = 1.5
goal_heading_weight = 0.5
clearance_weight = 0.1
velocity_weight = 0.4
clearance_cap = 1.0
goal_tolerance = 0.5

[reward]
w_success = 1.0
w_explore = 1.0
w_overlap = 0.5
w_collision = 1.0
w_time = 0.1
success_bonus = 100.0
collision_penalty = 200.0
success_threshold = 0.95

[run]
n_agents = 3
horizon = 600
micro_steps = 15
region_grid = 8
seed = 0
"""
