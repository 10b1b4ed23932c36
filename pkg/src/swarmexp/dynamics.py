"""Continuous Ackermann vehicle kinematics and collision detection.

Kinematic bicycle model: steering slews toward its target at a bounded rate,
speed integrates clamped acceleration, position advances along the current
heading, heading turns with speed * tan(steering) / wheelbase.  All inputs
are clamped, never rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .mapcore import WorldMap


def wrap_angle(h: float) -> float:
    """Normalize an angle to (-pi, pi]; in-range values pass through untouched."""
    if -math.pi < h <= math.pi:
        return h
    h = math.fmod(h + math.pi, 2.0 * math.pi)
    if h <= 0.0:
        h += 2.0 * math.pi
    return h - math.pi


@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    heading: float
    speed: float = 0.0
    steering: float = 0.0


@dataclass(frozen=True)
class ControlAction:
    acceleration: float
    steering_target: float


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 0.5
    footprint_radius: float = 0.5
    v_max: float = 2.0
    a_max: float = 2.0
    steer_max: float = 0.6
    steer_rate_max: float = 2.0
    dt: float = 0.1

    def __post_init__(self):
        for name in ("wheelbase", "footprint_radius", "v_max", "a_max",
                     "steer_max", "steer_rate_max", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def integrate(state: AgentState, action: ControlAction, params: VehicleParams) -> AgentState:
    """One control step of the bicycle model; pure and deterministic.

    This is the canonical update: the planner's rollout kernels replicate
    it operation for operation, and a test pins them together.
    """
    a = _clamp(action.acceleration, -params.a_max, params.a_max)
    target = _clamp(action.steering_target, -params.steer_max, params.steer_max)
    dt = params.dt

    delta = state.steering + _clamp(target - state.steering,
                                    -params.steer_rate_max * dt,
                                    params.steer_rate_max * dt)
    delta = _clamp(delta, -params.steer_max, params.steer_max)
    v = _clamp(state.speed + a * dt, -params.v_max, params.v_max)
    x = state.x + v * math.cos(state.heading) * dt
    y = state.y + v * math.sin(state.heading) * dt
    heading = wrap_angle(state.heading + v * math.tan(delta) / params.wheelbase * dt)
    return AgentState(x, y, heading, v, delta)


def check_collision(state: AgentState, wmap: WorldMap, params: VehicleParams) -> bool:
    """True iff an obstacle point is within the footprint or the pose left the map."""
    xmin, ymin, xmax, ymax = wmap.bounds
    if state.x < xmin or state.x > xmax or state.y < ymin or state.y > ymax:
        return True
    if wmap.n_obstacle == 0:
        return False
    grid = wmap.index_for("obstacle", max(params.footprint_radius, wmap.resolution))
    return grid.any_within(state.x, state.y, params.footprint_radius)
