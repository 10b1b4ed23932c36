"""Local motion planner: Dynamic Window Approach over (accel, steer) samples.

Each control step the planner samples the window of accelerations (full
+-a_max, applied directly) crossed with the steering targets reachable
within one step at the slew rate, simulates every pair over a short horizon,
discards rollouts that touch an obstacle, and picks the best of

    goal_heading_w * (pi - |bearing error at rollout end|) / pi
  + clearance_w   * min(clearance, clearance_cap) / clearance_cap
  + velocity_w    * |v_end| / v_max

A rollout that passes within goal_tolerance of the goal counts as zero
bearing error (arrival makes the end bearing meaningless).

Ties keep the first sample in (accel index, steer index) order; steer
samples run from the left window edge down, so left turns win exact ties.
If every rollout collides the planner brakes as hard as possible without
changing steering.  The planner sees only the obstacle points handed to it
(the agent's own latest radar return), never the map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import AgentState, ControlAction, VehicleParams, wrap_angle


@dataclass(frozen=True)
class DwaParams:
    accel_samples: int = 7
    steer_samples: int = 11
    horizon: float = 1.5
    goal_heading_weight: float = 0.5
    clearance_weight: float = 0.1
    velocity_weight: float = 0.4
    clearance_cap: float = 1.0
    goal_tolerance: float = 0.5
    reversal_penalty: float = 0.1
    safety_margin: float = 0.1

    def __post_init__(self):
        if self.accel_samples < 3 or self.steer_samples < 3:
            raise ValueError("sample counts must be >= 3")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        weights = (self.goal_heading_weight, self.clearance_weight, self.velocity_weight)
        if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
            raise ValueError("weights must be >= 0 and not all zero")
        if self.clearance_cap <= 0 or self.goal_tolerance <= 0:
            raise ValueError("clearance_cap and goal_tolerance must be positive")
        if self.reversal_penalty < 0:
            raise ValueError("reversal_penalty must be >= 0")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be >= 0")


def goal_reached(state: AgentState, goal, dparams: DwaParams) -> bool:
    dx = goal[0] - state.x
    dy = goal[1] - state.y
    return dx * dx + dy * dy <= dparams.goal_tolerance * dparams.goal_tolerance


def _prune_obstacles(state: AgentState, obstacles: np.ndarray, reach: float) -> np.ndarray:
    """Drop obstacles no rollout pose can come within the clearance cap of."""
    if len(obstacles) == 0:
        return obstacles
    dx = obstacles[:, 0] - state.x
    dy = obstacles[:, 1] - state.y
    keep = dx * dx + dy * dy <= reach * reach
    return obstacles[keep]


def plan(state: AgentState, goal, obstacles, vparams: VehicleParams,
         dparams: DwaParams, bounds=None) -> ControlAction:
    """Pick a ControlAction driving toward goal while avoiding obstacles.

    ``bounds`` (xmin, ymin, xmax, ymax), when given, makes rollouts that
    leave the map count as collisions, mirroring the environment's collision
    rule at the arena edge.
    """
    if dparams.horizon <= vparams.dt:
        raise ValueError("horizon must exceed one control step")
    n_full = max(1, int(round(dparams.horizon / vparams.dt)))
    if bounds is None:
        bounds = (-math.inf, -math.inf, math.inf, math.inf)

    # sample order fixes the tie-break: strongest forward acceleration first,
    # then leftmost steering first, so "ahead" beats "reverse" on exact ties
    accels = np.linspace(vparams.a_max, -vparams.a_max, dparams.accel_samples)
    hi = min(vparams.steer_max, state.steering + vparams.steer_rate_max * vparams.dt)
    lo = max(-vparams.steer_max, state.steering - vparams.steer_rate_max * vparams.dt)
    steers = np.linspace(hi, lo, dparams.steer_samples)

    obst = np.asarray(obstacles, dtype=np.float64).reshape(-1, 2)
    reach = (n_full * vparams.dt * vparams.v_max
             + max(dparams.clearance_cap, vparams.footprint_radius)
             + dparams.safety_margin + 1.0)
    obst = _prune_obstacles(state, obst, reach)
    ox = np.ascontiguousarray(obst[:, 0])
    oy = np.ascontiguousarray(obst[:, 1])

    flat_a = np.repeat(accels, dparams.steer_samples)
    flat_s = np.tile(steers, dparams.accel_samples)
    state_vec = np.array([state.x, state.y, state.heading, state.speed, state.steering])

    # normal planning keeps an inflated safety margin to obstacles; if that
    # leaves nothing, fall back to the true footprint, then to progressively
    # shorter horizons so a wedged vehicle can still inch its way out
    attempts = list(dict.fromkeys([
        (n_full, vparams.footprint_radius + dparams.safety_margin),
        (n_full, vparams.footprint_radius),
        (max(1, n_full // 2), vparams.footprint_radius),
        (max(1, n_full // 4), vparams.footprint_radius),
        (1, vparams.footprint_radius),
    ]))
    for n_steps, footprint in attempts:
        ends, clearance, collided, goal_min_d2 = kernels.rollout_eval(
            state_vec, flat_a, flat_s, vparams.wheelbase, vparams.v_max,
            vparams.a_max, vparams.steer_max, vparams.steer_rate_max, vparams.dt,
            n_steps, ox, oy, footprint, dparams.clearance_cap,
            float(goal[0]), float(goal[1]),
            float(bounds[0]), float(bounds[1]), float(bounds[2]), float(bounds[3]))

        # a rollout that goes nowhere is never productive; discarding it
        # keeps the planner from freezing in place (displacement threshold
        # shrinks quadratically with the horizon: reachable motion from
        # rest does too)
        disp_x = ends[:, 0] - state.x
        disp_y = ends[:, 1] - state.y
        min_disp = 0.5 * vparams.footprint_radius * (n_steps / n_full) ** 2
        still = disp_x * disp_x + disp_y * disp_y < min_disp * min_disp
        viable = (collided == 0) & ~still
        if not viable.any():
            continue

        bearing = np.arctan2(goal[1] - ends[:, 1], goal[0] - ends[:, 0])
        err = np.abs(np.remainder(bearing - ends[:, 2] + math.pi, 2.0 * math.pi)
                     - math.pi)
        # a rollout that passes through the goal region counts as perfect
        # heading: past that point the bearing is meaningless, and scoring
        # the post-overshoot bearing stalls the planner outside braking range
        tol2 = dparams.goal_tolerance * dparams.goal_tolerance
        err[goal_min_d2 <= tol2] = 0.0
        # velocity term is the end speed projected onto the goal bearing, so
        # retreating scores negative; with reverse motion allowed a plain
        # |v| ties forward against backward and the planner limit-cycles
        directed_v = ends[:, 3] * np.cos(err)
        scores = (dparams.goal_heading_weight * (math.pi - err) / math.pi
                  + dparams.clearance_weight * clearance / dparams.clearance_cap
                  + dparams.velocity_weight * directed_v / vparams.v_max)
        # hysteresis: flipping the direction of travel costs a margin, so the
        # planner commits to a maneuver instead of oscillating between two
        # near-equal advance/retreat choices
        scores[ends[:, 3] * state.speed < -1e-12] -= dparams.reversal_penalty
        scores[~viable] = -math.inf
        best = int(np.argmax(scores))  # first maximum: deterministic tie-break
        return ControlAction(float(flat_a[best]), float(flat_s[best]))

    # fail safe: maximal braking, steering target held
    if state.speed > 0:
        brake = -vparams.a_max
    elif state.speed < 0:
        brake = vparams.a_max
    else:
        brake = 0.0
    return ControlAction(brake, state.steering)


def rollout_poses(state: AgentState, action: ControlAction,
                  vparams: VehicleParams, dparams: DwaParams) -> list[AgentState]:
    """Replay the rollout plan() scored for one action (used by safety checks)."""
    from .dynamics import integrate

    n_steps = max(1, int(round(dparams.horizon / vparams.dt)))
    poses = []
    s = state
    for _ in range(n_steps):
        s = integrate(s, action, vparams)
        poses.append(s)
    return poses
