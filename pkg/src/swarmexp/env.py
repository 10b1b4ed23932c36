"""The exploration environment: episode lifecycle, two-level control, rewards.

A macro step receives one goal per agent (a coarse region index plus an
in-region offset, decoded to world coordinates) and runs K micro steps of
plan -> integrate -> collision check -> sense -> mark explored per agent.
Rewards are the sum of five components per agent: success bonus, new-area
exploration, sensing overlap with teammates, collision penalty, and a time
penalty proportional to coverage.  Everything is deterministic given
(config, seed, goal stream).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import AgentState, VehicleParams, check_collision, integrate, wrap_angle
from .mapcore import ExplorationMask, GridProjection, WorldMap, project_to_grid
from .planner import DwaParams, goal_reached, plan
from .scenario import ScenarioSpec, build_map, validate_map
from .sensing import RadarConfig, SensedPoints, sense


class EnvError(RuntimeError):
    pass


class PlacementError(EnvError):
    """Could not place all agents collision-free and separated."""


class EpisodeDoneError(EnvError):
    """step_macro called on a finished episode."""


class BatchError(EnvError):
    """An environment inside a batch failed; carries the env index."""

    def __init__(self, env_index: int, cause: BaseException):
        super().__init__(f"environment {env_index}: {cause}")
        self.env_index = env_index
        self.cause = cause


@dataclass(frozen=True)
class RewardWeights:
    success: float = 1.0
    explore: float = 1.0
    overlap: float = 0.5
    collision: float = 1.0
    time: float = 0.1


@dataclass
class EnvConfig:
    n_agents: int = 3
    horizon: int = 600
    micro_steps: int = 15
    map_source: ScenarioSpec | str | WorldMap = field(
        default_factory=lambda: ScenarioSpec(kind="random_obstacle"))
    radar: RadarConfig = field(default_factory=RadarConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    dwa: DwaParams = field(default_factory=DwaParams)
    weights: RewardWeights = field(default_factory=RewardWeights)
    success_threshold: float = 0.95
    success_bonus: float = 100.0
    collision_penalty: float = 200.0
    region_grid: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if self.horizon < 1 or self.micro_steps < 1:
            raise ValueError("horizon and micro_steps must be >= 1")
        if not 0.0 < self.success_threshold <= 1.0:
            raise ValueError("success_threshold must be in (0, 1]")
        if self.region_grid < 1:
            raise ValueError("region_grid must be >= 1")


@dataclass(frozen=True)
class Goal:
    agent: int
    region_index: int
    offset: tuple[float, float]
    world: tuple[float, float]


@dataclass(frozen=True)
class RewardBreakdown:
    success: float = 0.0
    exploration: float = 0.0
    overlap: float = 0.0
    collision: float = 0.0
    time: float = 0.0

    def total(self) -> float:
        return self.success + self.exploration + self.overlap + self.collision + self.time

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.success, self.exploration, self.overlap, self.collision, self.time)


@dataclass
class Observation:
    """What one agent sees after a macro step (perfect-communication bundle)."""

    sensed: SensedPoints
    grid: GridProjection
    state: AgentState
    all_states: tuple[AgentState, ...]
    goals: tuple[Goal, ...] | None


@dataclass
class AgentOutcome:
    observation: Observation
    reward: float
    breakdown: RewardBreakdown
    collided: bool
    # every free-point index this agent sensed during the macro step (the
    # union over its K micro senses; empty on reset)
    sensed_this_step: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


@dataclass
class StepOutcome:
    tick: int
    cov: float
    done: bool
    agents: list[AgentOutcome]


def decode_target(region_index: int, offset, bounds, l: int) -> tuple[float, float]:
    """Region index + in-region offset -> world coordinate.

    Regions tile the bounds row-major in an l x l grid; the offset picks the
    point inside the region, clamped to [0, 1] per axis.
    """
    if not 0 <= region_index < l * l:
        raise ValueError(f"region_index {region_index} out of range [0, {l * l})")
    u = min(1.0, max(0.0, float(offset[0])))
    v = min(1.0, max(0.0, float(offset[1])))
    row, col = divmod(int(region_index), l)
    xmin, ymin, xmax, ymax = bounds
    x = xmin + (col + u) * (xmax - xmin) / l
    y = ymin + (row + v) * (ymax - ymin) / l
    return x, y


def encode_target(point, bounds, l: int) -> tuple[int, tuple[float, float]]:
    """Inverse of decode_target (up to clamping at the bounds edge)."""
    xmin, ymin, xmax, ymax = bounds
    cw = (xmax - xmin) / l
    ch = (ymax - ymin) / l
    col = min(l - 1, max(0, int((point[0] - xmin) / cw)))
    row = min(l - 1, max(0, int((point[1] - ymin) / ch)))
    u = min(1.0, max(0.0, (point[0] - xmin) / cw - col))
    v = min(1.0, max(0.0, (point[1] - ymin) / ch - row))
    return row * l + col, (u, v)


def compute_rewards(weights: RewardWeights, success_bonus: float,
                    collision_penalty: float, n_free: int, cov: float,
                    new_global: list[int], overlap_counts: list[int],
                    collided: list[bool], success_now: bool) -> list[RewardBreakdown]:
    """Per-agent five-component breakdown for one macro step.

    Exploration and overlap are normalized by the free-point count and scaled
    x1000 so rewards are map-size invariant; success and collision carry the
    configured bonuses; time is the coverage-proportional penalty.
    """
    out = []
    for i in range(len(new_global)):
        out.append(RewardBreakdown(
            success=weights.success * success_bonus if success_now else 0.0,
            exploration=weights.explore * (new_global[i] / n_free) * 1000.0,
            overlap=-weights.overlap * (overlap_counts[i] / n_free) * 1000.0,
            collision=-weights.collision * collision_penalty if collided[i] else 0.0,
            time=-weights.time * cov,
        ))
    return out


class ExplorationEnv:
    """One exploration episode over one map, driven by macro goals."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.wmap = build_map(config.map_source)
        report = validate_map(self.wmap, config.vehicle.footprint_radius)
        if not report.valid:
            raise EnvError(f"map {self.wmap.name!r} fails validation:\n{report.to_text()}")
        # warm the spatial indexes used every micro step
        self.wmap.index_for("free", config.radar.detection_range)
        if self.wmap.n_obstacle:
            self.wmap.index_for("obstacle", config.radar.detection_range)
            self.wmap.index_for("obstacle",
                                max(config.vehicle.footprint_radius, self.wmap.resolution))
        self.states: list[AgentState] = []
        self.masks = ExplorationMask(config.n_agents, self.wmap.n_free)
        self.tick = 0
        self.done = False
        self._started = False

    # -- episode lifecycle -------------------------------------------------

    def reset(self, seed: int | None = None) -> StepOutcome:
        """Place agents, clear masks, perform the initial sense."""
        cfg = self.config
        if seed is None:
            seed = cfg.seed
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x5EED)))
        veh = cfg.vehicle
        placed: list[AgentState] = []
        min_sep = 4.0 * veh.footprint_radius
        for i in range(cfg.n_agents):
            for _ in range(400):
                idx = int(rng.integers(self.wmap.n_free))
                x, y = self.wmap.free[idx]
                heading = wrap_angle(float(rng.uniform(-math.pi, math.pi)))
                state = AgentState(float(x), float(y), heading)
                if check_collision(state, self.wmap, veh):
                    continue
                if any((s.x - x) ** 2 + (s.y - y) ** 2 < min_sep * min_sep for s in placed):
                    continue
                placed.append(state)
                break
            else:
                raise PlacementError(
                    f"could not place agent {i} of {cfg.n_agents} after 400 tries")
        self.states = placed
        self.masks = ExplorationMask(cfg.n_agents, self.wmap.n_free)
        self.tick = 0
        self.done = False
        self._started = True
        self._micro_tick = 0
        self._success_fired = False
        self._trajectories: list[list[tuple[float, float]]] = [
            [(s.x, s.y)] for s in placed]
        self._last_sensed = [
            sense(s, self.wmap, cfg.radar, agent=i, tick=0)
            for i, s in enumerate(placed)]
        zero = RewardBreakdown()
        agents = [
            AgentOutcome(self._observation(i, None), 0.0, zero, False)
            for i in range(cfg.n_agents)]
        return StepOutcome(tick=0, cov=self.masks.coverage, done=False, agents=agents)

    def step_macro(self, goals) -> StepOutcome:
        """Run K micro steps toward the given per-agent goals."""
        cfg = self.config
        if not self._started:
            raise EnvError("reset() must be called before step_macro()")
        if self.done:
            raise EpisodeDoneError(f"episode finished at tick {self.tick}")
        goal_objs = self._normalize_goals(goals)

        n = cfg.n_agents
        veh, dwa, radar = cfg.vehicle, cfg.dwa, cfg.radar
        new_global = [0] * n
        collided = [False] * n
        sensed_macro = np.zeros((n, self.wmap.n_free), dtype=bool)

        for _ in range(cfg.micro_steps):
            self._micro_tick += 1
            for i in range(n):
                state = self.states[i]
                goal = goal_objs[i]
                if not goal_reached(state, goal.world, dwa):
                    obst = self.wmap.obstacle[self._last_sensed[i].in_range_obstacles]
                    action = plan(state, goal.world, obst, veh, dwa,
                                  bounds=self.wmap.bounds)
                    moved = integrate(state, action, veh)
                    if check_collision(moved, self.wmap, veh):
                        collided[i] = True
                        state = replace(state, speed=0.0)
                    else:
                        state = moved
                    self.states[i] = state
                elif check_collision(state, self.wmap, veh):
                    collided[i] = True
                    if state.speed != 0.0:
                        self.states[i] = state = replace(state, speed=0.0)
                snsd = sense(state, self.wmap, radar, agent=i, tick=self._micro_tick)
                self._last_sensed[i] = snsd
                self._trajectories[i].append((state.x, state.y))
                _, newly_global = self.masks.mark(i, snsd.visible_free)
                new_global[i] += newly_global
                sensed_macro[i, snsd.visible_free] = True

        cov = self.masks.coverage
        success_now = (not self._success_fired) and cov >= cfg.success_threshold
        if success_now:
            self._success_fired = True
        self.tick += 1
        self.done = self._success_fired or self.tick >= cfg.horizon

        counts = sensed_macro.sum(axis=0)
        overlap_counts = [
            int(np.count_nonzero(sensed_macro[i] & (counts >= 2))) for i in range(n)]
        breakdowns = compute_rewards(
            cfg.weights, cfg.success_bonus, cfg.collision_penalty,
            self.wmap.n_free, cov, new_global, overlap_counts, collided, success_now)

        goal_tuple = tuple(goal_objs)
        agents = [
            AgentOutcome(self._observation(i, goal_tuple), breakdowns[i].total(),
                         breakdowns[i], collided[i],
                         sensed_this_step=np.flatnonzero(sensed_macro[i]))
            for i in range(n)]
        return StepOutcome(tick=self.tick, cov=cov, done=self.done, agents=agents)

    # -- helpers -----------------------------------------------------------

    def decode(self, region_index: int, offset) -> tuple[float, float]:
        return decode_target(region_index, offset, self.wmap.bounds, self.config.region_grid)

    def encode(self, point) -> tuple[int, tuple[float, float]]:
        return encode_target(point, self.wmap.bounds, self.config.region_grid)

    def set_agent_state(self, agent: int, state: AgentState) -> None:
        """Inject a pose directly (scripted scenarios and tests)."""
        self.states[agent] = state
        self._last_sensed[agent] = sense(state, self.wmap, self.config.radar,
                                         agent=agent, tick=self._micro_tick)

    def _normalize_goals(self, goals) -> list[Goal]:
        cfg = self.config
        if len(goals) != cfg.n_agents:
            raise ValueError(f"need {cfg.n_agents} goals, got {len(goals)}")
        out = []
        for i, g in enumerate(goals):
            if isinstance(g, Goal):
                out.append(g)
                continue
            region, offset = g
            world = self.decode(int(region), offset)
            out.append(Goal(agent=i, region_index=int(region),
                            offset=(float(offset[0]), float(offset[1])), world=world))
        return out

    def _observation(self, agent: int, goals) -> Observation:
        grid = project_to_grid(self.wmap, self.masks, self.states,
                               self._trajectories, agent)
        return Observation(
            sensed=self._last_sensed[agent],
            grid=grid,
            state=self.states[agent],
            all_states=tuple(self.states),
            goals=goals,
        )


class VectorEnv:
    """A batch of independent environments stepped together.

    Semantically identical to stepping each env in order; whole environments
    are distributed over a thread pool (the kernels drop the GIL), results
    always return in env order, and a failure in one env is raised as
    BatchError after the others finish.
    """

    def __init__(self, configs, max_workers: int | None = None):
        if isinstance(configs, EnvConfig):
            configs = [configs]
        self.envs = [ExplorationEnv(c) for c in configs]
        self._pool = (ThreadPoolExecutor(max_workers=max_workers)
                      if (max_workers or 1) > 1 and len(self.envs) > 1 else None)

    def __len__(self) -> int:
        return len(self.envs)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()

    def _run(self, fn_args) -> list[StepOutcome]:
        results: list = [None] * len(fn_args)
        errors: list[tuple[int, BaseException]] = []
        if self._pool is None:
            for i, (fn, args) in enumerate(fn_args):
                try:
                    results[i] = fn(*args)
                except Exception as exc:  # noqa: BLE001 - tagged and re-raised
                    errors.append((i, exc))
        else:
            futures = [self._pool.submit(fn, *args) for fn, args in fn_args]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:  # noqa: BLE001
                    errors.append((i, exc))
        if errors:
            raise BatchError(errors[0][0], errors[0][1])
        return results

    def reset(self, seeds) -> list[StepOutcome]:
        if len(seeds) != len(self.envs):
            raise ValueError("one seed per environment required")
        return self._run([(env.reset, (seed,)) for env, seed in zip(self.envs, seeds)])

    def step(self, goals_batch) -> list[StepOutcome]:
        if len(goals_batch) != len(self.envs):
            raise ValueError("one goal list per environment required")
        return self._run([(env.step_macro, (goals,))
                          for env, goals in zip(self.envs, goals_batch)])
