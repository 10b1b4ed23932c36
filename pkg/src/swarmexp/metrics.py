"""Episode metrics, reference policies, and the benchmark harness.

Metrics
    ER  final coverage fraction.
    CS  macro-step count at which coverage first reached 85% / 95%.
    MO  fraction of the explored union seen by two or more agents, recorded
        at the CS thresholds (lower is better; pass ``literal=True`` to
        mutual_overlap for the single-agent-fraction reading instead).
    RV  population standard deviation of the per-agent cumulative rewards.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .env import ExplorationEnv, Goal, StepOutcome, VectorEnv, encode_target
from .mapcore import ExplorationMask, GridProjection
from .records import EpisodeRecord, EpisodeRecorder, parse_record


@dataclass
class EpisodeMetrics:
    er: float
    cs85: int | None = None
    cs95: int | None = None
    mo85: float | None = None
    mo95: float | None = None
    rv: float = 0.0


def mutual_overlap(masks: ExplorationMask, literal: bool = False) -> float:
    """Overlap fraction of the explored union.

    Default: points explored by >= 2 agents over the union (0 = perfectly
    split work, 1 = everyone explored everything).  ``literal`` returns the
    exactly-one-agent fraction instead.
    """
    union = int(masks.union_mask.sum())
    if union == 0:
        raise ValueError("mutual_overlap undefined for an empty union")
    counts = masks.per_agent.sum(axis=0)
    if literal:
        return int((counts == 1).sum()) / union
    return int((counts >= 2).sum()) / union


def reward_variance(cumulative_rewards) -> float:
    """Population standard deviation of the per-agent cumulative rewards."""
    arr = np.asarray(cumulative_rewards, dtype=np.float64)
    if arr.size < 1:
        raise ValueError("need at least one agent")
    return float(np.std(arr))


class MetricsTracker:
    """Accumulates one episode's metrics from its macro-step stream."""

    def __init__(self, n_agents: int):
        self.n_agents = n_agents
        self.cumulative = [0.0] * n_agents
        self.last_tick = -1
        self.cov = 0.0
        self.cs85: int | None = None
        self.cs95: int | None = None
        self.mo85: float | None = None
        self.mo95: float | None = None

    def update(self, outcome: StepOutcome, masks: ExplorationMask) -> None:
        if outcome.tick <= self.last_tick:
            raise ValueError(
                f"out-of-order tick {outcome.tick} after {self.last_tick}")
        self.last_tick = outcome.tick
        self.cov = outcome.cov
        for i, a in enumerate(outcome.agents):
            self.cumulative[i] += a.reward
        if self.cs85 is None and outcome.cov >= 0.85:
            self.cs85 = outcome.tick
            self.mo85 = mutual_overlap(masks)
        if self.cs95 is None and outcome.cov >= 0.95:
            self.cs95 = outcome.tick
            self.mo95 = mutual_overlap(masks)

    def finalize(self) -> EpisodeMetrics:
        return EpisodeMetrics(
            er=self.cov, cs85=self.cs85, cs95=self.cs95,
            mo85=self.mo85, mo95=self.mo95,
            rv=reward_variance(self.cumulative))


def metrics_from_record(record: EpisodeRecord | str) -> EpisodeMetrics:
    """Recompute EpisodeMetrics from a parsed episode record (replay path)."""
    if isinstance(record, str):
        record = parse_record(record)
    cumulative = [0.0] * record.n_agents
    cov = 0.0
    cs85 = cs95 = None
    mo85 = mo95 = None
    last_tick = -1
    for step in record.steps:
        if step.tick <= last_tick:
            raise ValueError("out-of-order tick in record")
        last_tick = step.tick
        cov = step.cov
        for i, agent in enumerate(step.agents):
            cumulative[i] += agent[11]
        if cs85 is None and step.cov >= 0.85:
            cs85, mo85 = step.tick, step.mo
        if cs95 is None and step.cov >= 0.95:
            cs95, mo95 = step.tick, step.mo
    return EpisodeMetrics(er=cov, cs85=cs85, cs95=cs95, mo85=mo85, mo95=mo95,
                          rv=reward_variance(cumulative))


class FrontierPolicy:
    """Nearest-frontier goal selection on the observation grid.

    A frontier cell is an explored cell with at least one 4-neighbour that is
    neither explored nor an obstacle.  Frontier distance is measured by BFS
    through explored cells (the region the team knows to be traversable), so
    a frontier right behind a wall counts as far away; the goal emitted is
    the waypoint ``waypoint_cells`` along that known-free path, keeping the
    local planner on terrain it can actually cross.  Agents claim frontiers
    in index order; a claimed cell is excluded for higher-indexed agents.
    Frontiers nearer than ``min_goal_cells`` are skipped (targeting the cell
    you stand on idles the agent); with no reachable frontier an agent falls
    back to the straight-line nearest, and with none at all it targets its
    own position.

    The grid operates at its designed density of roughly one map point per
    cell (map extent ~ grid width x resolution); much sparser maps turn
    point-free cells into phantom frontiers.
    """

    STALL_STEPS = 3
    STALL_MOVE_CELLS = 1.0  # movement under one cell per decision counts as a stall
    BLACKLIST_RADIUS = 3

    def __init__(self, bounds, region_grid: int, waypoint_cells: int = 6,
                 min_goal_cells: int = 2):
        self.bounds = bounds
        self.l = region_grid
        self.waypoint_cells = waypoint_cells
        self.min_goal_cells = min_goal_cells
        self._memory: dict[int, tuple[int | None, float, float, int]] = {}
        self._blacklist: dict[int, set[int]] = {}

    def _select(self, cells, dist, grid, state, xmin, ymin, cw, ch, excluded):
        """(frontier cell, bfs distance or None) best pick outside excluded."""
        reach_cell = reach_d = None
        far_cell = far_d2 = None
        for cell in cells:  # ascending: fixed tie-break
            if cell in excluded:
                continue
            r, c = divmod(cell, grid.width)
            d = int(dist[r, c])
            if d == BFS_UNREACHED:
                cx = xmin + (c + 0.5) * cw
                cy = ymin + (r + 0.5) * ch
                d2 = (cx - state.x) ** 2 + (cy - state.y) ** 2
                if far_d2 is None or d2 < far_d2:
                    far_d2, far_cell = d2, cell
                continue
            if d < self.min_goal_cells:
                continue
            if reach_d is None or d < reach_d:
                reach_d, reach_cell = d, cell
        if reach_cell is not None:
            return reach_cell, reach_d
        return far_cell, None

    def _blacklist_region(self, agent: int, cell: int, grid) -> None:
        r0, c0 = divmod(cell, grid.width)
        banned = self._blacklist.setdefault(agent, set())
        rad = self.BLACKLIST_RADIUS
        for r in range(max(0, r0 - rad), min(grid.height, r0 + rad + 1)):
            for c in range(max(0, c0 - rad), min(grid.width, c0 + rad + 1)):
                banned.add(r * grid.width + c)

    def __call__(self, outcome: StepOutcome) -> list[tuple[int, tuple[float, float]]]:
        goals = []
        claimed: set[int] = set()
        for agent_i, agent in enumerate(outcome.agents):
            grid: GridProjection = agent.observation.grid
            state = agent.observation.state
            xmin, ymin = self.bounds[0], self.bounds[1]
            cw, ch = grid.cell_size
            col = min(grid.width - 1, max(0, int((state.x - xmin) / cw)))
            row = min(grid.height - 1, max(0, int((state.y - ymin) / ch)))
            explored = grid.channels[GridProjection.EXPLORED] != 0
            dist = grid_bfs_distances(explored, row, col)
            cells = frontier_cells(grid)
            banned = self._blacklist.setdefault(agent_i, set())

            target, reach_d = self._select(cells, dist, grid, state,
                                           xmin, ymin, cw, ch, claimed | banned)
            if target is None and banned:
                # everything left is blacklisted: forgive and retry
                banned.clear()
                target, reach_d = self._select(cells, dist, grid, state,
                                               xmin, ymin, cw, ch, claimed)

            # watchdog: camping on the same unreached frontier means the
            # local planner cannot get there; ban its neighbourhood and move on
            prev = self._memory.get(agent_i)
            if target is not None and prev is not None and prev[0] == target:
                moved = math.hypot(state.x - prev[1], state.y - prev[2])
                stall_move = self.STALL_MOVE_CELLS * max(cw, ch)
                stall = prev[3] + 1 if moved < stall_move else 0
                if stall >= self.STALL_STEPS:
                    self._blacklist_region(agent_i, target, grid)
                    target, reach_d = self._select(
                        cells, dist, grid, state, xmin, ymin, cw, ch,
                        claimed | banned)
                    stall = 0
            else:
                stall = 0

            self._memory[agent_i] = (target, state.x, state.y, stall)
            if target is None:
                goals.append(encode_target((state.x, state.y), self.bounds, self.l))
                continue
            claimed.add(target)
            if reach_d is not None:
                goal_cell = path_waypoint(dist, target, grid.width,
                                          self.waypoint_cells)
            else:
                # frontier exists but no route through explored space is
                # known yet: head straight at it and let sensing open one
                goal_cell = target
            grow, gcol = divmod(goal_cell, grid.width)
            gx = xmin + (gcol + 0.5) * cw
            gy = ymin + (grow + 0.5) * ch
            goals.append(encode_target((gx, gy), self.bounds, self.l))
        return goals


BFS_UNREACHED = np.iinfo(np.int32).max


def grid_bfs_distances(passable: np.ndarray, row: int, col: int) -> np.ndarray:
    """4-connected BFS distance field over passable cells (vector wavefront)."""
    dist = np.full(passable.shape, BFS_UNREACHED, dtype=np.int32)
    dist[row, col] = 0
    wave = np.zeros(passable.shape, dtype=bool)
    wave[row, col] = True
    d = 0
    while wave.any():
        d += 1
        grown = np.zeros_like(wave)
        grown[:-1, :] |= wave[1:, :]
        grown[1:, :] |= wave[:-1, :]
        grown[:, :-1] |= wave[:, 1:]
        grown[:, 1:] |= wave[:, :-1]
        grown &= passable & (dist == BFS_UNREACHED)
        dist[grown] = d
        wave = grown
    return dist


def path_waypoint(dist: np.ndarray, target_cell: int, width: int,
                  waypoint_cells: int) -> int:
    """Cell ``waypoint_cells`` BFS steps from the source along the path to target.

    Walks the distance field greedily downhill from the target; neighbour
    order (up, left, right, down) fixes ties deterministically.
    """
    h, w = dist.shape
    r, c = divmod(target_cell, width)
    d = int(dist[r, c])
    stop = min(waypoint_cells, d)
    while d > stop:
        for nr, nc in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
            if 0 <= nr < h and 0 <= nc < w and dist[nr, nc] == d - 1:
                r, c, d = nr, nc, d - 1
                break
        else:
            break
    return r * width + c


def frontier_cells(grid: GridProjection) -> list[int]:
    """Linear indices (row-major, ascending) of the grid's frontier cells."""
    explored = grid.channels[GridProjection.EXPLORED] != 0
    obstacles = grid.channels[GridProjection.OBSTACLES] != 0
    unknown = ~explored & ~obstacles
    neighbour_unknown = np.zeros_like(unknown)
    neighbour_unknown[:-1, :] |= unknown[1:, :]
    neighbour_unknown[1:, :] |= unknown[:-1, :]
    neighbour_unknown[:, :-1] |= unknown[:, 1:]
    neighbour_unknown[:, 1:] |= unknown[:, :-1]
    frontier = explored & neighbour_unknown
    return [int(i) for i in np.flatnonzero(frontier.ravel())]


class RandomPolicy:
    """Uniform random region + offset per agent, seeded."""

    def __init__(self, region_grid: int, seed: int):
        self.l = region_grid
        self.rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xA11)))

    def __call__(self, outcome: StepOutcome) -> list[tuple[int, tuple[float, float]]]:
        goals = []
        for _ in outcome.agents:
            region = int(self.rng.integers(self.l * self.l))
            u, v = self.rng.uniform(0.0, 1.0, 2)
            goals.append((region, (float(u), float(v))))
        return goals


def make_policy(name: str, env: ExplorationEnv, seed: int):
    if name == "frontier":
        return FrontierPolicy(env.wmap.bounds, env.config.region_grid)
    if name == "random":
        return RandomPolicy(env.config.region_grid, seed)
    raise ValueError(f"unknown policy {name!r} (expected frontier|random)")


def run_episode(env: ExplorationEnv, policy, seed: int,
                max_steps: int | None = None) -> tuple[EpisodeMetrics, str]:
    """Drive one full episode; returns (metrics, record text)."""
    outcome = env.reset(seed)
    tracker = MetricsTracker(env.config.n_agents)
    recorder = EpisodeRecorder(env.config.n_agents, env.wmap.name,
                               env.wmap.n_free, seed)
    steps = 0
    while not outcome.done:
        goals = policy(outcome)
        outcome = env.step_macro(goals)
        mo = mutual_overlap(env.masks) if env.masks.explored_count else 0.0
        tracker.update(outcome, env.masks)
        recorder.add(outcome, mo)
        steps += 1
        if max_steps is not None and steps >= max_steps:
            break
    return tracker.finalize(), recorder.to_text()


@dataclass
class BenchReport:
    policy: str
    episodes: int
    n_agents: int
    n_envs: int
    map_name: str
    means: dict = field(default_factory=dict)
    stds: dict = field(default_factory=dict)
    recorded: dict = field(default_factory=dict)  # metric -> episode count
    step_seconds: dict = field(default_factory=dict)  # agents -> s/step
    incomplete: bool = False

    def to_text(self) -> str:
        lines = [
            "SWARMBENCH 1",
            f"policy {self.policy}",
            f"episodes {self.episodes}",
            f"agents {self.n_agents}",
            f"envs {self.n_envs}",
            f"map {self.map_name}",
        ]
        for key in ("er", "cs85", "cs95", "mo85", "mo95", "rv"):
            mean = self.means.get(key)
            std = self.stds.get(key)
            n = self.recorded.get(key, 0)
            if mean is None:
                lines.append(f"{key} - - n={n}")
            else:
                lines.append(f"{key} {mean:.6f} {std:.6f} n={n}")
        for agents in sorted(self.step_seconds):
            lines.append(f"step_seconds N={agents} {self.step_seconds[agents]:.6f}")
        if self.incomplete:
            lines.append("incomplete 1")
        return "\n".join(lines) + "\n"


def aggregate_metrics(all_metrics: list[EpisodeMetrics]) -> tuple[dict, dict, dict]:
    means, stds, counts = {}, {}, {}
    for key in ("er", "cs85", "cs95", "mo85", "mo95", "rv"):
        values = [getattr(m, key) for m in all_metrics if getattr(m, key) is not None]
        counts[key] = len(values)
        if values:
            arr = np.asarray(values, dtype=np.float64)
            means[key] = float(arr.mean())
            stds[key] = float(arr.std())
    return means, stds, counts


def run_benchmark(config, episodes: int, policy_name: str = "frontier",
                  base_seed: int = 0, max_steps: int | None = None,
                  measure_timing: bool = False,
                  timing_agents=(2, 4, 6, 8)) -> BenchReport:
    """Run seeded episodes on one config and aggregate their metrics."""
    from dataclasses import replace as dc_replace

    collected = []
    incomplete = False
    env = ExplorationEnv(config)
    for ep in range(episodes):
        seed = base_seed + ep
        policy = make_policy(policy_name, env, seed)
        try:
            m, _ = run_episode(env, policy, seed, max_steps=max_steps)
        except Exception:  # noqa: BLE001 - partial report flagged instead
            incomplete = True
            break
        collected.append(m)
    means, stds, counts = aggregate_metrics(collected)
    report = BenchReport(
        policy=policy_name, episodes=len(collected), n_agents=config.n_agents,
        n_envs=1, map_name=env.wmap.name, means=means, stds=stds,
        recorded=counts, incomplete=incomplete)
    if measure_timing:
        for n in timing_agents:
            cfg_n = dc_replace(config, n_agents=n)
            report.step_seconds[n] = measure_step_time(cfg_n, seed=base_seed)
    return report


def measure_step_time(config, seed: int = 0, steps: int = 20,
                      warmup: int = 3, policy_name: str = "random") -> float:
    """Mean wall-clock seconds per macro step for one environment."""
    env = ExplorationEnv(config)
    policy = make_policy(policy_name, env, seed)
    outcome = env.reset(seed)
    for _ in range(warmup):
        if outcome.done:
            outcome = env.reset(seed)
        outcome = env.step_macro(policy(outcome))
    t0 = time.perf_counter()
    measured = 0
    for _ in range(steps):
        if outcome.done:
            outcome = env.reset(seed)
        outcome = env.step_macro(policy(outcome))
        measured += 1
    return (time.perf_counter() - t0) / measured


def measure_vector_throughput(config, n_envs: int, steps: int = 10,
                              max_workers: int | None = None,
                              seed: int = 0) -> float:
    """Aggregate macro steps per second for a batch of environments."""
    batch = VectorEnv([config] * n_envs, max_workers=max_workers)
    outcomes = batch.reset(list(range(seed, seed + n_envs)))
    policies = [make_policy("random", batch.envs[i], seed + i) for i in range(n_envs)]
    t0 = time.perf_counter()
    done_count = 0
    for _ in range(steps):
        goals = [policies[i](outcomes[i]) for i in range(n_envs)]
        outcomes = batch.step(goals)
        for i, out in enumerate(outcomes):
            if out.done:
                outcomes[i] = batch.envs[i].reset(seed + i)
                done_count += 1
    elapsed = time.perf_counter() - t0
    batch.close()
    return (steps * n_envs) / elapsed
