"""Client-side goal policies operating purely on wire observations.

The frontier policy mirrors the server's reference implementation decision
for decision (same BFS metric, waypointing, claim order, stall watchdog and
tie-breaks), so an episode driven over the wire reproduces the in-process
baseline exactly.  All of it runs on integers and the documented float
formulas, which makes that reproduction bitwise.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

BFS_UNREACHED = np.iinfo(np.int32).max


def rle_decode(runs, size, dtype=np.uint8) -> np.ndarray:
    out = np.empty(size, dtype=dtype)
    pos = 0
    for value, count in runs:
        out[pos:pos + count] = value
        pos += count
    if pos != size:
        raise ValueError("run-length data does not cover the grid")
    return out


def decode_grid(grid_msg: dict) -> np.ndarray:
    """Wire grid -> (4, height, width) uint8 channel planes."""
    w, h = grid_msg["width"], grid_msg["height"]
    planes = [rle_decode(runs, w * h).reshape(h, w) for runs in grid_msg["channels"]]
    return np.stack(planes)


def encode_target(point, bounds, l: int) -> tuple[int, tuple[float, float]]:
    """World coordinate -> (region index, in-region offset); server formula."""
    xmin, ymin, xmax, ymax = bounds
    cw = (xmax - xmin) / l
    ch = (ymax - ymin) / l
    col = min(l - 1, max(0, int((point[0] - xmin) / cw)))
    row = min(l - 1, max(0, int((point[1] - ymin) / ch)))
    u = min(1.0, max(0.0, (point[0] - xmin) / cw - col))
    v = min(1.0, max(0.0, (point[1] - ymin) / ch - row))
    return row * l + col, (u, v)


def frontier_cells(channels: np.ndarray) -> list[int]:
    explored = channels[0] != 0
    obstacles = channels[1] != 0
    unknown = ~explored & ~obstacles
    neighbour_unknown = np.zeros_like(unknown)
    neighbour_unknown[:-1, :] |= unknown[1:, :]
    neighbour_unknown[1:, :] |= unknown[:-1, :]
    neighbour_unknown[:, :-1] |= unknown[:, 1:]
    neighbour_unknown[:, 1:] |= unknown[:, :-1]
    return [int(i) for i in np.flatnonzero((explored & neighbour_unknown).ravel())]


def bfs_distances(passable: np.ndarray, row: int, col: int) -> np.ndarray:
    """4-connected BFS over passable cells; plain deque, same integers as
    the server's vectorized wavefront."""
    h, w = passable.shape
    dist = np.full((h, w), BFS_UNREACHED, dtype=np.int32)
    dist[row, col] = 0
    queue = deque([(row, col)])
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and passable[nr, nc] \
                    and dist[nr, nc] == BFS_UNREACHED:
                dist[nr, nc] = d
                queue.append((nr, nc))
    return dist


def path_waypoint(dist: np.ndarray, target_cell: int, width: int,
                  waypoint_cells: int) -> int:
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


class FrontierPolicy:
    """Mirror of the server's nearest-frontier baseline (see its docs)."""

    STALL_STEPS = 3
    STALL_MOVE_CELLS = 1.0
    BLACKLIST_RADIUS = 3

    def __init__(self, bounds, region_grid: int, waypoint_cells: int = 6,
                 min_goal_cells: int = 2):
        self.bounds = tuple(bounds)
        self.l = region_grid
        self.waypoint_cells = waypoint_cells
        self.min_goal_cells = min_goal_cells
        self._memory: dict[int, tuple[int | None, float, float, int]] = {}
        self._blacklist: dict[int, set[int]] = {}

    def _select(self, cells, dist, width, state_xy, xmin, ymin, cw, ch, excluded):
        reach_cell = reach_d = None
        far_cell = far_d2 = None
        for cell in cells:
            if cell in excluded:
                continue
            r, c = divmod(cell, width)
            d = int(dist[r, c])
            if d == BFS_UNREACHED:
                cx = xmin + (c + 0.5) * cw
                cy = ymin + (r + 0.5) * ch
                d2 = (cx - state_xy[0]) ** 2 + (cy - state_xy[1]) ** 2
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

    def _blacklist_region(self, agent: int, cell: int, width: int, height: int) -> None:
        r0, c0 = divmod(cell, width)
        banned = self._blacklist.setdefault(agent, set())
        rad = self.BLACKLIST_RADIUS
        for r in range(max(0, r0 - rad), min(height, r0 + rad + 1)):
            for c in range(max(0, c0 - rad), min(width, c0 + rad + 1)):
                banned.add(r * width + c)

    def __call__(self, outcome: dict) -> list[list]:
        goals = []
        claimed: set[int] = set()
        xmin, ymin, xmax, ymax = self.bounds
        for agent_i, agent in enumerate(outcome["agents"]):
            channels = decode_grid(agent["grid"])
            width, height = agent["grid"]["width"], agent["grid"]["height"]
            sx, sy = agent["state"][0], agent["state"][1]
            cw = (xmax - xmin) / width
            ch = (ymax - ymin) / height
            col = min(width - 1, max(0, int((sx - xmin) / cw)))
            row = min(height - 1, max(0, int((sy - ymin) / ch)))
            dist = bfs_distances(channels[0] != 0, row, col)
            cells = frontier_cells(channels)
            banned = self._blacklist.setdefault(agent_i, set())

            target, reach_d = self._select(cells, dist, width, (sx, sy),
                                           xmin, ymin, cw, ch, claimed | banned)
            if target is None and banned:
                banned.clear()
                target, reach_d = self._select(cells, dist, width, (sx, sy),
                                               xmin, ymin, cw, ch, claimed)

            prev = self._memory.get(agent_i)
            if target is not None and prev is not None and prev[0] == target:
                moved = math.hypot(sx - prev[1], sy - prev[2])
                stall_move = self.STALL_MOVE_CELLS * max(cw, ch)
                stall = prev[3] + 1 if moved < stall_move else 0
                if stall >= self.STALL_STEPS:
                    self._blacklist_region(agent_i, target, width, height)
                    target, reach_d = self._select(
                        cells, dist, width, (sx, sy), xmin, ymin, cw, ch,
                        claimed | banned)
                    stall = 0
            else:
                stall = 0

            self._memory[agent_i] = (target, sx, sy, stall)
            if target is None:
                region, (u, v) = encode_target((sx, sy), self.bounds, self.l)
                goals.append([region, u, v])
                continue
            claimed.add(target)
            if reach_d is not None:
                goal_cell = path_waypoint(dist, target, width, self.waypoint_cells)
            else:
                goal_cell = target
            grow, gcol = divmod(goal_cell, width)
            gx = xmin + (gcol + 0.5) * cw
            gy = ymin + (grow + 0.5) * ch
            region, (u, v) = encode_target((gx, gy), self.bounds, self.l)
            goals.append([region, u, v])
        return goals


class RandomPolicy:
    """Seeded uniform goals; mirrors the server's reference random policy."""

    def __init__(self, region_grid: int, seed: int):
        self.l = region_grid
        self.rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xA11)))

    def __call__(self, outcome: dict) -> list[list]:
        goals = []
        for _ in outcome["agents"]:
            region = int(self.rng.integers(self.l * self.l))
            u, v = self.rng.uniform(0.0, 1.0, 2)
            goals.append([region, float(u), float(v)])
        return goals


def make_policy(name: str, bounds, region_grid: int, seed: int):
    if name == "frontier":
        return FrontierPolicy(bounds, region_grid)
    if name == "random":
        return RandomPolicy(region_grid, seed)
    raise ValueError(f"unknown policy {name!r}")
