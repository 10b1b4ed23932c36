"""Point-cloud world maps, exploration masks, spatial indexing, grid features.

A :class:`WorldMap` is an immutable pair of 2D point sets (free space and
obstacles) with a resolution and axis-aligned bounds.  Point indices are the
array positions fixed at load time; every mask and query in the simulator
refers to these indices, so order is never changed after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels

# memory guard: refuse maps beyond this many points per class
DEFAULT_MAX_POINTS = 4_000_000

# spatial-index cell sizing: cell = max(resolution, range / CELLS_PER_RANGE)
CELLS_PER_RANGE = 16.0
DEFAULT_INDEX_RANGE = 20.0

MAP_MAGIC = "MAEXP"
MAP_VERSION = 1

Bounds = tuple[float, float, float, float]


class MapError(ValueError):
    """Base for map loading/validation failures."""


class MapFormatError(MapError):
    """Malformed map file (bad header or point line)."""


class MapInvariantError(MapError):
    """A WorldMap invariant does not hold; carries the offending index."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class SpatialGrid:
    """Uniform hash grid over a fixed point set (CSR cell layout).

    Built once, queried many times.  Queries run through the active kernel
    backend and return exactly the points with squared distance <= r*r.
    """

    def __init__(self, points: np.ndarray, cell_size: float, bounds: Bounds):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self.x0, self.y0 = float(bounds[0]), float(bounds[1])
        ext_x = max(bounds[2] - self.x0, cell_size)
        ext_y = max(bounds[3] - self.y0, cell_size)
        self.nx = max(1, int(math.ceil(ext_x / cell_size)))
        self.ny = max(1, int(math.ceil(ext_y / cell_size)))
        # owned writable copies: the kernels take non-const memoryviews
        self.xs = np.array(points[:, 0], dtype=np.float64)
        self.ys = np.array(points[:, 1], dtype=np.float64)
        ix = np.clip(((self.xs - self.x0) / cell_size).astype(np.int64), 0, self.nx - 1)
        iy = np.clip(((self.ys - self.y0) / cell_size).astype(np.int64), 0, self.ny - 1)
        cell = iy * self.nx + ix
        self.order = np.argsort(cell, kind="stable").astype(np.int64)
        counts = np.bincount(cell, minlength=self.nx * self.ny)
        self.cell_start = np.zeros(self.nx * self.ny + 1, dtype=np.int64)
        np.cumsum(counts, out=self.cell_start[1:])

    def query(self, x: float, y: float, radius: float) -> np.ndarray:
        """Indices of points within ``radius``, ascending."""
        return kernels.query_radius(
            self.xs, self.ys, self.cell_start, self.order,
            self.x0, self.y0, self.cell_size, self.nx, self.ny,
            float(x), float(y), float(radius))

    def any_within(self, x: float, y: float, radius: float) -> bool:
        return kernels.any_within(
            self.xs, self.ys, self.cell_start, self.order,
            self.x0, self.y0, self.cell_size, self.nx, self.ny,
            float(x), float(y), float(radius))


class WorldMap:
    """Immutable point-cloud scene: free points, obstacle points, bounds."""

    def __init__(self, name: str, resolution: float, bounds: Bounds,
                 free: np.ndarray, obstacle: np.ndarray,
                 max_points: int = DEFAULT_MAX_POINTS):
        self.name = name
        self.resolution = float(resolution)
        self.bounds = (float(bounds[0]), float(bounds[1]),
                       float(bounds[2]), float(bounds[3]))
        self.free = np.ascontiguousarray(free, dtype=np.float64).reshape(-1, 2)
        self.obstacle = np.ascontiguousarray(obstacle, dtype=np.float64).reshape(-1, 2)
        self.free.setflags(write=False)
        self.obstacle.setflags(write=False)
        self._indexes: dict[str, SpatialGrid] = {}
        self._validate(max_points)

    def _validate(self, max_points: int) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise MapInvariantError("degenerate bounds")
        if self.resolution <= 0:
            raise MapInvariantError("resolution must be positive")
        if len(self.free) == 0:
            raise MapInvariantError("no free space")
        for label, pts in (("free", self.free), ("obstacle", self.obstacle)):
            if len(pts) > max_points:
                raise MapInvariantError(f"{label} point count {len(pts)} exceeds limit {max_points}")
            if len(pts) == 0:
                continue
            inside = ((pts[:, 0] >= xmin) & (pts[:, 0] <= xmax)
                      & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax))
            if not inside.all():
                bad = int(np.flatnonzero(~inside)[0])
                raise MapInvariantError(f"{label} point {bad} outside bounds", index=bad)
        if len(self.obstacle):
            # classes must be separated by ~resolution (lattice-adjacent cells
            # sit exactly one resolution apart, hence the small tolerance)
            tree = cKDTree(self.free)
            dist, _ = tree.query(self.obstacle, k=1)
            limit = self.resolution * (1.0 - 1e-9)
            bad = np.flatnonzero(dist < limit)
            if bad.size:
                i = int(bad[0])
                raise MapInvariantError(
                    f"obstacle point {i} within resolution/2 of free space", index=i)

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def n_obstacle(self) -> int:
        return len(self.obstacle)

    def index_for(self, point_set: str, query_range: float = DEFAULT_INDEX_RANGE) -> SpatialGrid:
        """Spatial index for 'free' or 'obstacle', sized for ``query_range``."""
        cell = max(self.resolution, query_range / CELLS_PER_RANGE)
        key = f"{point_set}:{cell:.6g}"
        grid = self._indexes.get(key)
        if grid is None:
            pts = self.free if point_set == "free" else self.obstacle
            grid = SpatialGrid(pts, cell, self.bounds)
            self._indexes[key] = grid
        return grid

    def range_query(self, center, radius: float, point_set: str = "free") -> np.ndarray:
        """Indices of points with distance <= radius from center, ascending."""
        if point_set not in ("free", "obstacle"):
            raise ValueError("point_set must be 'free' or 'obstacle'")
        if radius <= 0:
            raise ValueError("radius must be > 0")
        return self.index_for(point_set, radius).query(center[0], center[1], radius)

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax


def range_query(wmap: WorldMap, center, radius: float, point_set: str = "free") -> np.ndarray:
    return wmap.range_query(center, radius, point_set)


class ExplorationMask:
    """Per-agent and union explored bitsets over free-point indices.

    Monotone within an episode: bits are set, never cleared.  The union is
    maintained incrementally and always equals the OR of the agent masks.
    """

    def __init__(self, n_agents: int, n_free: int):
        if n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        self.n_agents = n_agents
        self.n_free = n_free
        self.per_agent = np.zeros((n_agents, n_free), dtype=bool)
        self.union_mask = np.zeros(n_free, dtype=bool)
        self.explored_count = 0

    def mark(self, agent: int, indices: np.ndarray) -> tuple[int, int]:
        """Set indices for one agent; returns (new for agent, new globally)."""
        if not 0 <= agent < self.n_agents:
            raise IndexError(f"agent {agent} out of range")
        idx = np.unique(np.asarray(indices, dtype=np.int64))
        if idx.size == 0:
            return 0, 0
        row = self.per_agent[agent]
        new_agent = idx[~row[idx]]
        new_global = idx[~self.union_mask[idx]]
        row[idx] = True
        self.union_mask[idx] = True
        self.explored_count += int(new_global.size)
        return int(new_agent.size), int(new_global.size)

    @property
    def coverage(self) -> float:
        return self.explored_count / self.n_free


def mark_explored(mask: ExplorationMask, agent: int, points) -> tuple[int, int]:
    return mask.mark(agent, points)


@dataclass
class GridProjection:
    """Four W x H feature planes: explored, obstacles, position, trajectory."""

    channels: np.ndarray  # (4, height, width) uint8
    width: int
    height: int
    cell_size: tuple[float, float]
    origin: tuple[float, float] = (0.0, 0.0)

    EXPLORED = 0
    OBSTACLES = 1
    POSITION = 2
    TRAJECTORY = 3


def grid_cells(points: np.ndarray, bounds: Bounds, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Map points to (col, row) cells; edge points clamp into the last cell."""
    xmin, ymin, xmax, ymax = bounds
    cw = (xmax - xmin) / width
    ch = (ymax - ymin) / height
    col = np.clip(((points[:, 0] - xmin) / cw).astype(np.int64), 0, width - 1)
    row = np.clip(((points[:, 1] - ymin) / ch).astype(np.int64), 0, height - 1)
    return col, row


def project_to_grid(wmap: WorldMap, mask: ExplorationMask, states, trajectories,
                    agent: int, width: int = 125, height: int = 125) -> GridProjection:
    """Build the 4-channel feature grid for one agent.

    Channel 0: cells holding at least one explored free point.  Channel 1:
    cells holding an obstacle point.  Channel 2: the agent's position cell.
    Channel 3: every cell its trajectory has visited (monotone per episode).
    """
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be >= 1")
    if not 0 <= agent < mask.n_agents:
        raise IndexError(f"agent {agent} out of range")
    xmin, ymin, xmax, ymax = wmap.bounds
    cw = (xmax - xmin) / width
    ch = (ymax - ymin) / height
    planes = np.zeros((4, height, width), dtype=np.uint8)

    explored = np.flatnonzero(mask.union_mask)
    if explored.size:
        col, row = grid_cells(wmap.free[explored], wmap.bounds, width, height)
        planes[GridProjection.EXPLORED, row, col] = 1
    if wmap.n_obstacle:
        col, row = grid_cells(wmap.obstacle, wmap.bounds, width, height)
        planes[GridProjection.OBSTACLES, row, col] = 1

    state = states[agent]
    px = min(max(int((state.x - xmin) / cw), 0), width - 1)
    py = min(max(int((state.y - ymin) / ch), 0), height - 1)
    planes[GridProjection.POSITION, py, px] = 1

    traj = np.asarray(trajectories[agent], dtype=np.float64).reshape(-1, 2)
    if len(traj):
        col, row = grid_cells(traj, wmap.bounds, width, height)
        planes[GridProjection.TRAJECTORY, row, col] = 1

    return GridProjection(planes, width, height, (cw, ch), (xmin, ymin))


def _format_float(v: float) -> str:
    return repr(float(v))


def save_map(wmap: WorldMap, path) -> None:
    """Write the text map format; load_map(save_map(m)) == m bit-for-bit."""
    lines = [
        f"{MAP_MAGIC} {MAP_VERSION}",
        f"NAME {wmap.name}",
        f"RESOLUTION {_format_float(wmap.resolution)}",
        "BOUNDS " + " ".join(_format_float(b) for b in wmap.bounds),
        f"FREE {wmap.n_free}",
    ]
    lines.extend(f"{_format_float(x)} {_format_float(y)}" for x, y in wmap.free)
    lines.append(f"OBSTACLE {wmap.n_obstacle}")
    lines.extend(f"{_format_float(x)} {_format_float(y)}" for x, y in wmap.obstacle)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_points(lines: list[str], start: int, count: int, label: str) -> tuple[np.ndarray, int]:
    pts = np.empty((count, 2), dtype=np.float64)
    for i in range(count):
        ln = start + i
        if ln >= len(lines):
            raise MapFormatError(f"unexpected end of file in {label} section")
        parts = lines[ln].split()
        if len(parts) != 2:
            raise MapFormatError(f"line {ln + 1}: expected 'x y', got {lines[ln]!r}")
        try:
            pts[i, 0] = float(parts[0])
            pts[i, 1] = float(parts[1])
        except ValueError as exc:
            raise MapFormatError(f"line {ln + 1}: {exc}") from exc
    return pts, start + count


def load_map(path, max_points: int = DEFAULT_MAX_POINTS) -> WorldMap:
    """Parse a .mxm map file; raises MapFormatError / MapInvariantError."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith(f"{MAP_MAGIC} "):
        raise MapFormatError(f"missing '{MAP_MAGIC} <version>' header")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise MapFormatError("bad version header") from exc
    if version != MAP_VERSION:
        raise MapFormatError(f"unsupported map version {version}")

    def expect(ln: int, key: str) -> str:
        if ln >= len(lines):
            raise MapFormatError(f"missing {key} line")
        parts = lines[ln].split(maxsplit=1)
        if parts[0] != key:
            raise MapFormatError(f"line {ln + 1}: expected {key}, got {parts[0]!r}")
        return parts[1] if len(parts) > 1 else ""

    name = expect(1, "NAME")
    try:
        resolution = float(expect(2, "RESOLUTION"))
        bounds = tuple(float(v) for v in expect(3, "BOUNDS").split())
    except ValueError as exc:
        raise MapFormatError(str(exc)) from exc
    if len(bounds) != 4:
        raise MapFormatError("BOUNDS requires 4 values")
    try:
        n_free = int(expect(4, "FREE"))
    except ValueError as exc:
        raise MapFormatError("bad FREE count") from exc
    if n_free == 0:
        raise MapInvariantError("no free space")
    free, nxt = _parse_points(lines, 5, n_free, "FREE")
    try:
        n_obs = int(expect(nxt, "OBSTACLE"))
    except ValueError as exc:
        raise MapFormatError("bad OBSTACLE count") from exc
    obstacle, _ = _parse_points(lines, nxt + 1, n_obs, "OBSTACLE")
    return WorldMap(name, resolution, bounds, free, obstacle, max_points=max_points)
