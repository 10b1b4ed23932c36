"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's optimized code paths:
brute-force scans, an all-pairs occlusion loop, and a hand-rolled BFS flood
fill.  They are the ground truth the spatial index, occlusion kernel, and
generators are checked against.
"""

import collections
import math

import numpy as np
import pytest

from swarmexp.mapcore import WorldMap
from swarmexp.scenario import ScenarioSpec, gen_random_obstacle


def brute_range_scan(points: np.ndarray, center, radius: float) -> np.ndarray:
    """All indices with dx*dx+dy*dy <= r*r, by full scan."""
    out = []
    cx, cy = center
    r2 = radius * radius
    for i, (x, y) in enumerate(points):
        dx = x - cx
        dy = y - cy
        if dx * dx + dy * dy <= r2:
            out.append(i)
    return np.array(out, dtype=np.int64)


def naive_occlusion(robot, free_pts, obst_pts, alpha1, alpha2, literal=False):
    """All-pairs double loop over the printed mask criteria (vectorized rows)."""
    rx, ry = robot
    visible = []
    if len(obst_pts):
        ox = obst_pts[:, 0] - rx
        oy = obst_pts[:, 1] - ry
        no = np.sqrt(ox * ox + oy * oy)
        ok = no > 0.0
    for i, (x, y) in enumerate(free_pts):
        fx = x - rx
        fy = y - ry
        nf = math.sqrt(fx * fx + fy * fy)
        if nf == 0.0 or len(obst_pts) == 0:
            visible.append(i)
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            cosv = (fx * ox + fy * oy) / (nf * no)
        aligned = cosv > 1.0 - alpha1
        if literal:
            nearer = (nf - no) < alpha2
        else:
            nearer = (nf - no) > alpha2
        if not np.any(aligned & nearer & ok):
            visible.append(i)
    return np.array(visible, dtype=np.int64)


def flood_fill_reachable(wmap: WorldMap) -> int:
    """Free points reachable from free point 0 via 4-neighbour lattice steps."""
    res = wmap.resolution
    cells = {}
    for i, (x, y) in enumerate(wmap.free):
        cells.setdefault((round(x / res - 0.5), round(y / res - 0.5)), i)
    start = (round(wmap.free[0, 0] / res - 0.5), round(wmap.free[0, 1] / res - 0.5))
    seen = {start}
    queue = collections.deque([start])
    while queue:
        cx, cy = queue.popleft()
        for nxt in ((cx + 1, cy), (cx - 1, cy), (cx, cy + 1), (cx, cy - 1)):
            if nxt in cells and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen)


def random_world(rng, n_free=400, n_obst=60, size=40.0, resolution=0.05) -> WorldMap:
    """Scattered world for query/sensing tests (no lattice structure)."""
    free = rng.uniform(0.0, size, (n_free, 2))
    obst = rng.uniform(0.0, size, (n_obst, 2))
    # push obstacles off free points so the class-separation invariant holds
    for i in range(len(obst)):
        d = np.sqrt(((free - obst[i]) ** 2).sum(axis=1))
        while d.min() < resolution:
            obst[i] = rng.uniform(0.0, size, 2)
            d = np.sqrt(((free - obst[i]) ** 2).sum(axis=1))
    return WorldMap("random", resolution, (0, 0, size, size), free, obst)


@pytest.fixture(scope="session")
def small_obstacle_map() -> WorldMap:
    """One 50 m random-obstacle map shared by the slower env tests."""
    return gen_random_obstacle(ScenarioSpec(
        kind="random_obstacle", seed=11, size=50.0, resolution=1.0,
        obstacle_density=0.10))
