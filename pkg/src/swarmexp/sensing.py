"""Radar simulation: range-limited retrieval plus the obstacle occlusion mask.

A sense call finds all free points within detection range, removes those
masked by a nearer, angularly aligned obstacle point, and reports the
obstacle points in range.  The occlusion test for free point f and obstacle
o (vectors taken from the robot) removes f iff

    (f . o) / (|f| |o|) > 1 - alpha1      and      |f| - |o| > alpha2

i.e. the obstacle sits almost exactly in front of the free point and is
strictly nearer by the alpha2 margin.  ``paper_literal_inequality`` flips
the second comparison to the printed (physically inverted) form
|f| - |o| < alpha2 for literal reproduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import AgentState
from .mapcore import WorldMap


@dataclass(frozen=True)
class RadarConfig:
    detection_range: float = 20.0
    alpha1: float = 1e-3
    alpha2: float = 1e-6
    max_returns: int = 4096
    paper_literal_inequality: bool = False

    def __post_init__(self):
        if self.detection_range <= 0:
            raise ValueError("detection_range must be positive")
        if not 0.0 < self.alpha1 < 1.0:
            raise ValueError("alpha1 must be in (0, 1)")
        if self.alpha2 < 0.0:
            raise ValueError("alpha2 must be >= 0")
        if self.max_returns < 1:
            raise ValueError("max_returns must be >= 1")


@dataclass
class SensedPoints:
    """One radar return: visible free indices and in-range obstacle indices."""

    agent: int
    visible_free: np.ndarray
    in_range_obstacles: np.ndarray
    tick: int = 0


def occlusion_filter(robot, free_candidates: np.ndarray, obstacles: np.ndarray,
                     config: RadarConfig) -> np.ndarray:
    """Positions (ascending) of the candidates that survive the mask test.

    ``free_candidates`` and ``obstacles`` are (N, 2) coordinate arrays; the
    returned indices are positions into ``free_candidates``.
    """
    free = np.ascontiguousarray(free_candidates, dtype=np.float64).reshape(-1, 2)
    obst = np.ascontiguousarray(obstacles, dtype=np.float64).reshape(-1, 2)
    visible = kernels.occlusion_visible(
        np.ascontiguousarray(free[:, 0]), np.ascontiguousarray(free[:, 1]),
        np.ascontiguousarray(obst[:, 0]), np.ascontiguousarray(obst[:, 1]),
        float(robot[0]), float(robot[1]),
        config.alpha1, config.alpha2, config.paper_literal_inequality)
    return np.flatnonzero(visible).astype(np.int64)


def sense(robot: AgentState, wmap: WorldMap, config: RadarConfig,
          agent: int = 0, tick: int = 0) -> SensedPoints:
    """Full radar return for one agent pose."""
    pos = (robot.x, robot.y)
    free_grid = wmap.index_for("free", config.detection_range)
    candidates = free_grid.query(pos[0], pos[1], config.detection_range)
    if wmap.n_obstacle:
        obst_grid = wmap.index_for("obstacle", config.detection_range)
        obst_idx = obst_grid.query(pos[0], pos[1], config.detection_range)
    else:
        obst_idx = np.empty(0, dtype=np.int64)

    if candidates.size:
        keep = occlusion_filter(pos, wmap.free[candidates], wmap.obstacle[obst_idx], config)
        visible = candidates[keep]
    else:
        visible = candidates

    if visible.size > config.max_returns:
        d = wmap.free[visible] - np.array(pos)
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
        nearest = np.lexsort((visible, d2))[:config.max_returns]
        visible = np.sort(visible[nearest])

    return SensedPoints(agent=agent, visible_free=visible,
                        in_range_obstacles=obst_idx, tick=tick)
