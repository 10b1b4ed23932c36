"""Episode plots: coverage curve and the top-down trajectory map."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_AGENT_COLORS = ["tab:red", "tab:blue", "tab:orange", "tab:purple",
                 "tab:brown", "tab:pink", "tab:olive", "tab:cyan"]

# strip the Software tag so identical inputs give identical PNG bytes
_PNG_META = {"metadata": {"Software": None}}


def plot_coverage(record, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(record.ticks, record.cov_curve, color="tab:green", lw=2)
    ax.axhline(0.85, color="gray", ls="--", lw=0.8)
    ax.axhline(0.95, color="gray", ls=":", lw=0.8)
    ax.set_xlabel("macro step")
    ax.set_ylabel("coverage ratio")
    ax.set_ylim(0.0, 1.02)
    ax.set_title(f"{record.map.name} seed {record.seed}")
    fig.tight_layout()
    fig.savefig(path, dpi=110, **_PNG_META)
    plt.close(fig)


def plot_trajectories(record, path) -> None:
    """Top-down view: explored/unexplored free points, obstacles, overlap
    shading, and one trajectory trace per agent."""
    fig, ax = plt.subplots(figsize=(7, 7))
    free = record.map.free
    union: set[int] = set()
    counts: dict[int, int] = {}
    for mask in record.per_agent_masks:
        union |= mask
        for p in mask:
            counts[p] = counts.get(p, 0) + 1
    unexplored = np.array([i for i in range(len(free)) if i not in union], dtype=int)
    explored_once = np.array([p for p, c in counts.items() if c == 1], dtype=int)
    overlap = np.array([p for p, c in counts.items() if c >= 2], dtype=int)

    if unexplored.size:
        ax.scatter(free[unexplored, 0], free[unexplored, 1], s=2,
                   c="#f2e28a", label="unexplored")
    if explored_once.size:
        ax.scatter(free[explored_once, 0], free[explored_once, 1], s=2,
                   c="#9fdf9f", label="explored")
    if overlap.size:
        ax.scatter(free[overlap, 0], free[overlap, 1], s=2,
                   c="#7fb3ff", label="overlap")
    if len(record.map.obstacle):
        ax.scatter(record.map.obstacle[:, 0], record.map.obstacle[:, 1], s=3,
                   c="#444444", label="obstacle")
    for i, traj in enumerate(record.trajectories):
        arr = np.asarray(traj)
        color = _AGENT_COLORS[i % len(_AGENT_COLORS)]
        ax.plot(arr[:, 0], arr[:, 1], color=color, lw=1.4, label=f"agent {i}")
        ax.plot(arr[0, 0], arr[0, 1], marker="o", color=color, ms=6)
        ax.plot(arr[-1, 0], arr[-1, 1], marker="x", color=color, ms=8)

    xmin, ymin, xmax, ymax = record.map.bounds
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=7, markerscale=2)
    ax.set_title(f"{record.map.name} seed {record.seed}")
    fig.tight_layout()
    fig.savefig(path, dpi=110, **_PNG_META)
    plt.close(fig)


def plot_episode(record, out_dir) -> list[Path]:
    """Write the coverage curve and trajectory map; returns the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve = out / f"coverage_seed{record.seed}.png"
    trajmap = out / f"trajectories_seed{record.seed}.png"
    plot_coverage(record, curve)
    plot_trajectories(record, trajmap)
    return [curve, trajmap]
