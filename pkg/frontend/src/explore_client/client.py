"""Session handling and episode collection against an exploration server."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .policies import make_policy
from .wire import Connection, WireError

SUPPORTED_VERSION = 1


@dataclass
class MapSnapshot:
    name: str
    resolution: float
    bounds: tuple[float, float, float, float]
    free: np.ndarray
    obstacle: np.ndarray


@dataclass
class SessionHandle:
    conn: Connection
    version: int
    n_agents: int
    region_grid: int
    horizon: int
    micro_steps: int
    success_threshold: float
    map: MapSnapshot
    n_envs: int = 1
    last_outcome: dict | None = None

    def close(self) -> None:
        try:
            self.conn.call("close")
        except WireError:
            pass
        self.conn.close()


@dataclass
class EpisodeRecord:
    """Everything the client saw during one episode (for plots and metrics)."""

    seed: int
    map: MapSnapshot
    cov_curve: list[float] = field(default_factory=list)
    ticks: list[int] = field(default_factory=list)
    trajectories: list[list[tuple[float, float]]] = field(default_factory=list)
    per_agent_masks: list[set[int]] = field(default_factory=list)
    cumulative_rewards: list[float] = field(default_factory=list)
    collisions: int = 0


@dataclass
class EpisodeMetrics:
    er: float
    cs85: int | None = None
    cs95: int | None = None
    mo85: float | None = None
    mo95: float | None = None
    rv: float = 0.0

    def as_dict(self) -> dict:
        return {"er": self.er, "cs85": self.cs85, "cs95": self.cs95,
                "mo85": self.mo85, "mo95": self.mo95, "rv": self.rv}


def connect_and_configure(address: str, overrides: dict | None = None,
                          envs: int = 1, timeout: float = 60.0) -> SessionHandle:
    """Handshake, configure, and cache the announced map snapshot."""
    host, _, port = address.rpartition(":")
    conn = Connection(host or "127.0.0.1", int(port), timeout=timeout)
    hello = conn.call("hello")
    if hello["version"] != SUPPORTED_VERSION:
        conn.close()
        raise WireError(f"server speaks protocol {hello['version']}, "
                        f"client supports {SUPPORTED_VERSION}")
    conf = conn.call("configure", {"config": overrides or {}, "envs": envs})
    m = conf["map"]
    snapshot = MapSnapshot(
        name=m["name"], resolution=m["resolution"], bounds=tuple(m["bounds"]),
        free=np.asarray(m["free"], dtype=np.float64).reshape(-1, 2),
        obstacle=np.asarray(m["obstacle"], dtype=np.float64).reshape(-1, 2))
    return SessionHandle(
        conn=conn, version=hello["version"], n_agents=conf["n_agents"],
        region_grid=conf["region_grid"], horizon=conf["horizon"],
        micro_steps=conf["micro_steps"],
        success_threshold=conf["success_threshold"], map=snapshot,
        n_envs=conf["envs"])


def _overlap_fraction(masks: list[set[int]]) -> float:
    union: set[int] = set()
    for m in masks:
        union |= m
    if not union:
        return 0.0
    shared = sum(1 for p in union if sum(p in m for m in masks) >= 2)
    return shared / len(union)


def run_episode(handle: SessionHandle, policy, seed: int,
                max_steps: int | None = None) -> tuple[EpisodeRecord, EpisodeMetrics]:
    """Drive reset/step until done; client-side metrics must equal the
    server's metrics verb (checked here, raises on mismatch)."""
    if isinstance(policy, str):
        policy = make_policy(policy, handle.map.bounds, handle.region_grid, seed)
    reset = handle.conn.call("reset", {"seeds": [seed]})
    outcome = reset["outcomes"][0]
    handle.last_outcome = outcome

    record = EpisodeRecord(seed=seed, map=handle.map)
    record.trajectories = [[(a["state"][0], a["state"][1])]
                           for a in outcome["agents"]]
    # exploration masks start empty: the reset sense is observation only
    record.per_agent_masks = [set() for _ in outcome["agents"]]
    record.cumulative_rewards = [0.0] * handle.n_agents
    record.cov_curve = [outcome["cov"]]
    record.ticks = [outcome["tick"]]

    cs85 = cs95 = None
    mo85 = mo95 = None
    steps = 0
    while not outcome["done"]:
        goals = policy(outcome)
        step = handle.conn.call("step", {"goals": [goals]})
        outcome = step["outcomes"][0]
        handle.last_outcome = outcome
        for i, a in enumerate(outcome["agents"]):
            record.trajectories[i].append((a["state"][0], a["state"][1]))
            record.per_agent_masks[i].update(a["sensed"])
            record.cumulative_rewards[i] += a["reward"]
            record.collisions += int(a["collided"])
        record.cov_curve.append(outcome["cov"])
        record.ticks.append(outcome["tick"])
        if cs85 is None and outcome["cov"] >= 0.85:
            cs85 = outcome["tick"]
            mo85 = _overlap_fraction(record.per_agent_masks)
        if cs95 is None and outcome["cov"] >= 0.95:
            cs95 = outcome["tick"]
            mo95 = _overlap_fraction(record.per_agent_masks)
        steps += 1
        if max_steps is not None and steps >= max_steps:
            break

    arr = np.asarray(record.cumulative_rewards, dtype=np.float64)
    metrics = EpisodeMetrics(er=outcome["cov"], cs85=cs85, cs95=cs95,
                             mo85=mo85, mo95=mo95, rv=float(np.std(arr)))

    server_metrics = handle.conn.call("metrics")["metrics"][0]
    if server_metrics != metrics.as_dict():
        raise WireError(
            f"client metrics {metrics.as_dict()} disagree with server "
            f"metrics {server_metrics}")
    return record, metrics
