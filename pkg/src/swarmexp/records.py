"""Episode record export: one text line per macro step, byte-reproducible.

Format (UTF-8, repr-formatted floats so values round-trip exactly):

    SWARMREC 1
    META agents=<n> map=<name> free=<count> seed=<seed>
    STEP tick=<t> cov=<float> mo=<float> done=<0|1> | a=0 x=<f> y=<f> h=<f> \
v=<f> d=<f> c=<0|1> rs=<f> re=<f> ro=<f> rc=<f> rt=<f> r=<f> | a=1 ...
    END

The mo field is the mutual-overlap fraction at that tick (0 while nothing is
explored); replaying a record reproduces the live episode metrics exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .env import StepOutcome


@dataclass
class RecordStep:
    tick: int
    cov: float
    mo: float
    done: bool
    # per agent: (x, y, heading, speed, steering, collided,
    #             success, exploration, overlap, collision, time, reward)
    agents: list[tuple]


@dataclass
class EpisodeRecord:
    n_agents: int
    map_name: str
    n_free: int
    seed: int
    steps: list[RecordStep] = field(default_factory=list)


class EpisodeRecorder:
    def __init__(self, n_agents: int, map_name: str, n_free: int, seed: int):
        self._lines = [
            "SWARMREC 1",
            f"META agents={n_agents} map={map_name} free={n_free} seed={seed}",
        ]
        self._done = False

    def add(self, outcome: StepOutcome, mo: float) -> None:
        parts = [f"STEP tick={outcome.tick} cov={outcome.cov!r} "
                 f"mo={mo!r} done={int(outcome.done)}"]
        for i, a in enumerate(outcome.agents):
            s = a.observation.state
            b = a.breakdown
            parts.append(
                f"a={i} x={s.x!r} y={s.y!r} h={s.heading!r} v={s.speed!r} "
                f"d={s.steering!r} c={int(a.collided)} rs={b.success!r} "
                f"re={b.exploration!r} ro={b.overlap!r} rc={b.collision!r} "
                f"rt={b.time!r} r={a.reward!r}")
        self._lines.append(" | ".join(parts))

    def to_text(self) -> str:
        return "\n".join(self._lines + ["END"]) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


def _fields(chunk: str) -> dict:
    out = {}
    for token in chunk.split():
        if "=" in token:
            key, val = token.split("=", 1)
            out[key] = val
    return out


def parse_record(text: str) -> EpisodeRecord:
    lines = text.splitlines()
    if not lines or lines[0] != "SWARMREC 1":
        raise ValueError("not an episode record (missing SWARMREC 1 header)")
    meta = _fields(lines[1].removeprefix("META "))
    rec = EpisodeRecord(
        n_agents=int(meta["agents"]), map_name=meta["map"],
        n_free=int(meta["free"]), seed=int(meta["seed"]))
    for line in lines[2:]:
        if not line.startswith("STEP "):
            continue
        chunks = line.split(" | ")
        head = _fields(chunks[0])
        agents = []
        for chunk in chunks[1:]:
            f = _fields(chunk)
            agents.append((
                float(f["x"]), float(f["y"]), float(f["h"]), float(f["v"]),
                float(f["d"]), bool(int(f["c"])), float(f["rs"]), float(f["re"]),
                float(f["ro"]), float(f["rc"]), float(f["rt"]), float(f["r"])))
        rec.steps.append(RecordStep(
            tick=int(head["tick"]), cov=float(head["cov"]),
            mo=float(head["mo"]), done=bool(int(head["done"])), agents=agents))
    return rec
