"""Wire protocol: length-prefixed JSON frames over any byte stream.

Frame layout: 4-byte big-endian payload length, then that many bytes of
UTF-8 JSON.  Encoding is canonical (sorted keys, no whitespace) so identical
messages are identical bytes.  Frames above 64 MiB are rejected.  The full
message schema lives in PROTOCOL.md at the repository root.
"""

from __future__ import annotations

import json
import struct

import numpy as np

PROTOCOL_VERSION = 1
MAX_FRAME = 64 * 1024 * 1024
_HEADER = struct.Struct(">I")


class ProtocolError(Exception):
    """Fatal framing violation; the connection must be torn down."""


def encode_frame(message: dict) -> bytes:
    body = json.dumps(message, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME:
        raise ProtocolError(f"frame of {len(body)} bytes exceeds {MAX_FRAME}")
    return _HEADER.pack(len(body)) + body


class FrameDecoder:
    """Incremental frame parser: feed bytes, collect decoded messages.

    A frame whose body is not valid JSON decodes to None (the session
    answers with an error and carries on); an oversize length prefix raises
    ProtocolError, which is unrecoverable because the stream loses framing.
    Incomplete trailing bytes simply wait for more input.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[dict | None]:
        self._buf.extend(data)
        out: list[dict | None] = []
        while True:
            if len(self._buf) < _HEADER.size:
                return out
            (length,) = _HEADER.unpack(bytes(self._buf[:_HEADER.size]))
            if length > MAX_FRAME:
                raise ProtocolError(f"declared frame length {length} exceeds {MAX_FRAME}")
            if len(self._buf) < _HEADER.size + length:
                return out
            body = bytes(self._buf[_HEADER.size:_HEADER.size + length])
            del self._buf[:_HEADER.size + length]
            try:
                out.append(json.loads(body.decode("utf-8")))
            except (UnicodeDecodeError, json.JSONDecodeError):
                out.append(None)


def rle_encode(values: np.ndarray) -> list[list[int]]:
    """Run-length encode a flat integer array as [[value, count], ...]."""
    arr = np.asarray(values).ravel()
    if arr.size == 0:
        return []
    changes = np.flatnonzero(arr[1:] != arr[:-1]) + 1
    starts = np.concatenate(([0], changes))
    ends = np.concatenate((changes, [arr.size]))
    return [[int(arr[s]), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(runs: list[list[int]], size: int, dtype=np.uint8) -> np.ndarray:
    out = np.empty(size, dtype=dtype)
    pos = 0
    for value, count in runs:
        if count < 0 or pos + count > size:
            raise ProtocolError("run-length data overflows the declared size")
        out[pos:pos + count] = value
        pos += count
    if pos != size:
        raise ProtocolError(f"run-length data covers {pos} of {size} cells")
    return out


def encode_state(state) -> list[float]:
    return [state.x, state.y, state.heading, state.speed, state.steering]


def encode_outcome(outcome, include_grids: bool = True) -> dict:
    """StepOutcome -> wire dict (see PROTOCOL.md, `outcome` object)."""
    agents = []
    for a in outcome.agents:
        obs = a.observation
        entry = {
            "state": encode_state(obs.state),
            "visible_free": [int(i) for i in obs.sensed.visible_free],
            "obstacles_in_range": [int(i) for i in obs.sensed.in_range_obstacles],
            "sensed": [int(i) for i in a.sensed_this_step],
            "reward": a.reward,
            "breakdown": list(a.breakdown.as_tuple()),
            "collided": bool(a.collided),
            "goal": None if obs.goals is None else [
                obs.goals[obs.sensed.agent].region_index,
                obs.goals[obs.sensed.agent].offset[0],
                obs.goals[obs.sensed.agent].offset[1]],
        }
        if include_grids:
            g = obs.grid
            entry["grid"] = {
                "width": g.width,
                "height": g.height,
                "channels": [rle_encode(g.channels[c]) for c in range(4)],
            }
        agents.append(entry)
    return {
        "tick": outcome.tick,
        "cov": outcome.cov,
        "done": outcome.done,
        "states": [encode_state(a.observation.state) for a in outcome.agents],
        "agents": agents,
    }


def encode_map(wmap) -> dict:
    return {
        "name": wmap.name,
        "resolution": wmap.resolution,
        "bounds": list(wmap.bounds),
        "free": [[x, y] for x, y in wmap.free],
        "obstacle": [[x, y] for x, y in wmap.obstacle],
    }


def encode_metrics(m) -> dict:
    return {"er": m.er, "cs85": m.cs85, "cs95": m.cs95,
            "mo85": m.mo85, "mo95": m.mo95, "rv": m.rv}
