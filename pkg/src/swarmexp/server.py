"""Environment-as-a-service over the framed protocol.

One session per connection, processed strictly in order:

    hello -> configure -> (reset -> step*)* -> close

Each session owns a batch of environments plus per-environment metric
trackers.  Malformed JSON bodies get an error response and the session
continues; framing violations (oversized length prefix) tear the
connection down.
"""

from __future__ import annotations

import socket
import sys
import threading

from .configio import config_overrides
from .env import BatchError, EnvConfig, VectorEnv
from .metrics import MetricsTracker, mutual_overlap
from .protocol import (
    MAX_FRAME,
    PROTOCOL_VERSION,
    FrameDecoder,
    ProtocolError,
    encode_frame,
    encode_map,
    encode_metrics,
    encode_outcome,
)

_CAPABILITIES = ["configure", "reset", "step", "metrics", "close"]


class Session:
    """Protocol state machine for one connection; transport-agnostic."""

    def __init__(self, base_config: EnvConfig, send):
        self._send = send
        self._base_config = base_config
        self._state = "hello"
        self._batch: VectorEnv | None = None
        self._trackers: list[MetricsTracker] = []
        self.closed = False

    # -- responses ----------------------------------------------------------

    def _reply(self, msg_id: int, payload: dict) -> None:
        self._send(encode_frame({"id": msg_id, "ok": True, "payload": payload}))

    def _fail(self, msg_id: int, code: str, message: str) -> None:
        self._send(encode_frame(
            {"id": msg_id, "ok": False, "error": {"code": code, "message": message}}))

    # -- dispatch ------------------------------------------------------------

    def handle(self, message) -> None:
        if message is None:  # undecodable body: error response, carry on
            self._fail(0, "malformed", "frame body is not valid JSON")
            return
        msg_id = message.get("id", 0)
        verb = message.get("verb")
        if not isinstance(msg_id, int) or msg_id < 0:
            self._fail(0, "malformed", "missing or invalid request id")
            return
        handler = getattr(self, f"_verb_{verb}", None)
        if handler is None:
            self._fail(msg_id, "unknown-verb", f"unknown verb {verb!r}")
            return
        try:
            handler(msg_id, message.get("payload") or {})
        except ProtocolError:
            raise
        except Exception as exc:  # noqa: BLE001 - reported to the peer
            self._fail(msg_id, "error", str(exc))

    # -- verbs ----------------------------------------------------------------

    def _verb_hello(self, msg_id: int, payload: dict) -> None:
        self._reply(msg_id, {
            "version": PROTOCOL_VERSION,
            "capabilities": _CAPABILITIES,
            "max_frame": MAX_FRAME,
        })
        if self._state == "hello":
            self._state = "configure"

    def _verb_configure(self, msg_id: int, payload: dict) -> None:
        if self._state == "hello":
            self._fail(msg_id, "state", "hello required before configure")
            return
        overrides = payload.get("config") or {}
        n_envs = int(payload.get("envs", 1))
        if n_envs < 1:
            self._fail(msg_id, "bad-request", "envs must be >= 1")
            return
        config = config_overrides(self._base_config, overrides)
        if self._batch is not None:
            self._batch.close()
        self._batch = VectorEnv([config] * n_envs)
        self._trackers = []
        self._state = "configured"
        env = self._batch.envs[0]
        self._reply(msg_id, {
            "envs": n_envs,
            "n_agents": config.n_agents,
            "region_grid": config.region_grid,
            "horizon": config.horizon,
            "micro_steps": config.micro_steps,
            "success_threshold": config.success_threshold,
            "map": encode_map(env.wmap),
        })

    def _verb_reset(self, msg_id: int, payload: dict) -> None:
        if self._batch is None:
            self._fail(msg_id, "state", "configure required before reset")
            return
        seeds = payload.get("seeds")
        if not isinstance(seeds, list) or len(seeds) != len(self._batch):
            self._fail(msg_id, "bad-request",
                       f"seeds must list one integer per environment ({len(self._batch)})")
            return
        outcomes = self._batch.reset([int(s) for s in seeds])
        self._trackers = [MetricsTracker(self._batch.envs[i].config.n_agents)
                          for i in range(len(self._batch))]
        self._state = "running"
        self._reply(msg_id, {"outcomes": [encode_outcome(o) for o in outcomes]})

    def _verb_step(self, msg_id: int, payload: dict) -> None:
        if self._state != "running":
            self._fail(msg_id, "state", "reset required before step")
            return
        goals = payload.get("goals")
        if not isinstance(goals, list) or len(goals) != len(self._batch):
            self._fail(msg_id, "bad-request",
                       f"goals must list one goal set per environment ({len(self._batch)})")
            return
        parsed = []
        for env_goals in goals:
            parsed.append([(int(g[0]), (float(g[1]), float(g[2]))) for g in env_goals])
        try:
            outcomes = self._batch.step(parsed)
        except BatchError as exc:
            self._fail(msg_id, "env-error", str(exc))
            return
        for i, outcome in enumerate(outcomes):
            self._trackers[i].update(outcome, self._batch.envs[i].masks)
        self._reply(msg_id, {"outcomes": [encode_outcome(o) for o in outcomes]})

    def _verb_metrics(self, msg_id: int, payload: dict) -> None:
        if not self._trackers:
            self._fail(msg_id, "state", "no episode running")
            return
        self._reply(msg_id, {
            "metrics": [encode_metrics(t.finalize()) for t in self._trackers]})

    def _verb_close(self, msg_id: int, payload: dict) -> None:
        self._reply(msg_id, {"bye": True})
        self.closed = True
        if self._batch is not None:
            self._batch.close()
            self._batch = None


def _session_loop(session: Session, recv) -> None:
    """Drive a session from a blocking recv() until close or EOF."""
    decoder = FrameDecoder()
    while not session.closed:
        data = recv()
        if not data:
            break
        try:
            messages = decoder.feed(data)
        except ProtocolError:
            break  # framing violation: tear down
        for message in messages:
            session.handle(message)
            if session.closed:
                break


class ProtocolServer:
    """Threaded TCP server; one Session per connection."""

    def __init__(self, bind: str, config: EnvConfig):
        host, _, port = bind.rpartition(":")
        self._config = config
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host or "127.0.0.1", int(port)))
        self._sock.listen(16)
        self.host, self.port = self._sock.getsockname()[:2]
        self._threads: list[threading.Thread] = []
        self._accept_thread: threading.Thread | None = None
        self._stopping = False

    def _client(self, conn: socket.socket) -> None:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        session = Session(self._config, conn.sendall)
        try:
            _session_loop(session, lambda: conn.recv(1 << 16))
        except (ConnectionError, OSError):
            pass
        finally:
            conn.close()

    def _accept_loop(self) -> None:
        while not self._stopping:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            t = threading.Thread(target=self._client, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def start(self) -> None:
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def serve_forever(self) -> None:
        self._accept_loop()

    def shutdown(self) -> None:
        self._stopping = True
        try:
            self._sock.close()
        except OSError:
            pass


def serve_stdio(config: EnvConfig) -> None:
    """One session over stdin/stdout (binary mode)."""
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def send(data: bytes) -> None:
        stdout.write(data)
        stdout.flush()

    session = Session(config, send)
    _session_loop(session, lambda: stdin.read1(1 << 16))


def serve(bind: str | None, config: EnvConfig, stdio: bool = False,
          announce=None) -> None:
    """CLI entry: run a TCP server (blocking) or a stdio session."""
    if stdio:
        serve_stdio(config)
        return
    if bind is None:
        bind = "127.0.0.1:7599"
    server = ProtocolServer(bind, config)
    if announce is not None:
        announce(f"listening on {server.host}:{server.port}")
    server.serve_forever()
