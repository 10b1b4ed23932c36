import socket

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmexp.env import EnvConfig
from swarmexp.protocol import (
    MAX_FRAME,
    FrameDecoder,
    ProtocolError,
    encode_frame,
    rle_decode,
    rle_encode,
)
from swarmexp.sensing import RadarConfig
from swarmexp.server import ProtocolServer, Session

from test_env import empty_map, small_config


class TestFraming:
    json_values = st.recursive(
        st.none() | st.booleans() | st.integers(-2**31, 2**31) | st.text(max_size=20),
        lambda children: st.lists(children, max_size=4)
        | st.dictionaries(st.text(max_size=8), children, max_size=4),
        max_leaves=12,
    )

    @given(st.lists(st.dictionaries(st.text(max_size=8), json_values, max_size=6),
                    max_size=8))
    @settings(max_examples=150, deadline=None)
    def test_roundtrip(self, messages):
        decoder = FrameDecoder()
        blob = b"".join(encode_frame(m) for m in messages)
        # feed in awkward chunk sizes to exercise buffering
        out = []
        for i in range(0, len(blob), 7):
            out.extend(decoder.feed(blob[i:i + 7]))
        assert out == messages

    def test_needs_more_bytes(self):
        decoder = FrameDecoder()
        frame = encode_frame({"id": 1})
        assert decoder.feed(frame[:3]) == []
        assert decoder.feed(frame[3:]) == [{"id": 1}]

    def test_oversize_length_rejected(self):
        decoder = FrameDecoder()
        with pytest.raises(ProtocolError):
            decoder.feed(b"\xff\xff\xff\xff")

    def test_garbage_body_decodes_to_none(self):
        decoder = FrameDecoder()
        bad = b"\x00\x00\x00\x04haha"
        assert decoder.feed(bad) == [None]

    def test_encode_rejects_oversize(self):
        with pytest.raises(ProtocolError):
            encode_frame({"blob": "x" * (MAX_FRAME + 1)})


class TestRle:
    def test_examples(self):
        assert rle_encode(np.array([0, 0, 1, 1, 1, 0])) == [[0, 2], [1, 3], [0, 1]]
        assert rle_encode(np.array([])) == []

    @given(st.lists(st.integers(0, 3), max_size=200))
    @settings(max_examples=100, deadline=None)
    def test_roundtrip(self, values):
        arr = np.array(values, dtype=np.uint8)
        back = rle_decode(rle_encode(arr), arr.size)
        assert np.array_equal(back, arr)

    def test_decode_size_checked(self):
        with pytest.raises(ProtocolError):
            rle_decode([[1, 3]], 2)
        with pytest.raises(ProtocolError):
            rle_decode([[1, 1]], 2)


class LocalTransport:
    """Collects server->client frames for in-process session tests."""

    def __init__(self):
        self.decoder = FrameDecoder()
        self.responses = []

    def send(self, data: bytes) -> None:
        self.responses.extend(self.decoder.feed(data))

    def pop(self):
        assert self.responses, "no response waiting"
        return self.responses.pop(0)


def make_session():
    transport = LocalTransport()
    session = Session(small_config(n_agents=2, horizon=6), transport.send)
    return session, transport


def rpc(session, transport, msg_id, verb, payload=None):
    session.handle({"id": msg_id, "verb": verb, "payload": payload or {}})
    return transport.pop()


class TestSession:
    def test_hello_reports_version(self):
        session, transport = make_session()
        resp = rpc(session, transport, 1, "hello")
        assert resp["ok"] and resp["id"] == 1
        assert resp["payload"]["version"] == 1
        assert "step" in resp["payload"]["capabilities"]

    def test_unknown_verb_keeps_session(self):
        session, transport = make_session()
        resp = rpc(session, transport, 1, "frobnicate")
        assert not resp["ok"]
        assert resp["error"]["code"] == "unknown-verb"
        assert rpc(session, transport, 2, "hello")["ok"]

    def test_step_before_reset_is_state_error(self):
        session, transport = make_session()
        rpc(session, transport, 1, "hello")
        rpc(session, transport, 2, "configure", {"envs": 1})
        resp = rpc(session, transport, 3, "step", {"goals": [[[0, 0.5, 0.5]]]})
        assert not resp["ok"] and resp["error"]["code"] == "state"

    def test_configure_reset_step_flow(self):
        session, transport = make_session()
        rpc(session, transport, 1, "hello")
        conf = rpc(session, transport, 2, "configure",
                   {"config": {"n_agents": 2}, "envs": 1})
        assert conf["ok"]
        assert conf["payload"]["n_agents"] == 2
        assert len(conf["payload"]["map"]["free"]) > 0
        reset = rpc(session, transport, 3, "reset", {"seeds": [5]})
        assert reset["ok"]
        out = reset["payload"]["outcomes"][0]
        assert out["tick"] == 0 and out["cov"] == 0.0
        assert len(out["agents"]) == 2
        step = rpc(session, transport, 4, "step",
                   {"goals": [[[0, 0.5, 0.5], [1, 0.5, 0.5]]]})
        assert step["ok"]
        out = step["payload"]["outcomes"][0]
        assert out["tick"] == 1
        assert out["cov"] > 0.0
        metrics = rpc(session, transport, 5, "metrics")
        assert metrics["ok"]
        assert metrics["payload"]["metrics"][0]["er"] == out["cov"]

    def test_reset_determinism_through_wire(self):
        session, transport = make_session()
        rpc(session, transport, 1, "hello")
        rpc(session, transport, 2, "configure", {"envs": 1})
        a = rpc(session, transport, 3, "reset", {"seeds": [7]})
        b = rpc(session, transport, 4, "reset", {"seeds": [7]})
        assert a["payload"] == b["payload"]

    def test_malformed_body_gets_error_response(self):
        session, transport = make_session()
        session.handle(None)
        resp = transport.pop()
        assert not resp["ok"] and resp["error"]["code"] == "malformed"
        assert rpc(session, transport, 1, "hello")["ok"]

    def test_grid_channels_rle_roundtrip(self):
        session, transport = make_session()
        rpc(session, transport, 1, "hello")
        rpc(session, transport, 2, "configure", {"envs": 1})
        reset = rpc(session, transport, 3, "reset", {"seeds": [5]})
        grid = reset["payload"]["outcomes"][0]["agents"][0]["grid"]
        for runs in grid["channels"]:
            plane = rle_decode(runs, grid["width"] * grid["height"])
            assert plane.size == grid["width"] * grid["height"]

    def test_close_ends_session(self):
        session, transport = make_session()
        rpc(session, transport, 1, "hello")
        resp = rpc(session, transport, 2, "close")
        assert resp["ok"] and session.closed


class TestTcpServer:
    def test_roundtrip_over_socket(self):
        server = ProtocolServer("127.0.0.1:0", small_config(n_agents=1, horizon=4))
        server.start()
        try:
            conn = socket.create_connection((server.host, server.port), timeout=5)
            decoder = FrameDecoder()

            def call(msg):
                conn.sendall(encode_frame(msg))
                while True:
                    data = conn.recv(65536)
                    assert data, "server closed early"
                    msgs = decoder.feed(data)
                    if msgs:
                        return msgs[0]

            hello = call({"id": 1, "verb": "hello"})
            assert hello["payload"]["version"] == 1
            conf = call({"id": 2, "verb": "configure", "payload": {"envs": 2}})
            assert conf["payload"]["envs"] == 2
            reset = call({"id": 3, "verb": "reset", "payload": {"seeds": [1, 2]}})
            assert len(reset["payload"]["outcomes"]) == 2
            bye = call({"id": 4, "verb": "close"})
            assert bye["payload"]["bye"]
            conn.close()
        finally:
            server.shutdown()
