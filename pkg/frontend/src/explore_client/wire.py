"""Client-side framing for the exploration server protocol.

Frames: 4-byte big-endian length prefix, then UTF-8 JSON.  Requests carry a
strictly increasing integer id; the server echoes it on the response.
"""

from __future__ import annotations

import json
import socket
import struct

MAX_FRAME = 64 * 1024 * 1024
_HEADER = struct.Struct(">I")


class WireError(Exception):
    pass


def encode_frame(message: dict) -> bytes:
    body = json.dumps(message, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME:
        raise WireError("frame too large")
    return _HEADER.pack(len(body)) + body


class Connection:
    """Blocking request/response transport over TCP."""

    def __init__(self, host: str, port: int, timeout: float = 60.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise WireError(f"cannot reach server at {host}:{port}: {exc}") from exc
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._buf = bytearray()
        self._next_id = 1

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def _read_frame(self) -> dict:
        while True:
            if len(self._buf) >= _HEADER.size:
                (length,) = _HEADER.unpack(bytes(self._buf[:_HEADER.size]))
                if length > MAX_FRAME:
                    raise WireError(f"oversize frame announced: {length}")
                if len(self._buf) >= _HEADER.size + length:
                    body = bytes(self._buf[_HEADER.size:_HEADER.size + length])
                    del self._buf[:_HEADER.size + length]
                    return json.loads(body.decode("utf-8"))
            data = self._sock.recv(1 << 20)
            if not data:
                raise WireError("server closed the connection")
            self._buf.extend(data)

    def call(self, verb: str, payload: dict | None = None) -> dict:
        """Send one request and wait for its response payload.

        Raises WireError on transport loss and RequestError when the server
        answers with an error body (carrying the request id).
        """
        msg_id = self._next_id
        self._next_id += 1
        self._sock.sendall(encode_frame(
            {"id": msg_id, "verb": verb, "payload": payload or {}}))
        response = self._read_frame()
        if response.get("id") != msg_id:
            raise WireError(
                f"response id {response.get('id')} does not match request {msg_id}")
        if not response.get("ok"):
            err = response.get("error") or {}
            raise RequestError(msg_id, err.get("code", "error"),
                               err.get("message", "unknown server error"))
        return response["payload"]


class RequestError(Exception):
    def __init__(self, request_id: int, code: str, message: str):
        super().__init__(f"request {request_id} failed [{code}]: {message}")
        self.request_id = request_id
        self.code = code
