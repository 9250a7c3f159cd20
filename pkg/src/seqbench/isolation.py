"""Process isolation: serve a black box over a local socket.

Frames are a 4-byte big-endian payload length followed by UTF-8 JSON
with a mandatory "type" field. One connection is serviced at a time,
strictly request/response; the server may interleave `log` frames
(forwarded observations) before each `result`. The remote client is a
regular `BlackBoxHandle` whose scoring backend crosses the wire, so
budget enforcement, ledgers and observer events all stay client-side
and a remote campaign is event-for-event identical to a local one.
"""

from __future__ import annotations

import json
import socket
import threading
from dataclasses import dataclass, field

import numpy as np

from .core import BlackBoxHandle, ProblemInfo
from .errors import (
    ConnectionClosed,
    PayloadTooLarge,
    ProtocolError,
    RemoteError,
    ValidationError,
)

PROTOCOL_VERSION = "seqbench/1"
MAX_PAYLOAD = 64 * 2**20
MESSAGE_TYPES = ("hello", "ack", "info", "evaluate", "result", "log", "error", "shutdown")


@dataclass
class WireMessage:
    type: str
    payload: dict = field(default_factory=dict)


def encode_message(msg: WireMessage) -> bytes:
    """Frame = 4-byte big-endian length + compact JSON, "type" first."""
    if msg.type not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {msg.type!r}")
    doc = {"type": msg.type}
    for key in sorted(msg.payload):
        if key == "type":
            raise ProtocolError("payload must not carry its own 'type'")
        doc[key] = msg.payload[key]
    data = json.dumps(doc, separators=(",", ":")).encode("utf-8")
    if len(data) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(data)} bytes exceeds {MAX_PAYLOAD}")
    return len(data).to_bytes(4, "big") + data


def _read_exact(stream, n: int, at_boundary: bool) -> bytes:
    chunks = b""
    while len(chunks) < n:
        piece = stream.read(n - len(chunks))
        if not piece:
            if at_boundary and not chunks:
                raise ConnectionClosed("connection closed at frame boundary")
            raise ConnectionClosed("connection closed mid-frame")
        chunks += piece
    return chunks


def decode_message(stream) -> WireMessage:
    """Read exactly one frame from a binary stream positioned at a boundary."""
    header = _read_exact(stream, 4, at_boundary=True)
    length = int.from_bytes(header, "big")
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"declared payload of {length} bytes exceeds {MAX_PAYLOAD}")
    data = _read_exact(stream, length, at_boundary=False)
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"payload is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "type" not in doc:
        raise ProtocolError("payload missing 'type' field")
    kind = doc.pop("type")
    if kind not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {kind!r}")
    return WireMessage(kind, doc)


class BlackBoxServer:
    """Serves one oracle; one connection at a time, sequential requests."""

    def __init__(
        self,
        oracle,
        host: str = "127.0.0.1",
        port: int = 0,
        forward_observations: bool = False,
        allow_nonlocal: bool = False,
    ):
        if not allow_nonlocal and host not in ("127.0.0.1", "localhost", "::1"):
            raise ValueError("non-loopback binding requires allow_nonlocal=True")
        self.oracle = oracle
        self.info = oracle.info()
        self.forward_observations = forward_observations
        self._sock = socket.create_server((host, port))
        self._sock.settimeout(0.2)
        self.host, self.port = self._sock.getsockname()[:2]
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def close(self) -> None:
        self._sock.close()

    def serve_forever(self) -> None:
        """Accept loop; protocol violations close the connection only."""
        try:
            while not self._stop.is_set():
                try:
                    conn, _ = self._sock.accept()
                except socket.timeout:
                    continue
                with conn:
                    self._serve_connection(conn)
        finally:
            self.close()

    def _serve_connection(self, conn: socket.socket) -> None:
        stream = conn.makefile("rb")
        out = conn.makefile("wb")

        def send(msg: WireMessage) -> None:
            out.write(encode_message(msg))
            out.flush()

        def fail(code: str, message: str) -> None:
            send(WireMessage("error", {"code": code, "message": message}))

        try:
            hello = decode_message(stream)
            if hello.type != "hello":
                fail("protocol", f"expected hello, got {hello.type}")
                return
            if hello.payload.get("version") != PROTOCOL_VERSION:
                fail("version", f"server speaks {PROTOCOL_VERSION}")
                return
            send(WireMessage("ack", {"version": PROTOCOL_VERSION}))
            while True:
                msg = decode_message(stream)
                if msg.type == "info":
                    send(WireMessage("info", self.info.as_dict()))
                elif msg.type == "evaluate":
                    if not self._handle_evaluate(msg, send, fail):
                        return
                elif msg.type == "shutdown":
                    send(WireMessage("ack"))
                    if msg.payload.get("scope") == "server":
                        self._stop.set()
                    return
                else:
                    fail("protocol", f"unexpected message type {msg.type!r}")
                    return
        except ConnectionClosed:
            return
        except ProtocolError as exc:
            try:
                fail("protocol", str(exc))
            except OSError:
                pass
            return
        except OSError:
            return

    def _handle_evaluate(self, msg: WireMessage, send, fail) -> bool:
        """Answer one evaluate; False means the connection must close."""
        try:
            batch = [self.info.alphabet.from_tokens(s) for s in msg.payload["sequences"]]
            for seq in batch:
                if seq.size != self.info.sequence_length:
                    raise ValidationError(
                        f"expected length {self.info.sequence_length}, got {seq.size}"
                    )
            scores = self.oracle.score_batch(np.stack(batch)) if batch else []
        except ValidationError as exc:
            fail("validation", str(exc))
            return True
        except (KeyError, TypeError) as exc:
            fail("protocol", f"malformed evaluate payload: {exc}")
            return False
        if self.forward_observations:
            for seq, score in zip(batch, scores):
                send(WireMessage("log", {
                    "event": {"sequence": self.info.alphabet.render(seq),
                              "score": float(score)},
                }))
        send(WireMessage("result", {"scores": [float(s) for s in scores]}))
        return True


def serve_blackbox(oracle, host: str = "127.0.0.1", port: int = 0, **kwargs) -> None:
    """Blocking convenience wrapper around `BlackBoxServer`."""
    BlackBoxServer(oracle, host=host, port=port, **kwargs).serve_forever()


class RemoteConnection:
    """Client side of the wire protocol; one request in flight at a time."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectionClosed(f"cannot reach {host}:{port}: {exc}") from exc
        self._in = self._sock.makefile("rb")
        self._out = self._sock.makefile("wb")
        self.forwarded_logs: list[dict] = []
        self._send(WireMessage("hello", {"version": PROTOCOL_VERSION}))
        self._expect("ack")
        self._send(WireMessage("info"))
        self.info = ProblemInfo.from_dict(self._expect("info").payload)

    def _send(self, msg: WireMessage) -> None:
        try:
            self._out.write(encode_message(msg))
            self._out.flush()
        except OSError as exc:
            raise ConnectionClosed(str(exc)) from exc

    def _recv(self) -> WireMessage:
        try:
            msg = decode_message(self._in)
        except OSError as exc:
            raise ConnectionClosed(str(exc)) from exc
        if msg.type == "error":
            raise RemoteError(msg.payload.get("code", "unknown"),
                              msg.payload.get("message", ""))
        return msg

    def _expect(self, kind: str) -> WireMessage:
        msg = self._recv()
        if msg.type != kind:
            raise ProtocolError(f"expected {kind}, got {msg.type}")
        return msg

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        batch = [self.info.alphabet.to_tokens(seq) for seq in np.atleast_2d(X)]
        self._send(WireMessage("evaluate", {"sequences": batch}))
        while True:
            msg = self._recv()
            if msg.type == "log":
                self.forwarded_logs.append(msg.payload.get("event", {}))
            elif msg.type == "result":
                scores = msg.payload["scores"]
                if len(scores) != len(batch):
                    raise ProtocolError(
                        f"result carries {len(scores)} scores for {len(batch)} sequences"
                    )
                return np.asarray(scores, dtype=np.float64)
            else:
                raise ProtocolError(f"expected log/result, got {msg.type}")

    def shutdown(self, scope: str = "connection") -> None:
        try:
            self._send(WireMessage("shutdown", {"scope": scope}))
            self._expect("ack")
        except (ConnectionClosed, OSError):
            pass
        self.close()

    def close(self) -> None:
        for closer in (self._in.close, self._out.close, self._sock.close):
            try:
                closer()
            except OSError:
                pass


def remote_blackbox_client(
    host: str,
    port: int,
    budget: int,
    init_budget: int = 0,
    observer=None,
    clock=None,
    timeout: float = 30.0,
) -> BlackBoxHandle:
    """Budgeted handle backed by a remote oracle.

    The ledger, validation and observer events are all client-side, so a
    solver cannot tell a remote handle from a local one. Forwarded `log`
    payloads accumulate on `handle.connection.forwarded_logs`.
    """
    connection = RemoteConnection(host, port, timeout=timeout)
    handle = BlackBoxHandle(
        info=connection.info,
        score_batch=connection.score_batch,
        budget=budget,
        init_budget=init_budget,
        observer=observer,
        clock=clock,
    )
    handle.connection = connection
    return handle
