"""Classical message layer between Client and Server: frames, sessions, sockets.

Frames are JSON objects, one per line (``vbqc.wire/1``):

============  =========  ===========================================================
type          direction  fields
============  =========  ===========================================================
``session``   C -> S     ``schema``, ``graph`` {vertices, edges}, ``seed`` {entropy, spawn_key}
``ready``     S -> C     (none)
``prep``      C -> S     ``run``, ``attempt``, ``opaque`` {vertex: preparation}
``delta``     C -> S     ``run``, ``vertex``, ``delta`` (0..7)
``outcome``   S -> C     ``run``, ``vertex``, ``b`` (0 or 1)
``redo``      both       ``run``, ``by`` ("client" or "server")
``verdict``   C -> S     ``accept`` (list of bits) or ``abort`` (reason)
``error``     both       ``message``
============  =========  ===========================================================

The ``opaque`` payload stands in for quantum states: it travels to the
Server process only because the simulator lives there. Server code hands
it to the backend without reading it, so this is a simulation-only trust
boundary; blindness is assessed through the adversary API, never by
inspecting the wire.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from collections import deque
from collections.abc import Callable, Mapping

import numpy as np

from . import rng as rngmod
from .adversary import Honest, ServerBehaviour
from .graph import Colouring, Graph
from .pattern import MeasurementPattern
from .protocol import Accept, ProtocolParams, RedoSettings, run_protocol
from .statevector import Dummy, PlusTheta
from .ubqc import QubitHandle, RedoRequested, Server, ServerOptions

WIRE_SCHEMA = "vbqc.wire/1"

_REQUIRED: dict[str, dict[str, type | tuple[type, ...]]] = {
    "session": {"schema": str, "graph": dict, "seed": dict},
    "ready": {},
    "prep": {"run": int, "attempt": int, "opaque": dict},
    "delta": {"run": int, "vertex": int, "delta": int},
    "outcome": {"run": int, "vertex": int, "b": int},
    "redo": {"run": int, "by": str},
    "verdict": {},
    "error": {"message": str},
}


class FrameError(ValueError):
    """A frame that is not valid JSON or does not match its type's field list."""


class SessionError(RuntimeError):
    """The peer reported an error or broke the session contract."""


def encode_frame(frame: Mapping) -> bytes:
    return (json.dumps(frame, separators=(",", ":"), sort_keys=True) + "\n").encode()


def decode_frame(line: bytes | str) -> dict:
    try:
        frame = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FrameError(f"not JSON: {exc}") from None
    if not isinstance(frame, dict) or frame.get("type") not in _REQUIRED:
        raise FrameError(f"unknown frame: {str(line)[:80]}")
    for name, typ in _REQUIRED[frame["type"]].items():
        val = frame.get(name)
        if not isinstance(val, typ) or isinstance(val, bool):
            raise FrameError(f"{frame['type']} frame needs field {name!r} of type {typ.__name__}")
    if frame["type"] == "delta" and not 0 <= frame["delta"] < 8:
        raise FrameError("delta out of range")
    if frame["type"] == "outcome" and frame["b"] not in (0, 1):
        raise FrameError("outcome bit out of range")
    if frame["type"] == "verdict" and ("accept" in frame) == ("abort" in frame):
        raise FrameError("verdict needs exactly one of accept/abort")
    return frame


# --- opaque preparation payloads ------------------------------------------------


def _opaque_from_handle(handle: QubitHandle) -> dict:
    prep = handle._prep
    if isinstance(prep, Dummy):
        return {"kind": "dummy", "bit": prep.bit}
    return {"kind": "plus", "theta": prep.theta}


def _handle_from_opaque(desc: Mapping) -> QubitHandle:
    if desc.get("kind") == "dummy":
        return QubitHandle(Dummy(int(desc["bit"])))
    if desc.get("kind") == "plus":
        return QubitHandle(PlusTheta(int(desc["theta"])))
    raise FrameError("bad opaque preparation")


# --- Server endpoint --------------------------------------------------------------

CLOSE = object()


class ServerSession:
    """The Server role as a frame-in, frames-out state machine.

    ``drop_on_redo`` turns every Server-side redo into a dropped connection,
    which the Client must treat the same way.
    """

    def __init__(self, behaviour: ServerBehaviour | None = None, redo_rate: float = 0.0, drop_on_redo: bool = False):
        self.behaviour = behaviour or Honest()
        self.redo_rate = redo_rate
        self.drop_on_redo = drop_on_redo
        self.server: Server | None = None
        self.seed = None
        self.run: int | None = None
        self.finished = False

    def handle(self, frame: Mapping) -> list:
        kind = frame["type"]
        if kind == "session":
            if frame["schema"] != WIRE_SCHEMA:
                return [{"type": "error", "message": f"unsupported schema {frame['schema']}"}, CLOSE]
            g = frame["graph"]
            graph = Graph(tuple(g["vertices"]), tuple(tuple(e) for e in g["edges"]))
            self.server = Server(graph, self.behaviour, ServerOptions(redo_rate=self.redo_rate))
            seed = frame["seed"]
            self.seed = np.random.SeedSequence(int(seed["entropy"]), spawn_key=tuple(seed["spawn_key"]))
            return [{"type": "ready"}]
        if self.server is None:
            return [{"type": "error", "message": "no session"}, CLOSE]
        if kind == "prep":
            j, attempt = frame["run"], frame["attempt"]
            handles = {int(v): _handle_from_opaque(d) for v, d in frame["opaque"].items()}
            self.server.begin_run(j, handles, rngmod.substream(self.seed, j, attempt, rngmod.SERVER))
            self.run = j
            return []
        if kind == "delta":
            if frame["run"] != self.run:
                return [{"type": "error", "message": "delta for a run that is not active"}, CLOSE]
            try:
                b = self.server.measure(frame["vertex"], frame["delta"])
            except RedoRequested:
                self.run = None
                if self.drop_on_redo:
                    return [CLOSE]
                return [{"type": "redo", "run": frame["run"], "by": "server"}]
            return [{"type": "outcome", "run": frame["run"], "vertex": frame["vertex"], "b": b}]
        if kind == "redo":
            self.server.abandon()
            self.run = None
            return []
        if kind == "verdict":
            self.finished = True
            return [CLOSE]
        return [{"type": "error", "message": f"unexpected {kind} frame"}, CLOSE]


class InMemoryTransport:
    """Client side of a session whose Server runs synchronously in-process."""

    def __init__(self, session: ServerSession):
        self.session = session
        self.inbox: deque = deque()
        self.closed = False

    def send(self, frame: Mapping) -> None:
        if self.closed:
            raise ConnectionError("transport closed")
        # round-trip through the codec so both transports see identical bytes
        for out in self.session.handle(decode_frame(encode_frame(frame))):
            if out is CLOSE:
                self.closed = True
            else:
                self.inbox.append(decode_frame(encode_frame(out)))

    def recv(self) -> dict:
        if self.inbox:
            return self.inbox.popleft()
        raise ConnectionError("connection closed by server")

    def close(self) -> None:
        self.closed = True


class StreamSocketTransport:
    """Client side over a TCP stream of newline-delimited frames."""

    def __init__(self, address: tuple[str, int], timeout: float = 30.0):
        self.sock = socket.create_connection(address, timeout=timeout)
        self.reader = self.sock.makefile("rb")

    def send(self, frame: Mapping) -> None:
        try:
            self.sock.sendall(encode_frame(frame))
        except OSError as exc:
            raise ConnectionError(str(exc)) from exc

    def recv(self) -> dict:
        try:
            line = self.reader.readline()
        except OSError as exc:
            raise ConnectionError(str(exc)) from exc
        if not line:
            raise ConnectionError("connection closed by server")
        return decode_frame(line)

    def close(self) -> None:
        try:
            self.reader.close()
            self.sock.close()
        except OSError:
            pass


def make_session_factory(
    behaviour: ServerBehaviour | None = None, redo_rate: float = 0.0, drop_on_redo: bool = False
) -> Callable[[], ServerSession]:
    return lambda: ServerSession(behaviour, redo_rate, drop_on_redo)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        session = self.server.session_factory()
        for line in self.rfile:
            try:
                frame = decode_frame(line)
            except FrameError as exc:
                self.wfile.write(encode_frame({"type": "error", "message": str(exc)}))
                return
            for out in session.handle(frame):
                if out is CLOSE:
                    return
                self.wfile.write(encode_frame(out))


class ProtocolServer(socketserver.ThreadingTCPServer):
    """TCP endpoint: one :class:`ServerSession` per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], session_factory: Callable[[], ServerSession]):
        super().__init__(address, _Handler)
        self.session_factory = session_factory

    def start_background(self) -> threading.Thread:
        th = threading.Thread(target=self.serve_forever, daemon=True)
        th.start()
        return th


# --- Client endpoint --------------------------------------------------------------


class ClientLink:
    """A reconnecting session; a lost connection surfaces as a Server redo."""

    def __init__(self, connect: Callable[[], object], graph: Graph, seed):
        self.connect = connect
        self.graph = graph
        self.seed = rngmod.seed_sequence(seed)
        self.transport = None
        self.reconnects = 0
        self.open()

    def open(self) -> None:
        self.transport = self.connect()
        self.transport.send(
            {
                "type": "session",
                "schema": WIRE_SCHEMA,
                "graph": {"vertices": list(self.graph.vertices), "edges": [list(e) for e in self.graph.edges]},
                "seed": {"entropy": str(self.seed.entropy), "spawn_key": list(self.seed.spawn_key)},
            }
        )
        self.expect("ready")

    def reopen(self) -> None:
        if self.transport is not None:
            self.transport.close()
        self.reconnects += 1
        self.open()

    def expect(self, kind: str) -> dict:
        frame = self.transport.recv()
        if frame["type"] == "error":
            raise SessionError(frame["message"])
        if frame["type"] != kind:
            raise SessionError(f"expected {kind}, got {frame['type']}")
        return frame

    def close(self) -> None:
        if self.transport is not None:
            self.transport.close()


class RemoteServer:
    """Proxy with the in-process Server's interface, speaking frames over a link."""

    def __init__(self, link: ClientLink, j: int, attempt: int):
        self.link = link
        self.j = j
        self.attempt = attempt

    def begin_run(self, j: int, handles: Mapping[int, QubitHandle], rng) -> None:
        opaque = {str(v): _opaque_from_handle(h) for v, h in handles.items()}
        self._call({"type": "prep", "run": j, "attempt": self.attempt, "opaque": opaque}, reply=False)

    def measure(self, v: int, delta: int) -> int:
        frame = self._call({"type": "delta", "run": self.j, "vertex": v, "delta": delta})
        if frame["type"] == "redo":
            raise RedoRequested(self.j)
        if frame["type"] == "error":
            raise SessionError(frame["message"])
        if frame["type"] != "outcome" or frame["vertex"] != v or frame["run"] != self.j:
            raise SessionError(f"unexpected reply {frame}")
        return frame["b"]

    def _call(self, frame, reply: bool = True):
        try:
            self.link.transport.send(frame)
            return self.link.transport.recv() if reply else None
        except ConnectionError:
            # a lost connection mid-run counts as the Server asking for a redo
            self.link.reopen()
            raise RedoRequested(self.j) from None


def run_protocol_remote(
    connect: Callable[[], object],
    p: MeasurementPattern,
    c: Colouring,
    params: ProtocolParams,
    x,
    seed=0,
    redo: RedoSettings | None = None,
):
    """Drive one protocol execution against a remote Server and send the verdict.

    The behaviour lives with the Server endpoint; Client-side randomness is
    identical to :func:`vbqc.protocol.run_protocol` for the same seed.
    """
    seed = rngmod.seed_sequence(seed)
    link = ClientLink(connect, p.graph, seed)
    try:
        verdict, trace = run_protocol(
            p, c, params, x, Honest(), seed, engine="quantum", redo=redo,
            server_factory=lambda j, attempt: RemoteServer(link, j, attempt),
        )
        final = {"type": "verdict"}
        if isinstance(verdict, Accept):
            final["accept"] = list(verdict.y)
        else:
            final["abort"] = verdict.reason
        try:
            link.transport.send(final)
        except ConnectionError:
            pass
    finally:
        link.close()
    return verdict, trace, link.reconnects
