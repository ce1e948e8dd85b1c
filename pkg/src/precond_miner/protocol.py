"""Newline-delimited JSON protocol for driving a remote exploit rig.

One JSON object per line over a byte stream (TCP, or any socket-like pair).
The client opens with a hello and the rig answers with its condition
catalog; after that each test request names the conditions to harden and the
rig answers whether the exploit still went through:

    -> {"type": "hello", "version": 1}
    <- {"type": "catalog", "conditions": [{"id": 0, "group": "packages", "label": "perl"}, ...]}
    -> {"type": "test", "id": 0, "disable": [3, 9]}
    <- {"type": "result", "id": 0, "exploited": false}

Exactly one request is in flight at a time and request ids increase strictly.
Connection-level failures (closed socket, timeout, a line cut off before its
newline) raise TransportError and can be retried on a fresh connection;
frames that parse but say something wrong (unknown type, id mismatch,
malformed fields) raise ProtocolError and mean the peer is not speaking this
protocol.

Only the client side ships for real use. LoopbackOracleServer serves the
same protocol from a simulated instance, for tests and local rehearsals.
"""

from __future__ import annotations

import json
import socket
import threading

from .errors import ProtocolError, TransportError
from .model import (
    ConditionCatalog,
    ConditionDescriptor,
    TestOutcome,
    TestSpec,
    spec_disabling,
)
from .oracle import OracleStats, ProblemInstance, SimulatedOracle

PROTOCOL_VERSION = 1


def parse_address(address: str) -> tuple[str, int]:
    """Split 'tcp://host:port' into (host, port)."""
    if not address.startswith("tcp://"):
        raise ValueError(f"only tcp:// addresses are supported, got {address!r}")
    host, sep, port = address[len("tcp://") :].rpartition(":")
    if not sep or not host:
        raise ValueError(f"address must look like tcp://host:port, got {address!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ValueError(f"bad port in address {address!r}") from None


def _send_frame(stream, payload: dict) -> None:
    data = json.dumps(payload, sort_keys=True).encode("utf-8") + b"\n"
    try:
        stream.write(data)
        stream.flush()
    except OSError as exc:
        raise TransportError(f"send failed: {exc}") from exc


def _recv_frame(stream) -> dict:
    try:
        line = stream.readline()
    except OSError as exc:
        raise TransportError(f"receive failed: {exc}") from exc
    if not line:
        raise TransportError("connection closed by peer")
    if not line.endswith(b"\n"):
        raise TransportError("connection closed mid-frame (truncated line)")
    try:
        frame = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(frame, dict):
        raise ProtocolError(f"frame must be a JSON object, got {type(frame).__name__}")
    return frame


def _catalog_from_frame(frame: dict) -> ConditionCatalog:
    conditions = frame.get("conditions")
    if not isinstance(conditions, list):
        raise ProtocolError("catalog frame carries no condition list")
    descriptors = []
    for entry in conditions:
        if not isinstance(entry, dict):
            raise ProtocolError("catalog entries must be objects")
        try:
            descriptors.append(
                ConditionDescriptor(
                    id=int(entry["id"]),
                    label=str(entry["label"]),
                    group=str(entry.get("group", "other")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad catalog entry {entry!r}: {exc}") from exc
    try:
        return ConditionCatalog(tuple(descriptors))
    except ValueError as exc:
        raise ProtocolError(f"remote catalog is inconsistent: {exc}") from exc


class ExternalOracleSession:
    """Client half of the protocol; usable anywhere an oracle is expected."""

    def __init__(self, sock: socket.socket, stats: OracleStats | None = None):
        self._sock = sock
        self._stream = sock.makefile("rwb")
        self._catalog: ConditionCatalog | None = None
        self._next_id = 0
        self.stats = stats if stats is not None else OracleStats()

    @classmethod
    def connect(cls, address: str, timeout: float | None = None) -> "ExternalOracleSession":
        host, port = parse_address(address)
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {address}: {exc}") from exc
        return cls(sock)

    def handshake(self) -> ConditionCatalog:
        _send_frame(self._stream, {"type": "hello", "version": PROTOCOL_VERSION})
        frame = _recv_frame(self._stream)
        if frame.get("type") == "error":
            raise ProtocolError(f"peer rejected handshake: {frame.get('message')}")
        if frame.get("type") != "catalog":
            raise ProtocolError(f"expected a catalog frame, got type {frame.get('type')!r}")
        self._catalog = _catalog_from_frame(frame)
        return self._catalog

    @property
    def catalog(self) -> ConditionCatalog:
        if self._catalog is None:
            raise RuntimeError("handshake() must run before using the session")
        return self._catalog

    @property
    def n(self) -> int:
        return self.catalog.n

    def run(self, spec: TestSpec) -> TestOutcome:
        if spec.n != self.n:
            raise ValueError(f"spec length {spec.n} does not match remote catalog size {self.n}")
        request_id = self._next_id
        self._next_id += 1
        _send_frame(
            self._stream,
            {"type": "test", "id": request_id, "disable": list(spec.disabled_ids)},
        )
        frame = _recv_frame(self._stream)
        kind = frame.get("type")
        if kind == "error":
            raise ProtocolError(f"peer reported an error: {frame.get('message')}")
        if kind != "result":
            raise ProtocolError(f"expected a result frame, got type {kind!r}")
        if frame.get("id") != request_id:
            raise ProtocolError(
                f"result id {frame.get('id')!r} does not match request id {request_id}"
            )
        exploited = frame.get("exploited")
        if not isinstance(exploited, bool):
            raise ProtocolError(f"result carries non-boolean exploited field: {exploited!r}")
        outcome = TestOutcome.EXPLOITED if exploited else TestOutcome.BLOCKED
        self.stats.record(outcome)
        return outcome

    def close(self) -> None:
        try:
            self._stream.close()
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "ExternalOracleSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def fetch_catalog(session: ExternalOracleSession) -> ConditionCatalog:
    """The remote catalog, performing the handshake if it has not run yet."""
    if session._catalog is None:
        return session.handshake()
    return session.catalog


def execute_test_external(session: ExternalOracleSession, spec: TestSpec) -> TestOutcome:
    return session.run(spec)


class LoopbackOracleServer:
    """Serves the wire protocol from a simulated instance, for tests.

    Each connection gets its own SimulatedOracle seeded from the instance, so
    every client session sees the same reproducible noise stream. Start/stop
    or use as a context manager; `address` gives the tcp:// endpoint.
    """

    def __init__(self, instance: ProblemInstance, host: str = "127.0.0.1", port: int = 0):
        self.instance = instance
        self._host = host
        self._port = port
        self._listener: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._running = False

    def start(self) -> "LoopbackOracleServer":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self._host, self._port))
        listener.listen()
        # closing the listener does not wake accept() on Linux; poll instead
        listener.settimeout(0.1)
        self._listener = listener
        self._port = listener.getsockname()[1]
        self._running = True
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()
        return self

    @property
    def port(self) -> int:
        return self._port

    @property
    def address(self) -> str:
        return f"tcp://{self._host}:{self._port}"

    def stop(self) -> None:
        self._running = False
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "LoopbackOracleServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while self._running:
            try:
                conn, _addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            worker = threading.Thread(target=self._serve, args=(conn,), daemon=True)
            worker.start()

    def _serve(self, conn: socket.socket) -> None:
        oracle = SimulatedOracle(self.instance)
        stream = conn.makefile("rwb")

        def fail(message: str) -> None:
            try:
                _send_frame(stream, {"type": "error", "message": message})
            except TransportError:
                pass

        try:
            try:
                hello = _recv_frame(stream)
            except (TransportError, ProtocolError):
                return
            if hello.get("type") != "hello" or hello.get("version") != PROTOCOL_VERSION:
                fail(f"expected hello version {PROTOCOL_VERSION}")
                return
            _send_frame(
                stream,
                {
                    "type": "catalog",
                    "conditions": [
                        {"id": c.id, "group": c.group, "label": c.label}
                        for c in self.instance.catalog.conditions
                    ],
                },
            )
            last_id = -1
            while True:
                try:
                    frame = _recv_frame(stream)
                except TransportError:
                    return
                except ProtocolError as exc:
                    fail(str(exc))
                    return
                if frame.get("type") != "test":
                    fail(f"unknown frame type {frame.get('type')!r}")
                    return
                request_id = frame.get("id")
                if not isinstance(request_id, int) or request_id <= last_id:
                    fail(f"request ids must be strictly increasing, got {request_id!r}")
                    return
                last_id = request_id
                disable = frame.get("disable")
                if not isinstance(disable, list) or not all(
                    isinstance(i, int) and 0 <= i < self.instance.n for i in disable
                ):
                    fail(f"bad disable list: {disable!r}")
                    return
                outcome = oracle.run(spec_disabling(self.instance.n, disable))
                _send_frame(
                    stream,
                    {
                        "type": "result",
                        "id": request_id,
                        "exploited": outcome is TestOutcome.EXPLOITED,
                    },
                )
        except TransportError:
            pass
        finally:
            try:
                stream.close()
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
