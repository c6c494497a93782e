"""Client endpoint: joins a server, builds its replica from the snapshot
replay, pushes local edits, and merges remote updates.

`ReplicaSession` is transport-free and holds the whole protocol state
machine; `SocketClient` binds it to a stream socket for the command-line
editor, and the simulator drives sessions directly over its virtual
network. Receiving and local editing must not interleave concurrently:
both funnel through the session, which serializes them with a lock.
"""

from __future__ import annotations

import enum
import logging
import select
import socket
import threading
import time
import uuid
from collections import deque

from . import commands, wire
from .crdt import Stamp
from .model import PhysicalModel

log = logging.getLogger("comodel.client")


class SessionError(Exception):
    pass


class SessionNotReady(SessionError):
    """Local edits are forbidden until the snapshot replay completed."""


class SendFailure(SessionError):
    pass


class SystemClock:
    """Wall-clock nanoseconds, nudged forward so consecutive reads are
    strictly increasing (coarse clocks may otherwise repeat)."""

    def __init__(self):
        self._last = 0

    def next(self) -> int:
        now = time.time_ns()
        if now <= self._last:
            now = self._last + 1
        self._last = now
        return now


class SessionState(enum.Enum):
    CONNECTING = "connecting"
    REPLAY = "replay"
    LIVE = "live"
    CLOSED = "closed"


class ReplicaSession:
    """Protocol state machine plus the local replica.

    Frames carrying the session's own client id are discarded on receipt;
    the local apply already happened when they were sent. Remote frames
    merge with the sender's embedded stamp, never local time.
    """

    def __init__(self, client_id: uuid.UUID | None = None, clock=None):
        self.client_id = client_id or uuid.uuid4()
        self.model = PhysicalModel()
        self.clock = clock or SystemClock()
        self.state = SessionState.CONNECTING
        self.errors: list[str] = []
        self.merged = 0
        self._lock = threading.Lock()

    def opening_lines(self) -> list[str]:
        return [wire.encode(wire.HelloFrame(self.client_id)),
                wire.encode(wire.SnapshotRequest())]

    def on_line(self, line: str) -> bool:
        """Feed one inbound frame line; True if a remote update merged.

        Raises ProtocolError on malformed or out-of-place frames; the
        caller decides whether that aborts the session (during replay) or
        just skips the frame (live polling).
        """
        with self._lock:
            frame = wire.decode(line)
            if isinstance(frame, wire.SnapshotBegin):
                if self.state is not SessionState.CONNECTING:
                    raise wire.ProtocolError("unexpected SBEG")
                self.state = SessionState.REPLAY
                return False
            if isinstance(frame, wire.SnapshotEnd):
                if self.state is not SessionState.REPLAY:
                    raise wire.ProtocolError("unexpected SEND")
                self.state = SessionState.LIVE
                return False
            if isinstance(frame, wire.UpdateFrame):
                if self.state is SessionState.CONNECTING:
                    # Fanout that raced ahead of our snapshot request; the
                    # replay will contain it.
                    return False
                return self._merge(frame)
            raise wire.ProtocolError(f"unexpected frame: {line!r}")

    def _merge(self, frame: wire.UpdateFrame) -> bool:
        # Live echoes of our own frames were already applied locally; our
        # own history replayed into a fresh replica (identity reuse across
        # a reconnect) must apply like anyone else's.
        if self.state is SessionState.LIVE and frame.client_id == self.client_id:
            return False
        cmd = commands.parse(frame.command)
        report = commands.apply(cmd, self.model, frame.stamp,
                                origin=commands.Origin.REMOTE)
        if report.status is commands.ApplyStatus.ERROR:
            self.errors.append(f"{frame.command!r}: {report.error_kind} "
                               f"{report.detail}")
            log.warning("remote frame failed to merge: %s", self.errors[-1])
            return False
        self.merged += 1
        return True

    def submit_local(self, cmd: commands.Command) \
            -> tuple[commands.ApplyReport, str | None]:
        """Apply a command locally; if it recorded state, return the frame
        line to publish (the caller owns delivery)."""
        with self._lock:
            if self.state is not SessionState.LIVE:
                raise SessionNotReady(f"session is {self.state.value}")
            stamp = Stamp(self.clock.next(), self.client_id)
            report = commands.apply(cmd, self.model, stamp,
                                    origin=commands.Origin.LOCAL)
            if not report.recorded:
                return report, None
            frame = wire.UpdateFrame(
                self.client_id, stamp, commands.serialize(report.effective))
            return report, wire.encode(frame)


class SocketClient:
    """Blocking stream-socket client around a ReplicaSession.

    Polling is explicit: call `poll()` to drain and merge whatever the
    server has sent since the last call.
    """

    RETRY_BUDGET = 256

    def __init__(self, addr: tuple[str, int], client_id: uuid.UUID | None = None,
                 clock=None, timeout: float = 10.0):
        self.addr = addr
        self.session = ReplicaSession(client_id, clock)
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._buffer = bytearray()
        self._pending: deque[str] = deque(maxlen=self.RETRY_BUDGET)

    @property
    def model(self) -> PhysicalModel:
        return self.session.model

    @property
    def client_id(self) -> uuid.UUID:
        return self.session.client_id

    def connect(self) -> None:
        """Join the server and build the replica from the history replay."""
        self._sock = socket.create_connection(self.addr, timeout=self.timeout)
        for line in self.session.opening_lines():
            self._send_line(line)
        deadline = time.monotonic() + self.timeout
        while self.session.state is not SessionState.LIVE:
            line = self._read_line(deadline)
            try:
                self.session.on_line(line)
            except wire.ProtocolError:
                self.close()
                raise

    def submit(self, cmd: commands.Command) -> commands.ApplyReport:
        report, line = self.session.submit_local(cmd)
        if line is not None:
            self._flush_pending()
            try:
                self._send_line(line)
            except OSError as exc:
                if len(self._pending) >= self.RETRY_BUDGET:
                    raise SendFailure(str(exc)) from exc
                self._pending.append(line)
        return report

    def poll(self) -> int:
        """Merge everything the server has queued for us; returns the
        number of remote frames merged. Malformed frames are skipped and
        surfaced in session.errors."""
        self._flush_pending()
        merged = 0
        for line in self._drain_lines():
            try:
                if self.session.on_line(line):
                    merged += 1
            except wire.ProtocolError as exc:
                self.session.errors.append(str(exc))
                log.warning("skipping malformed frame: %s", exc)
        return merged

    def wait_for(self, predicate, timeout: float = 5.0, step: float = 0.01) -> bool:
        """Test helper: poll until predicate() or timeout."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            self.poll()
            if predicate():
                return True
            time.sleep(step)
        return False

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None
        self.session.state = SessionState.CLOSED

    # -- socket plumbing ---------------------------------------------------

    def _send_line(self, line: str) -> None:
        if self._sock is None:
            raise SendFailure("not connected")
        self._sock.sendall((line + "\n").encode("utf-8"))

    def _flush_pending(self) -> None:
        while self._pending:
            line = self._pending[0]
            try:
                self._send_line(line)
            except OSError:
                return
            self._pending.popleft()

    def _read_line(self, deadline: float) -> str:
        while True:
            idx = self._buffer.find(b"\n")
            if idx >= 0:
                raw = self._buffer[:idx]
                del self._buffer[:idx + 1]
                return raw.decode("utf-8", "replace")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SessionError("timed out waiting for server")
            self._sock.settimeout(remaining)
            chunk = self._sock.recv(65536)
            if not chunk:
                raise SessionError("server closed the connection")
            self._buffer.extend(chunk)

    def _drain_lines(self) -> list[str]:
        if self._sock is None:
            return []
        while True:
            readable, _, _ = select.select([self._sock], [], [], 0)
            if not readable:
                break
            try:
                chunk = self._sock.recv(65536)
            except BlockingIOError:
                break
            if not chunk:
                self.close()
                break
            self._buffer.extend(chunk)
        lines = []
        while True:
            idx = self._buffer.find(b"\n")
            if idx < 0:
                break
            lines.append(self._buffer[:idx].decode("utf-8", "replace"))
            del self._buffer[:idx + 1]
        return lines
