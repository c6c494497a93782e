"""Wire framing shared by the server, clients, and the simulator.

Frames are UTF-8 lines, fields separated by a single TAB:

    U\t<client_uuid>\t<nanos>\t<replica_uuid>\t<command>
    HELLO\t<client_uuid>
    SREQ / SBEG / SEND

Command payloads never contain TAB or newline (the command serializer
escapes them), so the framing is unambiguous. Over the stream transport
each frame ends with one newline; over the message-oriented web transport
one message carries exactly one frame without the newline.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass

from .crdt import Stamp


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class UpdateFrame:
    client_id: uuid.UUID
    stamp: Stamp
    command: str


@dataclass(frozen=True)
class HelloFrame:
    client_id: uuid.UUID


@dataclass(frozen=True)
class SnapshotRequest:
    pass


@dataclass(frozen=True)
class SnapshotBegin:
    pass


@dataclass(frozen=True)
class SnapshotEnd:
    pass


Frame = UpdateFrame | HelloFrame | SnapshotRequest | SnapshotBegin | SnapshotEnd


def encode(frame: Frame) -> str:
    """Frame to its line form (no trailing newline)."""
    if isinstance(frame, UpdateFrame):
        if "\t" in frame.command or "\n" in frame.command:
            raise ProtocolError("command payload contains framing characters")
        return "\t".join(["U", str(frame.client_id), str(frame.stamp.nanos),
                          str(frame.stamp.replica), frame.command])
    if isinstance(frame, HelloFrame):
        return f"HELLO\t{frame.client_id}"
    if isinstance(frame, SnapshotRequest):
        return "SREQ"
    if isinstance(frame, SnapshotBegin):
        return "SBEG"
    if isinstance(frame, SnapshotEnd):
        return "SEND"
    raise TypeError(f"not a frame: {frame!r}")


def decode(line: str) -> Frame:
    line = line.rstrip("\r\n")
    if not line:
        raise ProtocolError("empty frame")
    kind, _, rest = line.partition("\t")
    if kind == "U":
        fields = rest.split("\t", 3)
        if len(fields) != 4:
            raise ProtocolError(f"update frame needs 4 fields, got {len(fields)}")
        raw_client, raw_nanos, raw_replica, command = fields
        try:
            client_id = uuid.UUID(raw_client)
            replica = uuid.UUID(raw_replica)
            nanos = int(raw_nanos)
        except ValueError as exc:
            raise ProtocolError(f"bad update frame field: {exc}") from None
        if nanos < 0:
            raise ProtocolError("negative timestamp")
        return UpdateFrame(client_id, Stamp(nanos, replica), command)
    if kind == "HELLO":
        try:
            return HelloFrame(uuid.UUID(rest))
        except ValueError:
            raise ProtocolError(f"bad HELLO id: {rest!r}") from None
    if kind == "SREQ" and not rest:
        return SnapshotRequest()
    if kind == "SBEG" and not rest:
        return SnapshotBegin()
    if kind == "SEND" and not rest:
        return SnapshotEnd()
    raise ProtocolError(f"unknown frame kind: {kind!r}")
