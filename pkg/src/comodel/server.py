"""Broadcast server: collects updates, appends them to an in-memory
history, relays them verbatim to every connected client (including the
sender), and replays the full history to newly joined clients.

The server is semantics-free: it never parses command payloads and never
mutates a frame. All conflict handling happens in the replicas.

`BroadcastHub` is the transport-independent core; the asyncio TCP and
WebSocket listeners below and the in-process simulator all drive the same
hub, so the protocol logic under test is the production logic.
"""

from __future__ import annotations

import argparse
import asyncio
import itertools
import logging
import uuid
from dataclasses import dataclass
from typing import Callable

from . import wire

log = logging.getLogger("comodel.server")

DEFAULT_OUTBOUND_LIMIT = 10_000


@dataclass
class _Connection:
    send: Callable[[str], bool]      # enqueue one frame line; False = dead
    drop: Callable[[], None]         # ask the transport to close
    client_id: uuid.UUID | None = None
    saw_hello: bool = False


class BroadcastHub:
    """History plus fanout. One frame is appended and fanned out in a
    single synchronous step, so a snapshot replay can never observe a
    half-delivered frame."""

    def __init__(self):
        self.history: list[str] = []
        self._conns: dict[int, _Connection] = {}
        self._ids = itertools.count(1)

    def attach(self, send: Callable[[str], bool],
               drop: Callable[[], None] = lambda: None) -> int:
        conn_id = next(self._ids)
        self._conns[conn_id] = _Connection(send, drop)
        log.info("connection %d attached (%d total)", conn_id, len(self._conns))
        return conn_id

    def detach(self, conn_id: int) -> None:
        conn = self._conns.pop(conn_id, None)
        if conn is not None:
            log.info("connection %d detached", conn_id)

    def connected(self) -> int:
        return len(self._conns)

    def handle_line(self, conn_id: int, line: str) -> None:
        """Process one inbound frame line from a connection.

        Malformed input disconnects only the offending client.
        """
        conn = self._conns.get(conn_id)
        if conn is None:
            return
        try:
            frame = wire.decode(line)
        except wire.ProtocolError as exc:
            log.warning("connection %d sent a bad frame (%s); dropping it",
                        conn_id, exc)
            self._kick(conn_id)
            return
        if isinstance(frame, wire.HelloFrame):
            conn.client_id = frame.client_id
            conn.saw_hello = True
        elif isinstance(frame, wire.UpdateFrame):
            raw = line.rstrip("\r\n")
            self.history.append(raw)
            self._broadcast(raw)
        elif isinstance(frame, wire.SnapshotRequest):
            self._replay(conn_id)
        else:
            log.warning("connection %d sent a server-only frame", conn_id)
            self._kick(conn_id)

    def _broadcast(self, raw: str) -> None:
        # Every client gets the frame, the sender included; receivers
        # filter their own frames by client id.
        for conn_id in list(self._conns):
            self._send(conn_id, raw)

    def _replay(self, conn_id: int) -> None:
        lines = [wire.encode(wire.SnapshotBegin()), *self.history,
                 wire.encode(wire.SnapshotEnd())]
        for raw in lines:
            if not self._send(conn_id, raw):
                return

    def _send(self, conn_id: int, raw: str) -> bool:
        conn = self._conns.get(conn_id)
        if conn is None:
            return False
        if not conn.send(raw):
            log.warning("connection %d cannot keep up; disconnecting it", conn_id)
            self._kick(conn_id)
            return False
        return True

    def _kick(self, conn_id: int) -> None:
        conn = self._conns.pop(conn_id, None)
        if conn is not None:
            conn.drop()


# -- asyncio transports ---------------------------------------------------


class Server:
    """TCP (and optionally WebSocket) front end over one BroadcastHub.

    The web listener also answers plain HTTP GETs from `web_root` (the
    browser editor's static files), so one address serves both the page
    and its frames.
    """

    def __init__(self, listen: tuple[str, int],
                 web_listen: tuple[str, int] | None = None,
                 web_root: str | None = None,
                 outbound_limit: int = DEFAULT_OUTBOUND_LIMIT):
        self.listen = listen
        self.web_listen = web_listen
        self.web_root = web_root
        self.outbound_limit = outbound_limit
        self.hub = BroadcastHub()
        self._tcp_server: asyncio.AbstractServer | None = None
        self._ws_server = None

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, self.listen[0], self.listen[1])
        log.info("listening on %s:%d", self.listen[0], self.port)
        if self.web_listen is not None:
            import websockets

            self._ws_server = await websockets.serve(
                self._handle_ws, self.web_listen[0], self.web_listen[1],
                process_request=self._serve_static)
            log.info("web listener on %s:%d", self.web_listen[0], self.web_port)

    @property
    def port(self) -> int:
        return self._tcp_server.sockets[0].getsockname()[1]

    @property
    def web_port(self) -> int:
        sockets = getattr(self._ws_server, "sockets", None) or \
            self._ws_server.server.sockets
        return sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            try:
                # Idle keep-alive HTTP connections on the web listener may
                # take their time; do not block shutdown on them.
                await asyncio.wait_for(self._ws_server.wait_closed(), 2.0)
            except asyncio.TimeoutError:
                pass

    async def serve_forever(self) -> None:
        await self.start()
        try:
            await asyncio.Event().wait()
        finally:
            await self.stop()

    async def _handle_tcp(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter) -> None:
        queue: asyncio.Queue[str | None] = asyncio.Queue(self.outbound_limit)

        def send(raw: str) -> bool:
            try:
                queue.put_nowait(raw)
                return True
            except asyncio.QueueFull:
                return False

        def drop() -> None:
            try:
                queue.put_nowait(None)
            except asyncio.QueueFull:
                # A full queue still wakes the writer eventually; closing
                # the transport is the hard stop.
                writer.close()

        conn_id = self.hub.attach(send, drop)

        async def pump_out() -> None:
            while True:
                raw = await queue.get()
                if raw is None:
                    break
                writer.write((raw + "\n").encode("utf-8"))
                await writer.drain()

        writer_task = asyncio.create_task(pump_out())
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                self.hub.handle_line(conn_id, line.decode("utf-8", "replace"))
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            self.hub.detach(conn_id)
            writer_task.cancel()
            writer.close()

    def _serve_static(self, connection, request):
        """Answer non-upgrade HTTP requests on the web listener with files
        from web_root; WebSocket handshakes fall through untouched."""
        if "upgrade" in request.headers.get("Connection", "").lower():
            return None
        if self.web_root is None:
            return connection.respond(404, "no static root configured\n")
        import pathlib
        import urllib.parse

        root = pathlib.Path(self.web_root).resolve()
        raw = urllib.parse.urlparse(request.path).path
        name = raw.lstrip("/") or "index.html"
        target = (root / name).resolve()
        if not target.is_relative_to(root) or not target.is_file():
            return connection.respond(404, "not found\n")
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        types = {".html": "text/html", ".css": "text/css",
                 ".js": "text/javascript", ".json": "application/json"}
        body = target.read_bytes()
        headers = Headers([
            ("Content-Type", types.get(target.suffix, "application/octet-stream")),
            ("Content-Length", str(len(body))),
        ])
        return Response(200, "OK", headers, body)

    async def _handle_ws(self, websocket) -> None:
        queue: asyncio.Queue[str | None] = asyncio.Queue(self.outbound_limit)

        def send(raw: str) -> bool:
            try:
                queue.put_nowait(raw)
                return True
            except asyncio.QueueFull:
                return False

        def drop() -> None:
            try:
                queue.put_nowait(None)
            except asyncio.QueueFull:
                pass

        conn_id = self.hub.attach(send, drop)

        async def pump_out() -> None:
            while True:
                raw = await queue.get()
                if raw is None:
                    await websocket.close()
                    break
                await websocket.send(raw)

        writer_task = asyncio.create_task(pump_out())
        try:
            async for message in websocket:
                if isinstance(message, bytes):
                    message = message.decode("utf-8", "replace")
                self.hub.handle_line(conn_id, message)
        except Exception:
            pass
        finally:
            self.hub.detach(conn_id)
            try:
                writer_task.cancel()
            except RuntimeError:
                pass  # loop already gone during shutdown


def parse_addr(raw: str) -> tuple[str, int]:
    host, _, port = raw.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {raw!r}")
    return host, int(port)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="comodel-server",
        description="Broadcast server for collaborative modeling sessions.")
    parser.add_argument("--listen", type=parse_addr, default=("127.0.0.1", 7700),
                        help="stream listener address (default 127.0.0.1:7700)")
    parser.add_argument("--web-listen", type=parse_addr, default=None,
                        help="optional WebSocket listener address")
    parser.add_argument("--web-root", default=None,
                        help="serve these static files on the web listener "
                             "(point it at the built frontend)")
    parser.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    server = Server(args.listen, args.web_listen, web_root=args.web_root)
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
