import asyncio
import threading
import uuid

import pytest

from comodel import commands, wire
from comodel.client import (
    ReplicaSession,
    SessionNotReady,
    SessionState,
    SocketClient,
    SystemClock,
)
from comodel.commands import parse
from comodel.crdt import Stamp
from comodel.server import BroadcastHub, Server
from conftest import REPLICA_A, REPLICA_B, ServerThread, stamp


class TestWire:
    def test_update_frame_round_trip(self):
        frame = wire.UpdateFrame(uuid.UUID(int=7), stamp(42, REPLICA_B),
                                 "CREATE -name x")
        assert wire.decode(wire.encode(frame)) == frame

    def test_control_frames_round_trip(self):
        for frame in (wire.HelloFrame(uuid.UUID(int=9)), wire.SnapshotRequest(),
                      wire.SnapshotBegin(), wire.SnapshotEnd()):
            assert wire.decode(wire.encode(frame)) == frame

    def test_command_with_quoted_spaces_survives(self):
        cmd = 'UPDATE -name m -title "Improve publication record"'
        frame = wire.UpdateFrame(uuid.UUID(int=1), stamp(1), cmd)
        assert wire.decode(wire.encode(frame)).command == cmd

    def test_malformed_frames_raise(self):
        for line in ("", "U\tjunk", "U\ta\tb\tc", "WHAT\t1",
                     f"U\t{uuid.UUID(int=1)}\t-5\t{uuid.UUID(int=2)}\tX",
                     "SREQ\textra"):
            with pytest.raises(wire.ProtocolError):
                wire.decode(line)

    def test_tab_in_command_refused_at_encode(self):
        frame = wire.UpdateFrame(uuid.UUID(int=1), stamp(1), "bad\tpayload")
        with pytest.raises(wire.ProtocolError):
            wire.encode(frame)


def update_line(nanos=1, replica=REPLICA_A, command="CREATE -name x",
                client=None):
    return wire.encode(wire.UpdateFrame(client or uuid.UUID(int=0xC1),
                                        Stamp(nanos, replica), command))


class TestHub:
    def collector(self):
        lines = []
        return lines, lambda raw: (lines.append(raw), True)[1]

    def test_update_appends_history_and_echoes_to_sender(self):
        hub = BroadcastHub()
        got, sink = self.collector()
        conn = hub.attach(sink)
        hub.handle_line(conn, update_line())
        assert len(hub.history) == 1
        assert got == [update_line()]

    def test_broadcast_reaches_every_client_verbatim(self):
        hub = BroadcastHub()
        got_a, sink_a = self.collector()
        got_b, sink_b = self.collector()
        hub.attach(sink_a)
        conn_b = hub.attach(sink_b)
        line = update_line(command="CREATE -name y")
        hub.handle_line(conn_b, line)
        assert got_a == [line] and got_b == [line]

    def test_snapshot_replays_history_in_arrival_order(self):
        hub = BroadcastHub()
        got, sink = self.collector()
        writer = hub.attach(sink)
        first, second = update_line(5), update_line(3, REPLICA_B)
        hub.handle_line(writer, first)
        hub.handle_line(writer, second)
        got_new, sink_new = self.collector()
        joiner = hub.attach(sink_new)
        hub.handle_line(joiner, "SREQ")
        assert got_new == ["SBEG", first, second, "SEND"]

    def test_empty_history_snapshot(self):
        hub = BroadcastHub()
        got, sink = self.collector()
        conn = hub.attach(sink)
        hub.handle_line(conn, "SREQ")
        assert got == ["SBEG", "SEND"]

    def test_malformed_frame_kicks_only_offender(self):
        hub = BroadcastHub()
        got_a, sink_a = self.collector()
        got_b, sink_b = self.collector()
        conn_a = hub.attach(sink_a)
        conn_b = hub.attach(sink_b)
        hub.handle_line(conn_a, "garbage\twith\ttabs")
        assert hub.connected() == 1
        hub.handle_line(conn_b, update_line())
        assert got_b and not got_a

    def test_slow_client_disconnected_on_overflow(self):
        hub = BroadcastHub()
        dropped = []
        conn = hub.attach(lambda raw: False, lambda: dropped.append(True))
        writer = hub.attach(lambda raw: True)
        hub.handle_line(writer, update_line())
        assert dropped == [True]
        assert hub.connected() == 1

    def test_history_monotonic(self):
        hub = BroadcastHub()
        conn = hub.attach(lambda raw: True)
        lengths = []
        for i in range(5):
            hub.handle_line(conn, update_line(i + 1))
            lengths.append(len(hub.history))
        assert lengths == [1, 2, 3, 4, 5]


class TestSession:
    def live_session(self):
        s = ReplicaSession(uuid.UUID(int=0xAA))
        s.on_line("SBEG")
        s.on_line("SEND")
        assert s.state is SessionState.LIVE
        return s

    def test_submit_before_snapshot_completes_is_forbidden(self):
        s = ReplicaSession()
        with pytest.raises(SessionNotReady):
            s.submit_local(parse("CREATE -name x"))

    def test_own_frames_are_discarded(self):
        s = self.live_session()
        line = update_line(client=s.client_id)
        assert s.on_line(line) is False
        assert s.merged == 0
        assert s.model.find("x") is None

    def test_remote_frame_merges_with_sender_stamp(self):
        s = self.live_session()
        s.on_line(update_line(nanos=1234, replica=REPLICA_B,
                              command="CREATE -name x"))
        assert s.merged == 1
        el = s.model.find("x")
        backing = s.model.graph.vertex(el.id)
        assert backing.query_stamp("~name") == Stamp(1234, REPLICA_B)

    def test_older_remote_update_recorded_but_query_unchanged(self):
        s = self.live_session()
        report, _ = s.submit_local(parse("CREATE -name x -v new"))
        local_stamp = s.model.graph.vertex(report.element.id)
        assert s.on_line(update_line(
            nanos=1, replica=REPLICA_B,
            command=f"UPDATE -id {report.element.id} -v old")) is True
        el = s.model.find("x")
        assert dict(el.attributes)["v"] == "new"

    def test_reordered_frames_reach_same_state(self):
        frames = [
            update_line(10, REPLICA_B, "CREATE -name a"),
            update_line(20, REPLICA_B, "CREATE -name b"),
        ]
        one = self.live_session()
        for f in frames:
            one.on_line(f)
        other = self.live_session()
        for f in reversed(frames):
            other.on_line(f)
        assert one.model.graph.fingerprint() == other.model.graph.fingerprint()

    def test_malformed_frame_raises_protocol_error(self):
        s = self.live_session()
        with pytest.raises(wire.ProtocolError):
            s.on_line("U\tnot-enough-fields")

    def test_system_clock_strictly_increases(self):
        clock = SystemClock()
        values = [clock.next() for _ in range(1000)]
        assert all(b > a for a, b in zip(values, values[1:]))


@pytest.fixture()
def server():
    st = ServerThread()
    yield st
    st.stop()


class TestLiveServer:
    def test_join_empty_server_yields_empty_replica(self, server):
        client = SocketClient(server.addr)
        client.connect()
        assert client.session.state is SessionState.LIVE
        assert client.model.read_model().elements == ()
        client.close()

    def test_two_clients_broadcast(self, server):
        a, b = SocketClient(server.addr), SocketClient(server.addr)
        a.connect()
        b.connect()
        report = a.submit(parse("CREATE -name shared -typedBy Thing"))
        assert report.status is commands.ApplyStatus.APPLIED
        assert b.wait_for(lambda: b.model.find("shared") is not None)
        # A hears its own frame back and discards it by client id.
        a.poll()
        assert a.session.merged == 0
        assert len(a.model.read_model().elements) == 1
        a.close()
        b.close()

    def test_late_joiner_reconstructs_from_history(self, server):
        a = SocketClient(server.addr)
        a.connect()
        a.submit(parse("CREATE -name mindmap_0 -typedBy MindMap -title mindmap_0"))
        a.submit(parse("UPDATE -name mindmap_0 -title todolist"))
        b = SocketClient(server.addr)
        b.connect()
        el = b.model.find("mindmap_0")
        assert el is not None
        assert dict(el.attributes)["title"] == "todolist"
        a.close()
        b.close()

    def test_disconnect_leaves_others_unaffected(self, server):
        a, b, c = (SocketClient(server.addr) for _ in range(3))
        for cl in (a, b, c):
            cl.connect()
        a.submit(parse("CREATE -name one"))
        assert b.wait_for(lambda: b.model.find("one") is not None)
        b.close()
        a.submit(parse("CREATE -name two"))
        assert c.wait_for(lambda: c.model.find("two") is not None)
        a.close()
        c.close()

    def test_concurrent_edits_converge(self, server):
        a, b = SocketClient(server.addr), SocketClient(server.addr)
        a.connect()
        b.connect()
        a.submit(parse("CREATE -name left"))
        b.submit(parse("CREATE -name right"))
        assert a.wait_for(lambda: a.model.find("right") is not None)
        assert b.wait_for(lambda: b.model.find("left") is not None)
        assert a.model.graph.fingerprint() == b.model.graph.fingerprint()
        a.close()
        b.close()


class TestWebListener:
    def test_websocket_speaks_identical_frames(self):
        st = ServerThread(web=True)
        try:
            import websockets.sync.client as ws_client

            tcp = SocketClient(st.addr)
            tcp.connect()
            tcp.submit(parse("CREATE -name viaTcp"))

            uri = f"ws://127.0.0.1:{st.server.web_port}"
            with ws_client.connect(uri) as sock:
                client_id = uuid.UUID(int=0xBEB)
                sock.send(wire.encode(wire.HelloFrame(client_id)))
                sock.send(wire.encode(wire.SnapshotRequest()))
                session = ReplicaSession(client_id)
                while session.state is not SessionState.LIVE:
                    session.on_line(sock.recv(timeout=5))
                assert session.model.find("viaTcp") is not None
                # Publish from the web side; the TCP client must see it.
                s = Stamp(10**9, client_id)
                report = commands.apply(parse("CREATE -name viaWeb"),
                                        session.model, s)
                sock.send(wire.encode(wire.UpdateFrame(
                    client_id, s, commands.serialize(report.effective))))
            assert tcp.wait_for(lambda: tcp.model.find("viaWeb") is not None)
            tcp.close()
        finally:
            st.stop()

    def test_web_listener_serves_static_assets(self, tmp_path):
        import urllib.error
        import urllib.request

        (tmp_path / "index.html").write_text("<!DOCTYPE html><p>editor</p>")
        (tmp_path / "app.js").write_text("console.log('x')")
        loop = asyncio.new_event_loop()
        holder = {}
        started = threading.Event()

        def run():
            asyncio.set_event_loop(loop)
            holder["server"] = Server(("127.0.0.1", 0), ("127.0.0.1", 0),
                                      web_root=str(tmp_path))
            loop.run_until_complete(holder["server"].start())
            started.set()
            loop.run_forever()

        thread = threading.Thread(target=run, daemon=True)
        thread.start()
        assert started.wait(10)
        server = holder["server"]
        base = f"http://127.0.0.1:{server.web_port}"
        try:
            index = urllib.request.urlopen(base + "/", timeout=5)
            assert b"editor" in index.read()
            assert index.headers["Content-Type"] == "text/html"
            js = urllib.request.urlopen(base + "/app.js", timeout=5)
            assert js.headers["Content-Type"] == "text/javascript"
            with pytest.raises(urllib.error.HTTPError):
                urllib.request.urlopen(base + "/missing.css", timeout=5)
            with pytest.raises(urllib.error.HTTPError):
                urllib.request.urlopen(base + "/%2e%2e/secret", timeout=5)
        finally:
            asyncio.run_coroutine_threadsafe(server.stop(), loop).result(10)
            loop.call_soon_threadsafe(loop.stop)
            thread.join(timeout=10)
            loop.close()


class TestSendFailure:
    def test_submit_on_closed_session_is_refused(self, server):
        client = SocketClient(server.addr)
        client.connect()
        client.close()
        with pytest.raises(SessionNotReady):
            client.submit(parse("CREATE -name x"))

    def test_broken_socket_queues_then_fails(self, server):
        from comodel.client import SendFailure

        client = SocketClient(server.addr)
        client.connect()
        client._sock.close()  # break the transport under the session
        client.RETRY_BUDGET = 3
        client._pending = type(client._pending)(maxlen=3)
        sent = 0
        with pytest.raises(SendFailure):
            for i in range(10):
                client.submit(parse(f"CREATE -name q{i}"))
                sent += 1
        assert sent == 3  # budget exhausted, then the hard error
        client.close()
