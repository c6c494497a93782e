import asyncio
import threading
import uuid

from comodel.crdt import Stamp
from comodel.server import Server

REPLICA_A = uuid.UUID(int=0xA)
REPLICA_B = uuid.UUID(int=0xB)
REPLICA_C = uuid.UUID(int=0xC)


def stamp(nanos: int, replica: uuid.UUID = REPLICA_A) -> Stamp:
    return Stamp(nanos, replica)


class ServerThread:
    """A real broadcast server on an ephemeral localhost port, running its
    own event loop in a daemon thread."""

    def __init__(self, web=False):
        self.loop = asyncio.new_event_loop()
        self.server = None
        started = threading.Event()

        def run():
            asyncio.set_event_loop(self.loop)
            self.server = Server(("127.0.0.1", 0),
                                 ("127.0.0.1", 0) if web else None)
            self.loop.run_until_complete(self.server.start())
            started.set()
            self.loop.run_forever()

        self.thread = threading.Thread(target=run, daemon=True)
        self.thread.start()
        if not started.wait(10):
            raise RuntimeError("server failed to start")

    @property
    def addr(self):
        return ("127.0.0.1", self.server.port)

    def stop(self):
        async def _shutdown():
            await self.server.stop()
            self.loop.stop()

        asyncio.run_coroutine_threadsafe(_shutdown(), self.loop)
        self.thread.join(timeout=10)
        self.loop.close()
