"""A real session over TCP: one server, two socket clients, live merge.

Run: python3 demos/live_session.py
"""

import asyncio
import threading
import time

from comodel.client import SocketClient
from comodel.editor import (
    bootstrap_mindmap_metamodel,
    parse_verb,
    render_read,
    translate,
)
from comodel.server import Server


def start_server():
    loop = asyncio.new_event_loop()
    holder = {}
    started = threading.Event()

    def run():
        asyncio.set_event_loop(loop)
        server = Server(("127.0.0.1", 0))
        holder["server"] = server
        loop.run_until_complete(server.start())
        started.set()
        loop.run_forever()

    threading.Thread(target=run, daemon=True).start()
    started.wait(10)
    return holder["server"], loop


def do(client, line):
    print(f"  {line}")
    return client.submit(translate(parse_verb(line), client.model))


def settle(*clients):
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline:
        for c in clients:
            c.poll()
        prints = {render_read(c.model) for c in clients}
        if len(prints) == 1:
            return prints.pop()
        time.sleep(0.01)
    raise RuntimeError("clients did not settle")


def main():
    server, loop = start_server()
    addr = ("127.0.0.1", server.port)
    print(f"server on {addr[0]}:{addr[1]}")

    alice, bob = SocketClient(addr), SocketClient(addr)
    alice.connect()
    bob.connect()

    print("\nalice bootstraps the mindmap language:")
    bootstrap_mindmap_metamodel(alice.submit, alice.model)

    print("\nalice edits:")
    do(alice, "CREATE MindMap mindmap_0")
    settle(alice, bob)

    print("\nbob edits (on his replica):")
    do(bob, "UPDATE mindmap_0 title todolist")
    do(bob, "CREATE CentralTopic tasks")
    do(bob, "LINK mindmap_0.topic TO tasks")

    print("\nafter the dust settles, both see:")
    print(settle(alice, bob))

    print("\nconflict: bob deletes `tasks` while alice, who has not seen "
          "that yet, links into it")
    do(bob, "DELETE tasks")
    do(alice, "CREATE MainTopic todos")
    do(alice, "LINK tasks.mainTopics TO todos")
    print("\nconverged result (the newer link revived `tasks`):")
    print(settle(alice, bob))

    alice.close()
    bob.close()
    loop.call_soon_threadsafe(loop.stop)


if __name__ == "__main__":
    main()
