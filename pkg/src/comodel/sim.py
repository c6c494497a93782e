"""Deterministic in-process multi-replica simulator.

Scripted clients talk to the real broadcast hub over a virtual network
with seeded per-message delays, optional reordering and duplication, and
virtual-time stamps, so merge races and stamp collisions are constructible
on purpose and every run is exactly reproducible from (script, schedule).

Also home to the two convergence oracles: exhaustive permutation checking
of small operation sets, and seeded end-to-end fuzz runs asserting that
every client ends in the identical model view; plus the growth benchmark
guarding against worse-than-linear slowdown as tombstones accumulate.
"""

from __future__ import annotations

import argparse
import heapq
import itertools
import random
import statistics

import time
import uuid
from dataclasses import dataclass

from . import commands, conformance, editor, wire
from .client import ReplicaSession, SessionNotReady, SessionState
from .crdt import LWWEdge, LWWGraph, LWWVertex, Stamp
from .model import ModelView, PhysicalModel
from .server import BroadcastHub


class DivergenceDetected(AssertionError):
    def __init__(self, message: str, trace: list[ScriptLine]):
        super().__init__(message)
        self.trace = trace


class DanglingEdgeDetected(AssertionError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Network behavior knobs. Identical (seed, script, schedule) runs are
    bit-identical.

    `reorder` scrambles update frames racing from clients into the server
    (so server arrival order diverges arbitrarily from stamp order and
    from per-client issue order). The transports themselves are streams,
    so handshake frames and server-to-client delivery stay FIFO per
    connection, exactly as over a real socket.
    """

    seed: int = 0
    min_delay_ns: int = 1_000
    max_delay_ns: int = 500_000
    reorder: bool = False
    duplicate_prob: float = 0.0
    check_invariants: bool = True
    retry_ns: int = 50_000


@dataclass(frozen=True)
class ScriptLine:
    client: str
    vtime_ns: int
    text: str


@dataclass
class SimResult:
    views: dict[str, ModelView]
    violations: dict[str, list]
    fingerprints: dict[str, object]
    history_len: int
    errors: dict[str, list[str]]


def parse_script(lines) -> list[ScriptLine]:
    """Line format: `<client> <vtime_ns> <editor-DSL line>`."""
    out = []
    last: dict[str, int] = {}
    for raw in lines:
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        parts = raw.split(" ", 2)
        if len(parts) != 3 or not parts[1].isdigit():
            raise ValueError(f"bad script line: {raw!r}")
        client, vtime, text = parts[0], int(parts[1]), parts[2]
        if client in last and vtime <= last[client]:
            raise ValueError(f"virtual times must increase per client: {raw!r}")
        last[client] = vtime
        out.append(ScriptLine(client, vtime, text))
    return out


class _ScriptClock:
    def __init__(self):
        self.now = 0
        self._last = -1

    def next(self) -> int:
        value = max(self.now, self._last + 1)
        self._last = value
        return value


class _SimClient:
    def __init__(self, name: str, sim: Simulation):
        self.name = name
        self.sim = sim
        self.clock = _ScriptClock()
        self.session = ReplicaSession(
            uuid.uuid5(uuid.NAMESPACE_URL, f"comodel/sim/{name}"), self.clock)
        self.conn_id: int | None = None
        self.last_to_server = 0
        self.last_from_server = 0

    def deliver(self, line: str) -> None:
        try:
            self.session.on_line(line)
        except wire.ProtocolError as exc:
            self.session.errors.append(str(exc))
        if self.sim.schedule.check_invariants:
            bad = self.session.model.graph.dangling_live_edges()
            if bad:
                raise DanglingEdgeDetected(
                    f"{self.name}: live dangling edges {bad}")


class Simulation:
    """Single-threaded event loop over a priority queue of virtual-time
    events, driving real sessions against the real hub."""

    def __init__(self, script: list[ScriptLine], schedule: Schedule,
                 joins: dict[str, int] | None = None):
        self.script = script
        self.schedule = schedule
        self.rng = random.Random(schedule.seed)
        self.hub = BroadcastHub()
        self.clients: dict[str, _SimClient] = {}
        self._queue: list[tuple[int, int, object]] = []
        self._seq = itertools.count()
        self.now = 0
        joins = joins or {}
        for line in script:
            if line.client not in self.clients:
                self.clients[line.client] = _SimClient(line.client, self)
        for name in joins:
            if name not in self.clients:
                self.clients[name] = _SimClient(name, self)
        for name, client in self.clients.items():
            self._schedule(joins.get(name, 0), ("join", client))
        for line in script:
            self._schedule(line.vtime_ns, ("act", line, 0))

    # -- event plumbing -----------------------------------------------------

    def _schedule(self, at: int, event) -> None:
        heapq.heappush(self._queue, (at, next(self._seq), event))

    def _delay(self) -> int:
        return self.rng.randint(self.schedule.min_delay_ns,
                                self.schedule.max_delay_ns)

    def _to_server(self, client: _SimClient, line: str) -> None:
        at = self.now + self._delay()
        scramble = self.schedule.reorder and line.startswith("U\t")
        if not scramble:
            at = max(at, client.last_to_server + 1)
            client.last_to_server = at
        self._schedule(at, ("server_recv", client, line))
        if self.rng.random() < self.schedule.duplicate_prob:
            self._schedule(at + self._delay(), ("server_recv", client, line))

    def _to_client(self, client: _SimClient, line: str) -> None:
        # Stream transport: delivery to one client is always in order.
        at = max(self.now + self._delay(), client.last_from_server + 1)
        client.last_from_server = at
        self._schedule(at, ("client_recv", client, line))
        if self.rng.random() < self.schedule.duplicate_prob:
            at2 = max(at + self._delay(), client.last_from_server + 1)
            client.last_from_server = at2
            self._schedule(at2, ("client_recv", client, line))

    # -- event handlers -----------------------------------------------------

    def _handle(self, event) -> None:
        kind = event[0]
        if kind == "join":
            client = event[1]
            client.conn_id = self.hub.attach(
                lambda raw, c=client: (self._to_client(c, raw), True)[1])
            for line in client.session.opening_lines():
                self._to_server(client, line)
        elif kind == "server_recv":
            _, client, line = event
            self.hub.handle_line(client.conn_id, line)
        elif kind == "client_recv":
            _, client, line = event
            client.deliver(line)
        elif kind == "act":
            self._act(event[1], event[2])

    def _act(self, line: ScriptLine, attempts: int) -> None:
        client = self.clients[line.client]
        if client.session.state is not SessionState.LIVE:
            # The user cannot type before the snapshot finished; retry a
            # little later at a deterministic offset.
            if attempts > 10_000:
                raise RuntimeError(f"{line.client} never reached a live session")
            self._schedule(self.now + self.schedule.retry_ns,
                           ("act", line, attempts + 1))
            return
        try:
            verb = editor.parse_verb(line.text)
        except editor.EditorSyntaxError as exc:
            client.session.errors.append(f"{line.text!r}: {exc}")
            return
        if verb is None or not isinstance(
                verb, (editor.CreateVerb, editor.LinkVerb,
                       editor.UpdateVerb, editor.DeleteVerb)):
            return
        client.clock.now = max(line.vtime_ns, self.now)
        try:
            cmd = editor.translate(verb, client.session.model)
            report, frame_line = client.session.submit_local(cmd)
        except (editor.PotencyExhausted, SessionNotReady) as exc:
            client.session.errors.append(f"{line.text!r}: {exc}")
            return
        if report.status is commands.ApplyStatus.ERROR:
            client.session.errors.append(
                f"{line.text!r}: {report.error_kind} {report.detail}")
        if frame_line is not None:
            self._to_server(client, frame_line)
        if self.schedule.check_invariants:
            bad = client.session.model.graph.dangling_live_edges()
            if bad:
                raise DanglingEdgeDetected(
                    f"{line.client}: live dangling edges {bad}")

    # -- running ------------------------------------------------------------

    def run(self) -> SimResult:
        while self._queue:
            at, _, event = heapq.heappop(self._queue)
            self.now = max(self.now, at)
            self._handle(event)
        views = {n: c.session.model.read_model() for n, c in self.clients.items()}
        fingerprints = {n: c.session.model.graph.fingerprint()
                        for n, c in self.clients.items()}
        return SimResult(
            views=views,
            violations={n: conformance.check_conformance(c.session.model)
                        for n, c in self.clients.items()},
            fingerprints=fingerprints,
            history_len=len(self.hub.history),
            errors={n: list(c.session.errors) for n, c in self.clients.items()},
        )


def run_simulation(script: list[ScriptLine], schedule: Schedule,
                   joins: dict[str, int] | None = None,
                   minimize: bool = True) -> SimResult:
    """Run to quiescence and assert all replicas converged.

    On divergence raises DivergenceDetected carrying a locally minimal
    reproduction (removing any one remaining line loses the divergence).
    """
    result = Simulation(script, schedule, joins).run()
    distinct = set(result.fingerprints.values())
    if len(distinct) > 1:
        trace = _shrink(script, schedule, joins) if minimize else script
        raise DivergenceDetected(
            f"replicas diverged into {len(distinct)} states "
            f"(minimal trace: {len(trace)} lines)", trace)
    return result


def _diverges(script, schedule, joins) -> bool:
    try:
        result = Simulation(script, schedule, joins).run()
    except (DanglingEdgeDetected, Exception):
        return True
    return len(set(result.fingerprints.values())) > 1


def _shrink(script, schedule, joins) -> list[ScriptLine]:
    current = list(script)
    changed = True
    while changed:
        changed = False
        for i in range(len(current)):
            candidate = current[:i] + current[i + 1:]
            if candidate and _diverges(candidate, schedule, joins):
                current = candidate
                changed = True
                break
    return current


# -- exhaustive interleaving oracle ----------------------------------------


@dataclass(frozen=True)
class GraphOp:
    """One stamped graph-layer effect, applied permissively so any
    delivery order is admissible."""

    kind: str
    stamp: Stamp
    args: tuple = ()

    def apply(self, g: LWWGraph) -> None:
        k, a = self.kind, self.args
        if k == "add_vertex":
            g.add_vertex(LWWVertex(a[0]), self.stamp)
        elif k == "remove_vertex":
            g.remove_vertex(a[0], self.stamp, strict=False)
        elif k == "cascade_remove_vertex":
            g.cascade_remove_vertex(a[0], self.stamp, strict=False)
        elif k == "add_edge":
            g.add_edge(LWWEdge(a[0], a[1], a[2], self.stamp), self.stamp,
                       strict=False)
        elif k == "remove_edge":
            g.remove_edge(a[0], self.stamp, strict=False)
        elif k == "vertex_attr_add":
            g.ensure_vertex(a[0]).add(a[1], a[2], self.stamp)
        elif k == "vertex_attr_remove":
            g.ensure_vertex(a[0]).remove(a[1], self.stamp)
        elif k == "vertex_attr_update":
            g.ensure_vertex(a[0]).update(a[1], a[2], self.stamp)
        elif k == "edge_attr_update":
            g.ensure_edge(a[0]).update(a[1], a[2], self.stamp)
        elif k == "graph_attr_update":
            g.update(a[0], a[1], self.stamp)
        else:
            raise ValueError(f"unknown op kind {k!r}")


OP_KINDS = ("add_vertex", "remove_vertex", "cascade_remove_vertex", "add_edge",
            "remove_edge", "vertex_attr_add", "vertex_attr_remove",
            "vertex_attr_update", "edge_attr_update", "graph_attr_update")

_V1, _V2 = uuid.UUID(int=0x101), uuid.UUID(int=0x102)
_E1, _E2 = uuid.UUID(int=0x201), uuid.UUID(int=0x202)


def op_universe(replicas: tuple[uuid.UUID, ...]) -> list[GraphOp]:
    """A finite pool instantiating every op kind over two vertices, two
    edges between them, and one attribute key; stamps are all distinct."""
    specs = [
        ("add_vertex", (_V1,)),
        ("add_vertex", (_V2,)),
        ("remove_vertex", (_V1,)),
        ("cascade_remove_vertex", (_V1,)),
        ("add_edge", (_E1, _V1, _V2)),
        ("add_edge", (_E2, _V2, _V1)),
        ("remove_edge", (_E1,)),
        ("vertex_attr_add", (_V1, "k", "a")),
        ("vertex_attr_remove", (_V1, "k")),
        ("vertex_attr_update", (_V1, "k", "b")),
        ("edge_attr_update", (_E1, "k", "c")),
        ("graph_attr_update", ("k", "g")),
    ]
    ops = []
    for i, (kind, args) in enumerate(specs):
        replica = replicas[i % len(replicas)]
        ops.append(GraphOp(kind, Stamp(10 + i, replica), args))
    return ops


def random_graph_ops(rng: random.Random, count: int,
                     replicas: tuple[uuid.UUID, ...]) -> list[GraphOp]:
    vertices = [uuid.UUID(int=0x100 + i) for i in range(4)]
    edges = [uuid.UUID(int=0x200 + i) for i in range(4)]
    keys = ["k1", "k2"]
    stamps = rng.sample(range(1, count * 50), count)
    ops = []
    for nanos in stamps:
        stamp = Stamp(nanos, rng.choice(replicas))
        kind = rng.choice(OP_KINDS)
        if kind in ("add_vertex", "remove_vertex", "cascade_remove_vertex"):
            args = (rng.choice(vertices),)
        elif kind == "add_edge":
            args = (rng.choice(edges), rng.choice(vertices), rng.choice(vertices))
        elif kind == "remove_edge":
            args = (rng.choice(edges),)
        elif kind == "vertex_attr_add":
            args = (rng.choice(vertices), rng.choice(keys), str(rng.randrange(9)))
        elif kind == "vertex_attr_remove":
            args = (rng.choice(vertices), rng.choice(keys))
        elif kind == "vertex_attr_update":
            args = (rng.choice(vertices), rng.choice(keys), str(rng.randrange(9)))
        elif kind == "edge_attr_update":
            args = (rng.choice(edges), rng.choice(keys), str(rng.randrange(9)))
        else:
            args = (rng.choice(keys), str(rng.randrange(9)))
        ops.append(GraphOp(kind, stamp, args))
    return ops


def exhaustive_interleavings(ops: list[GraphOp]):
    """Apply every permutation of ops (distinct stamps required) to fresh
    replicas; True iff every order yields the same observable state. On
    failure also returns the two distinguishing permutations."""
    assert len({op.stamp for op in ops}) == len(ops), "stamps must be distinct"
    seen: dict[object, tuple] = {}
    for perm in itertools.permutations(ops):
        g = LWWGraph()
        for op in perm:
            op.apply(g)
        fp = g.fingerprint()
        if fp not in seen:
            seen[fp] = perm
        if len(seen) > 1:
            a, b = list(seen.values())[:2]
            return False, (a, b)
    return True, None


def random_order_convergence(ops: list[GraphOp], rng: random.Random,
                             orders: int = 20) -> bool:
    """Randomized permutations for op counts too large to enumerate."""
    reference = None
    for _ in range(orders):
        perm = list(ops)
        rng.shuffle(perm)
        g = LWWGraph()
        for op in perm:
            op.apply(g)
        fp = g.fingerprint()
        if reference is None:
            reference = fp
        elif fp != reference:
            return False
    return True


# -- fuzz scripts -----------------------------------------------------------


def fuzz_script(clients: int, ops_per_client: int, seed: int) -> list[ScriptLine]:
    """Random editor scripts: creates, links, updates and deletes over a
    shared growing name pool. Names are unique per client so concurrent
    creations never collide by name."""
    rng = random.Random(seed)
    names = [f"c{ci}_e{i}" for ci in range(clients) for i in range(3)]
    lines = []
    for ci in range(clients):
        client = f"client{ci}"
        vtime = 1_000_000 * (ci + 1)
        created = 0
        for i in range(ops_per_client):
            vtime += rng.randint(10_000, 2_000_000)
            roll = rng.random()
            if roll < 0.40 or created == 0:
                name = f"c{ci}_e{created}"
                created += 1
                if created <= 3:
                    names.append(name)
                lines.append(ScriptLine(
                    client, vtime, f"CREATE Thing{rng.randrange(3)} {name}"))
            elif roll < 0.65:
                a, b = rng.choice(names), rng.choice(names)
                port = rng.choice(["into", "refs", "near"])
                lines.append(ScriptLine(client, vtime, f"LINK {a}.{port} TO {b}"))
            elif roll < 0.85:
                lines.append(ScriptLine(
                    client, vtime,
                    f"UPDATE {rng.choice(names)} w{rng.randrange(2)} "
                    f"v{rng.randrange(9)}"))
            else:
                lines.append(ScriptLine(client, vtime,
                                        f"DELETE {rng.choice(names)}"))
    lines.sort(key=lambda l: (l.vtime_ns, l.client))
    return lines


# -- growth benchmark --------------------------------------------------------


def measure_degradation(sizes: list[int], seed: int = 0,
                        probe_ops: int = 300,
                        batches: int = 5) -> list[tuple[int, float]]:
    """Per-operation apply latency once the replica has accumulated each
    given number of operations. Each checkpoint reports the median of
    several probe batches, so a stray collector pause cannot masquerade
    as structural slowdown."""
    import gc

    rng = random.Random(seed)
    model = PhysicalModel()
    replica = uuid.uuid5(uuid.NAMESPACE_URL, "comodel/bench")
    counter = itertools.count(1)
    created: list[str] = []

    def one_op(i: int) -> None:
        stamp = Stamp(next(counter) * 10, replica)
        roll = rng.random()
        if roll < 0.5 or len(created) < 5:
            name = f"n{i}_{next(counter)}"
            model.create_element(name, "Thing", [("a", "1")], stamp)
            created.append(name)
        elif roll < 0.85:
            commands.apply(
                commands.Update(commands.ByName(rng.choice(created)),
                                (("a", str(rng.randrange(9))),)),
                model, stamp)
        else:
            victim = rng.choice(created)
            commands.apply(commands.Delete(commands.ByName(victim)), model, stamp)

    rows = []
    applied = 0
    per_batch = max(probe_ops // batches, 1)
    for size in sorted(s for s in sizes if s > 0):
        while applied < size:
            one_op(applied)
            applied += 1
        gc.collect()
        batch_means = []
        for _ in range(batches):
            start = time.perf_counter_ns()
            for _ in range(per_batch):
                one_op(applied)
                applied += 1
            batch_means.append((time.perf_counter_ns() - start) / per_batch)
        rows.append((size, statistics.median(batch_means)))
    return rows


# -- CLI ---------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="comodel-sim", description="Deterministic replication simulator.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="replay a script file")
    p_run.add_argument("--script", type=argparse.FileType("r"), required=True)
    p_run.add_argument("--seed", type=int, default=0)

    p_fuzz = sub.add_parser("fuzz", help="randomized convergence runs")
    p_fuzz.add_argument("--clients", type=int, default=3)
    p_fuzz.add_argument("--ops", type=int, default=50)
    p_fuzz.add_argument("--seeds", type=int, default=20)

    sub.add_parser("bench", help="apply-latency growth measurement")

    args = parser.parse_args(argv)
    if args.cmd == "run":
        script = parse_script(args.script)
        result = run_simulation(script, Schedule(seed=args.seed))
        for name in sorted(result.views):
            view = result.views[name]
            print(f"{name}: {len(view.elements)} elements, "
                  f"{len(view.associations)} associations, "
                  f"{len(result.violations[name])} violations")
        print(f"converged; history length {result.history_len}")
        return 0
    if args.cmd == "fuzz":
        for seed in range(args.seeds):
            script = fuzz_script(args.clients, args.ops, seed)
            schedule = Schedule(seed=seed, reorder=True, duplicate_prob=0.05)
            run_simulation(script, schedule)
            print(f"seed {seed}: converged ({args.clients} clients, "
                  f"{len(script)} ops)")
        return 0
    if args.cmd == "bench":
        rows = measure_degradation([1000, 2000, 4000])
        for size, mean_ns in rows:
            print(f"{size:>6} ops accumulated: {mean_ns:10.0f} ns/op")
        base = rows[0][1]
        print(f"ratio 4k/1k: {rows[-1][1] / base:.2f}")
        return 0
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
