"""Acceptance criteria, one test per criterion, each printing a PASS line
with its stated tolerance. Run with `pytest tests/test_acceptance.py -s`
to see the lines as they complete."""

import itertools
import random
import time
import uuid

import pytest

from comodel import conformance
from comodel.client import ReplicaSession, SocketClient
from comodel.crdt import LWWMap, LWWRegister, LWWSet, Stamp
from comodel.editor import (
    bootstrap_mindmap_metamodel,
    render_read,
    translate,
    parse_verb,
)
from comodel.model import PotencyExhausted
from comodel.sim import (
    GraphOp,
    Schedule,
    exhaustive_interleavings,
    fuzz_script,
    measure_degradation,
    op_universe,
    run_simulation,
)
from comodel import wire
from conftest import REPLICA_A, REPLICA_B, REPLICA_C, ServerThread, stamp

REPLICAS = (REPLICA_A, REPLICA_B, REPLICA_C)


def report(line: str) -> None:
    print(f"PASS  {line}")


# -- 1. Fig. 2 reproduction ---------------------------------------------------


def test_figure2_reproduction():
    started = time.perf_counter()

    # Register level: x=10@t0; updates (15, t=1) and (20, t=2) in both orders.
    for order in ([("15", 1), ("20", 2)], [("20", 2), ("15", 1)]):
        reg = LWWRegister("10", stamp(0))
        for value, t in order:
            reg.update(value, stamp(t))
        assert (reg.value, reg.stamp) == ("20", stamp(2))

    # Full stack: two replica sessions exchanging the same two frames.
    def session(client_int):
        s = ReplicaSession(uuid.UUID(int=client_int))
        s.on_line("SBEG")
        s.on_line("SEND")
        return s

    a, b = session(0xA1), session(0xB1)
    seed_frame = wire.encode(wire.UpdateFrame(
        uuid.UUID(int=0xC1), stamp(0, REPLICA_C), "CREATE -name cell -x 10"))
    a.on_line(seed_frame)
    b.on_line(seed_frame)
    cell = a.model.find("cell")
    writer = uuid.UUID(int=0xD1)
    updates = [
        wire.encode(wire.UpdateFrame(writer, Stamp(1, writer),
                                     f"UPDATE -id {cell.id} -x 15")),
        wire.encode(wire.UpdateFrame(writer, Stamp(2, writer),
                                     f"UPDATE -id {cell.id} -x 20")),
    ]
    for frame in updates:            # issue order
        a.on_line(frame)
    for frame in reversed(updates):  # network-swapped order
        b.on_line(frame)
    value_a = dict(a.model.find("cell").attributes)["x"]
    value_b = dict(b.model.find("cell").attributes)["x"]
    assert value_a == value_b == "20"
    assert a.model.graph.fingerprint() == b.model.graph.fingerprint()

    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    report(f"[1] Fig. 2 trace: both delivery orders end at x=20 on both "
           f"replicas (exact, {elapsed * 1000:.0f} ms < 1 s)")


# -- 2. SEC safety ------------------------------------------------------------


def acceptance_pool():
    pool = list(op_universe(REPLICAS))
    v1, v2 = uuid.UUID(int=0x101), uuid.UUID(int=0x102)
    e1 = uuid.UUID(int=0x201)
    pool += [
        GraphOp("remove_vertex", Stamp(3, REPLICA_B), (v2,)),
        GraphOp("cascade_remove_vertex", Stamp(40, REPLICA_C), (v2,)),
        GraphOp("add_edge", Stamp(10, REPLICA_B), (e1, v1, v2)),
        GraphOp("remove_edge", Stamp(2, REPLICA_C), (e1,)),
        GraphOp("vertex_attr_update", Stamp(50, REPLICA_A), (v2, "k", "z")),
        GraphOp("add_vertex", Stamp(60, REPLICA_B), (v1,)),
    ]
    assert len({op.stamp for op in pool}) == len(pool)
    return pool


def test_sec_safety_exhaustive_and_fuzz():
    pool = acceptance_pool()
    kinds = {op.kind for op in pool}
    assert len(kinds) == 10, "generator must cover all graph-op kinds"
    sets_checked = 0
    for k in range(1, 5):
        for combo in itertools.combinations(pool, k):
            ok, witness = exhaustive_interleavings(list(combo))
            assert ok, f"divergent orders: {witness}"
            sets_checked += 1

    divergences = 0
    for seed in range(100):
        script = fuzz_script(clients=3, ops_per_client=17, seed=seed)
        schedule = Schedule(seed=seed, reorder=True, duplicate_prob=0.05)
        result = run_simulation(script, schedule)  # raises on divergence
        assert len(set(result.fingerprints.values())) == 1
        views = list(result.views.values())
        assert all(v == views[0] for v in views)
    report(f"[2] SEC safety: {sets_checked} op sets (every <=4-op draw, all "
           f"permutations, 10 op kinds) + 100 seeds x 3 clients x ~50 ops: "
           f"0 divergences")


# -- 3. add/remove commutativity identity ------------------------------------


def test_commutativity_identity_10k():
    rng = random.Random(2024)
    for i in range(10_000):
        v = f"v{rng.randrange(50)}"
        t = Stamp(rng.randrange(1_000), rng.choice(REPLICAS))
        t2 = Stamp(rng.randrange(1_000), rng.choice(REPLICAS))
        left, right = LWWSet(), LWWSet()
        left.add(v, t)
        left.remove(v, t2)
        right.remove(v, t2)
        right.add(v, t)
        assert left == right, (v, t, t2)
    report("[3] add(v,t) o remove(v,t') == remove(v,t') o add(v,t) for "
           "10,000 randomized triples (exact state equality)")


# -- 4. map update decomposition ----------------------------------------------


def test_map_update_decomposition():
    rng = random.Random(7)
    for i in range(2_000):
        key = f"k{rng.randrange(6)}"
        base = LWWMap()
        for _ in range(rng.randrange(4)):
            base.add(f"k{rng.randrange(6)}", f"v{rng.randrange(9)}",
                     Stamp(rng.randrange(100), rng.choice(REPLICAS)))
        manual = LWWMap()
        manual.merge_entries(base)
        assert manual == base
        new_value = f"v{rng.randrange(9)}"
        at = Stamp(rng.randrange(100, 200), rng.choice(REPLICAS))

        base.update(key, new_value, at)
        if manual.lookup(key):
            manual.remove(key, at.minus_epsilon(), manual.query(key))
        manual.add(key, new_value, at)
        assert base == manual
    report("[4] map update == add(t') o remove((k,v), t'-1ns) for 2,000 "
           "randomized cases (exact state equality)")


# -- 5. scenarios 1-4 end to end ----------------------------------------------


class EditorClient:
    """A real socket client driven through the editor verb layer."""

    def __init__(self, addr):
        self.client = SocketClient(addr)
        self.client.connect()

    def do(self, line: str):
        verb = parse_verb(line)
        cmd = translate(verb, self.client.model)
        return self.client.submit(cmd)

    @property
    def model(self):
        return self.client.model

    def read(self) -> str:
        return render_read(self.client.model)

    def violations(self):
        return conformance.check_conformance(self.client.model)


def converge(a: EditorClient, b: EditorClient, timeout=10.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        a.client.poll()
        b.client.poll()
        if a.model.graph.fingerprint() == b.model.graph.fingerprint():
            return
        time.sleep(0.01)
    raise AssertionError("clients did not converge")


def test_scenarios_end_to_end():
    server = ServerThread()
    try:
        a = EditorClient(server.addr)
        b = EditorClient(server.addr)
        bootstrap_mindmap_metamodel(a.client.submit, a.model)
        converge(a, b)

        # Scenario 1: cooperation. A creates, B retitles.
        a.do("CREATE MindMap mindmap_0")
        converge(a, b)
        b.do("UPDATE mindmap_0 title todolist")
        converge(a, b)
        for c in (a, b):
            el = c.model.find("mindmap_0")
            assert dict(el.attributes)["title"] == "todolist"
        assert a.read() == b.read()

        # Scenario 2: tolerated inconsistency, then repair.
        a.do("CREATE CentralTopic tasks")
        converge(a, b)
        v_a, v_b = a.violations(), b.violations()
        assert len(v_a) == len(v_b) == 1
        assert v_a[0].kind is conformance.ViolationKind.MULTIPLICITY
        b.do("LINK mindmap_0.topic TO tasks")
        converge(a, b)
        assert a.violations() == [] and b.violations() == []
        assert a.read() == b.read()

        # Scenario 3: conflict. B deletes while A (not yet having seen the
        # delete) links into the same element; the newer link revives it.
        b.do("DELETE tasks")
        assert b.model.find("tasks") is None
        a.do("CREATE MainTopic todos")
        a.do("LINK tasks.mainTopics TO todos")
        converge(a, b)
        for c in (a, b):
            assert c.model.find("tasks") is not None, "vertex revival failed"
            assert c.model.find("todos") is not None
        assert a.read() == b.read()

        # Scenario 4: multi-level cooperation and the potency chain.
        a.do("CREATE Marker marker_0")
        converge(a, b)
        b.do("UPDATE Marker potency 2")
        converge(a, b)
        a.do("CREATE Marker TextMarker")
        a.do("UPDATE marker_0 typedBy TextMarker")
        a.do("CREATE TextMarker marker_1")
        converge(a, b)
        for c in (a, b):
            assert c.model.find("Marker").potency == 2
            assert c.model.find("TextMarker").potency == 1
            assert c.model.find("marker_1").potency == 0
        with pytest.raises(PotencyExhausted):
            a.do("CREATE marker_1 beyond")
        assert a.read() == b.read()

        a.client.close()
        b.client.close()
    finally:
        server.stop()
    report("[5] scenarios 1-4 through a real server + two real clients: "
           "byte-identical READ at every stage, vertex revival, potency "
           "chain 2 -> 1 -> 0 with exhaustion at 0")


# -- 6. snapshot correctness ---------------------------------------------------


def test_snapshot_late_joiner_50_seeds():
    mismatches = 0
    for seed in range(50):
        rng = random.Random(1000 + seed)
        script = fuzz_script(clients=3, ops_per_client=167, seed=seed)
        last = max(line.vtime_ns for line in script)
        join_at = rng.randrange(last // 10, last)
        result = run_simulation(
            script, Schedule(seed=seed, reorder=True),
            joins={"late_joiner": join_at}, minimize=False)
        if len(set(result.fingerprints.values())) != 1:
            mismatches += 1
        late_view = result.views["late_joiner"]
        if any(late_view != v for v in result.views.values()):
            mismatches += 1
    assert mismatches == 0
    report("[6] snapshot correctness: late joiner at a random point of a "
           "500-op fuzz run converges, 50 seeds, 0 mismatches")


# -- 7. no dangling edges, checked inline --------------------------------------


def test_no_dangling_edges_inline():
    # The simulator asserts the invariant after every local apply and
    # every delivered frame (Schedule.check_invariants); a violation
    # raises DanglingEdgeDetected and would fail the run here.
    for seed in range(20):
        script = fuzz_script(clients=3, ops_per_client=30, seed=700 + seed)
        schedule = Schedule(seed=seed, reorder=True, duplicate_prob=0.1,
                            check_invariants=True)
        result = run_simulation(script, schedule, minimize=False)
        assert result.history_len > 0
    report("[7] no-dangling-edge invariant held at every step of every "
           "fuzz run (inline checks enabled)")


# -- 8. degradation guard -------------------------------------------------------


def test_degradation_guard():
    rows = measure_degradation([1000, 4000], probe_ops=400)
    latency_1k = rows[0][1]
    latency_4k = rows[1][1]
    ratio = latency_4k / latency_1k
    assert ratio <= 4.0, f"apply latency grew {ratio:.2f}x from 1k to 4k ops"
    report(f"[8] degradation guard: mean apply latency at 4k ops is "
           f"{ratio:.2f}x the 1k latency (threshold 4x)")
