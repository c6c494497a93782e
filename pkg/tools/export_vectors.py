"""Export frame-level conformance vectors for alternative client
implementations (the browser editor).

Each vector is a list of raw update-frame lines plus the observable
snapshot a replica must reach after applying them in the given order.
Frames are produced the same way a live client produces them (local apply
on an issuing replica, canonical id-resolved serialization), then composed
into delivery sequences including races, duplication and reordering.

Usage: python3 tools/export_vectors.py [output.json]
"""

from __future__ import annotations

import json
import random
import sys
import uuid
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from comodel import commands, wire
from comodel.commands import Origin, parse
from comodel.crdt import Stamp
from comodel.editor import _BOOTSTRAP
from comodel.model import PhysicalModel

DEFAULT_OUT = Path(__file__).resolve().parent.parent / "frontend" / "test" / \
    "vectors" / "conformance.json"


def snapshot(model: PhysicalModel) -> dict:
    """Observable state in a language-neutral shape (sorted, reserved keys
    included verbatim)."""
    vertices = []
    for v in model.graph.live_vertices():
        entries = sorted((k, v2 or "") for k, v2 in v.live_items().items())
        vertices.append([str(v.id), entries])
    edges = []
    for e in model.graph.live_edges():
        entries = sorted((k, v2 or "") for k, v2 in e.live_items().items()
                         if k not in ("~source", "~target"))
        edges.append([str(e.id), str(e.source()), str(e.target()), entries])
    return {"vertices": sorted(vertices), "edges": sorted(edges)}


class MiniNet:
    """Issuing replicas over an in-memory frame log, so races are
    constructed exactly (an issuer only sees what it synced)."""

    def __init__(self):
        self.frames: list[str] = []
        self.clients: dict[str, PhysicalModel] = {}
        self.ids: dict[str, uuid.UUID] = {}
        self.seen: dict[str, int] = {}

    def _client(self, name: str) -> PhysicalModel:
        if name not in self.clients:
            self.clients[name] = PhysicalModel()
            self.ids[name] = uuid.uuid5(uuid.NAMESPACE_URL, f"comodel/vec/{name}")
            self.seen[name] = 0
        return self.clients[name]

    def sync(self, name: str) -> None:
        model = self._client(name)
        for line in self.frames[self.seen[name]:]:
            frame = wire.decode(line)
            if frame.client_id != self.ids[name]:
                commands.apply(parse(frame.command), model, frame.stamp,
                               origin=Origin.REMOTE)
        self.seen[name] = len(self.frames)

    def issue(self, name: str, nanos: int, text: str) -> str:
        model = self._client(name)
        stamp = Stamp(nanos, self.ids[name])
        report = commands.apply(parse(text), model, stamp)
        assert report.recorded, f"{text!r} -> {report.error_kind} {report.detail}"
        line = wire.encode(wire.UpdateFrame(
            self.ids[name], stamp, commands.serialize(report.effective)))
        self.frames.append(line)
        return line


def expected_after(frames: list[str]) -> dict:
    model = PhysicalModel()
    for line in frames:
        frame = wire.decode(line)
        commands.apply(parse(frame.command), model, frame.stamp,
                       origin=Origin.REMOTE)
    return snapshot(model)


def vector(name: str, frames: list[str]) -> dict:
    return {"name": name, "frames": frames, "expected": expected_after(frames)}


def build_vectors() -> list[dict]:
    vectors = []

    def simple(name: str, script: list[tuple[str, int, str]],
               order=None, duplicate=False):
        net = MiniNet()
        frames = []
        for client, nanos, text in script:
            net.sync(client)
            frames.append(net.issue(client, nanos, text))
        if order is not None:
            frames = [frames[i] for i in order]
        if duplicate:
            frames = [f for frame in frames for f in (frame, frame)]
        vectors.append(vector(name, frames))

    # -- creation ---------------------------------------------------------
    simple("create_plain", [("a", 10, "CREATE -name box")])
    simple("create_typed", [("a", 10, "CREATE -name m0 -typedBy MindMap")])
    simple("create_attrs", [
        ("a", 10, "CREATE -name m0 -typedBy MindMap -title m0 -color red")])
    simple("create_potency", [("a", 10, "CREATE -name Marker -potency 2")])
    simple("create_quoted", [
        ("a", 10, 'CREATE -name note -text "Improve publication record"'),
        ("a", 20, 'UPDATE -name note -text "line\\nbreak and \\"quote\\""')])
    simple("create_two_disconnected", [
        ("a", 10, "CREATE -name m0"), ("a", 20, "CREATE -name tasks")])

    # -- updates ----------------------------------------------------------
    simple("update_attr", [
        ("a", 10, "CREATE -name m0 -title m0"),
        ("b", 20, "UPDATE -name m0 -title todolist")])
    simple("update_multiple_attrs", [
        ("a", 10, "CREATE -name m0"),
        ("a", 20, "UPDATE -name m0 -x 1 -y 2 -x 3")])
    simple("update_potency", [
        ("a", 10, "CREATE -name Marker -potency 1"),
        ("b", 20, "UPDATE -name Marker -potency 2")])
    simple("update_retype", [
        ("a", 10, "CREATE -name T1"), ("a", 20, "CREATE -name T2"),
        ("a", 30, "CREATE -name i -typedBy T1"),
        ("a", 40, "UPDATE -name i -typedBy T2")])
    simple("update_same_stamp_tie", [
        ("a", 10, "CREATE -name m0 -title start"),
        ("a", 30, "UPDATE -name m0 -title mine"),
        ("b", 30, "UPDATE -name m0 -title yours")])

    # -- linking ----------------------------------------------------------
    simple("link_auto_name", [
        ("a", 10, "CREATE -name m0"), ("a", 20, "CREATE -name tasks"),
        ("a", 30, "LINK -from m0.topic -to tasks")])
    simple("link_declared_composition", [
        ("a", 10, "CREATE -name MindMap -potency 1"),
        ("a", 20, "CREATE -name CentralTopic -potency 1"),
        ("a", 30, "LINK -name topic -from MindMap.Composition -to CentralTopic "
                  "-lower 1 -upper 1"),
        ("a", 40, "CREATE -name m0 -typedBy MindMap -potency 0"),
        ("a", 50, "CREATE -name tasks -typedBy CentralTopic -potency 0"),
        ("a", 60, "LINK -from m0.topic -to tasks")])
    simple("link_multigraph", [
        ("a", 10, "CREATE -name v"), ("a", 20, "CREATE -name w"),
        ("a", 30, "LINK -from v.r -to w"),
        ("a", 40, "LINK -from v.r -to w")])
    simple("link_self_loop", [
        ("a", 10, "CREATE -name v"), ("a", 20, "LINK -from v.next -to v")])
    simple("link_attrs", [
        ("a", 10, "CREATE -name v"), ("a", 20, "CREATE -name w"),
        ("a", 30, "LINK -from v.r -to w -weight 5")])

    # -- deletion ---------------------------------------------------------
    simple("delete_vertex_cascades", [
        ("a", 10, "CREATE -name v"), ("a", 20, "CREATE -name w"),
        ("a", 30, "LINK -from v.r -to w"), ("a", 40, "DELETE -name v")])
    simple("delete_edge_only", [
        ("a", 10, "CREATE -name v"), ("a", 20, "CREATE -name w"),
        ("a", 30, "LINK -from v.r -to w"), ("a", 40, "DELETE -name r_0")])
    simple("delete_then_reuse_name", [
        ("a", 10, "CREATE -name x -tag one"), ("a", 20, "DELETE -name x"),
        ("a", 30, "CREATE -name x -tag two")])

    # -- races (issuers act without syncing) -------------------------------
    def race(name: str, setup, moves, orders):
        base = MiniNet()
        setup_frames = []
        for client, nanos, text in setup:
            base.sync(client)
            setup_frames.append(base.issue(client, nanos, text))
        for client in {c for c, _, _ in setup} | {c for c, _, _ in moves}:
            base.sync(client)
        race_frames = [base.issue(c, n, t) for c, n, t in moves]
        for i, order in enumerate(orders):
            frames = setup_frames + [race_frames[j] for j in order]
            vectors.append(vector(f"{name}_order{i}", frames))

    race("race_delete_vs_newer_link",
         setup=[("a", 10, "CREATE -name hub"), ("a", 20, "CREATE -name tasks")],
         moves=[("b", 30, "DELETE -name tasks"),
                ("a", 40, "CREATE -name todos"),
                ("a", 50, "LINK -from tasks.holds -to todos")],
         orders=[(0, 1, 2), (1, 2, 0), (2, 1, 0)])
    race("race_delete_vs_older_link",
         setup=[("a", 10, "CREATE -name hub"), ("a", 20, "CREATE -name tasks")],
         moves=[("a", 30, "LINK -from hub.r -to tasks"),
                ("b", 40, "DELETE -name tasks")],
         orders=[(0, 1), (1, 0)])
    race("race_concurrent_updates",
         setup=[("a", 10, "CREATE -name m0 -title start")],
         moves=[("a", 30, "UPDATE -name m0 -title mine"),
                ("b", 40, "UPDATE -name m0 -title yours")],
         orders=[(0, 1), (1, 0)])
    race("race_concurrent_creates_same_name",
         setup=[],
         moves=[("a", 30, "CREATE -name shared -tag a"),
                ("b", 40, "CREATE -name shared -tag b")],
         orders=[(0, 1), (1, 0)])
    race("race_update_after_foreign_delete",
         setup=[("a", 10, "CREATE -name m0 -title t")],
         moves=[("b", 30, "DELETE -name m0"),
                ("a", 40, "UPDATE -name m0 -title late")],
         orders=[(0, 1), (1, 0)])

    # -- delivery effects ---------------------------------------------------
    simple("duplicated_delivery", [
        ("a", 10, "CREATE -name m0 -title m0"),
        ("b", 20, "UPDATE -name m0 -title todolist"),
        ("a", 30, "CREATE -name other")], duplicate=True)
    simple("reorder_link_before_creates", [
        ("a", 10, "CREATE -name v"), ("a", 20, "CREATE -name w"),
        ("a", 30, "LINK -from v.r -to w")], order=[2, 0, 1])
    simple("reorder_delete_before_create", [
        ("a", 10, "CREATE -name v"), ("b", 20, "DELETE -name v")],
        order=[1, 0])
    simple("reorder_full_reverse", [
        ("a", 10, "CREATE -name v -x 1"), ("a", 20, "CREATE -name w"),
        ("a", 30, "LINK -from v.r -to w"),
        ("a", 40, "UPDATE -name v -x 2"),
        ("a", 50, "DELETE -name w")], order=[4, 3, 2, 1, 0])

    # -- the paper scenarios -------------------------------------------------
    net = MiniNet()
    boot = []
    for i, cmd in enumerate(_BOOTSTRAP, start=1):
        net.sync("a")
        report = commands.apply(cmd, net.clients["a"], Stamp(i * 10, net.ids["a"]))
        line = wire.encode(wire.UpdateFrame(
            net.ids["a"], Stamp(i * 10, net.ids["a"]),
            commands.serialize(report.effective)))
        net.frames.append(line)
        boot.append(line)
    net.sync("a")
    net.sync("b")
    s1 = [net.issue("a", 200, "CREATE -name mindmap_0 -typedBy MindMap "
                              "-potency 0 -title mindmap_0")]
    net.sync("b")
    s1.append(net.issue("b", 210, "UPDATE -name mindmap_0 -title todolist"))
    vectors.append(vector("scenario1_cooperation", boot + s1))
    net.sync("a")
    s2 = [net.issue("a", 220, "CREATE -name tasks -typedBy CentralTopic "
                              "-potency 0")]
    net.sync("b")
    s2.append(net.issue("b", 230, "LINK -from mindmap_0.topic -to tasks"))
    vectors.append(vector("scenario2_tolerated_inconsistency", boot + s1 + s2))
    net.sync("a")
    net.sync("b")
    s3 = [net.issue("b", 240, "DELETE -name tasks"),
          net.issue("a", 250, "CREATE -name todos -typedBy MainTopic -potency 0"),
          net.issue("a", 260, "LINK -from tasks.mainTopics -to todos")]
    vectors.append(vector("scenario3_conflict_revival", boot + s1 + s2 + s3))
    vectors.append(vector("scenario3_swapped_delivery",
                          boot + s1 + s2 + [s3[1], s3[2], s3[0]]))
    net.sync("a")
    net.sync("b")
    s4 = [net.issue("a", 270, "CREATE -name marker_0 -typedBy Marker -potency 0 "
                              "-symbol marker_0"),
          net.issue("b", 280, "UPDATE -name Marker -potency 2")]
    net.sync("a")
    s4 += [net.issue("a", 290, "CREATE -name TextMarker -typedBy Marker "
                               "-potency 1 -symbol TextMarker"),
           net.issue("a", 300, "UPDATE -name marker_0 -typedBy TextMarker"),
           net.issue("a", 310, "CREATE -name marker_1 -typedBy TextMarker "
                               "-potency 0 -symbol marker_1")]
    vectors.append(vector("scenario4_multilevel", boot + s1 + s2 + s3 + s4))

    # -- randomized sequences with shuffled delivery -------------------------
    for seed in range(12):
        rng = random.Random(1_000 + seed)
        net = MiniNet()
        clients = ["a", "b", "c"]
        names = []
        nanos = 100
        for step in range(rng.randint(6, 12)):
            client = rng.choice(clients)
            nanos += rng.randint(1, 20)
            if rng.random() < 0.5:
                net.sync(client)
            model = net._client(client)
            roll = rng.random()
            try:
                if roll < 0.45 or not names:
                    name = f"e{seed}_{step}"
                    net.issue(client, nanos,
                              f"CREATE -name {name} -typedBy T{rng.randrange(3)} "
                              f"-w {rng.randrange(9)}")
                    names.append(name)
                elif roll < 0.65:
                    net.issue(client, nanos,
                              f"LINK -from {rng.choice(names)}.p{rng.randrange(2)} "
                              f"-to {rng.choice(names)}")
                elif roll < 0.85:
                    net.issue(client, nanos,
                              f"UPDATE -name {rng.choice(names)} "
                              f"-w {rng.randrange(9)}")
                else:
                    net.issue(client, nanos, f"DELETE -name {rng.choice(names)}")
            except AssertionError:
                continue  # issuer could not resolve the name; skip the move
        frames = list(net.frames)
        rng.shuffle(frames)
        if rng.random() < 0.4 and frames:
            frames.insert(rng.randrange(len(frames)), rng.choice(frames))
        vectors.append(vector(f"random_{seed:02d}", frames))

    return vectors


def main(argv: list[str]) -> int:
    out = Path(argv[1]) if len(argv) > 1 else DEFAULT_OUT
    vectors = build_vectors()
    names = [v["name"] for v in vectors]
    assert len(names) == len(set(names))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(
        {"element_namespace": "a6f94e99-2ff2-56a3-9c8c-4d1179d96a80",
         "vectors": vectors}, indent=1))
    print(f"wrote {len(vectors)} vectors to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
