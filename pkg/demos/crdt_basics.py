"""A tour of the replicated data types, bottom up.

Run: python3 demos/crdt_basics.py
"""

import uuid

from comodel.crdt import LWWEdge, LWWGraph, LWWMap, LWWRegister, LWWSet, LWWVertex, Stamp

ALICE = uuid.uuid4()
BOB = uuid.uuid4()


def show(title):
    print(f"\n== {title} ==")


# Stamps: nanoseconds plus a replica tie-breaker give a strict total order.
show("stamps")
s1, s2 = Stamp(100, ALICE), Stamp(100, BOB)
print(f"equal nanos, different replicas, still ordered: {s1 < s2 or s2 < s1}")

# Register: the newest stamp wins, delivery order does not matter.
show("register: the classic race")
mine = LWWRegister("10", Stamp(0, ALICE))
yours = LWWRegister("10", Stamp(0, ALICE))
mine.update("15", Stamp(1, ALICE))
mine.update("20", Stamp(2, ALICE))
yours.update("20", Stamp(2, ALICE))   # network swapped the two updates
yours.update("15", Stamp(1, ALICE))
print(f"in order -> {mine.value}, swapped -> {yours.value}")

# Set: removals are tombstones; an add with a newer stamp revives.
show("set: add/remove commute")
s = LWWSet()
s.remove("task", Stamp(5, BOB))       # remove arrives before the add
s.add("task", Stamp(3, ALICE))
print(f"add@3 vs remove@5: present = {s.lookup('task')}")
s.add("task", Stamp(8, ALICE))
print(f"re-added@8:        present = {s.lookup('task')}")

# Map: updates keep the old value around, tombstoned one instant earlier.
show("map: soft-deleting updates")
m = LWWMap()
m.add("title", "mindmap_0", Stamp(3, ALICE))
m.update("title", "todolist", Stamp(8, BOB))
print(f"query          -> {m.query('title')}")
print(f"add history    -> {sorted((e.stamp.nanos, e.value) for e in m.added_entries('title'))}")
print(f"remove history -> {sorted((e.stamp.nanos, e.value) for e in m.removed_entries('title'))}")

# Graph: a newer edge revives a deleted vertex; no live edge ever dangles.
show("graph: delete vs concurrent link")
g = LWWGraph()
v, w = LWWVertex(uuid.uuid4()), LWWVertex(uuid.uuid4())
g.add_vertex(v, Stamp(1, ALICE))
g.add_vertex(w, Stamp(2, ALICE))
g.remove_vertex(v.id, Stamp(10, BOB))
print(f"after remove@10: v live = {g.vertex_live(v.id)}")
e = LWWEdge(uuid.uuid4(), w.id, v.id, Stamp(12, ALICE))
g.add_edge(e, Stamp(12, ALICE))
print(f"after edge@12:   v live = {g.vertex_live(v.id)}, edge live = {g.edge_live(e.id)}")
print(f"dangling live edges: {g.dangling_live_edges()}")
