"""Operation-based last-writer-wins replicated data types.

The family covers a single-value register, an add/remove set, a keyed map
with value history, and a directed multigraph whose vertices and edges are
themselves maps. Every mutation is an unconditional union into an add- or
remove-set keyed by a globally ordered stamp, so applying the same set of
stamped operations in any order produces the same observable state.

Removals are soft: tombstones accumulate and are never purged here.

Concurrency contract: one replica has a single logical writer. All
mutations (local edits and remote merges) must be applied from one thread
at a time; reads are safe whenever no mutation is in flight.
"""

from __future__ import annotations

import enum
import uuid
from dataclasses import dataclass


class UnknownVertex(KeyError):
    """Raised when a vertex id was never introduced to the graph."""


class UnknownEdge(KeyError):
    """Raised when an edge id was never introduced to the graph."""


class Outcome(enum.Enum):
    """Advisory result of a mutation. Never part of replicated state."""

    APPLIED = "applied"
    NOP = "nop"
    REJECTED = "rejected"


@dataclass(frozen=True, order=True)
class Stamp:
    """Globally ordered timestamp: nanoseconds plus a replica tie-breaker.

    Comparison is lexicographic on (nanos, replica), which yields a strict
    total order: raw nanosecond clocks can collide across replicas, the
    replica UUID cannot.
    """

    nanos: int
    replica: uuid.UUID

    EPSILON_NS = 1

    def minus_epsilon(self) -> Stamp:
        # Saturates at zero; the replica component keeps the order strict.
        return Stamp(max(self.nanos - self.EPSILON_NS, 0), self.replica)

    def __str__(self) -> str:
        return f"{self.nanos}@{self.replica}"


class LWWRegister:
    """Single value with a stamp; newer stamps overwrite, older ones are NOPs."""

    def __init__(self, value, stamp: Stamp):
        self.value = value
        self.stamp = stamp

    def update(self, value, stamp: Stamp) -> Outcome:
        if stamp > self.stamp:
            self.value = value
            self.stamp = stamp
            return Outcome.APPLIED
        return Outcome.NOP

    def __repr__(self) -> str:
        return f"LWWRegister({self.value!r}, {self.stamp})"


class LWWSet:
    """Add/remove set with per-value max-stamp coalescing.

    A value is present when its add stamp is at least its remove stamp;
    on an exact tie the add wins (present). Superseded stamps per value
    carry no observable information and are dropped; tombstoned values
    themselves are kept forever.
    """

    def __init__(self):
        self._adds: dict = {}
        self._removes: dict = {}

    def add(self, value, stamp: Stamp) -> None:
        cur = self._adds.get(value)
        if cur is None or stamp > cur:
            self._adds[value] = stamp

    def remove(self, value, stamp: Stamp) -> None:
        cur = self._removes.get(value)
        if cur is None or stamp > cur:
            self._removes[value] = stamp

    def lookup(self, value) -> bool:
        added = self._adds.get(value)
        if added is None:
            return False
        removed = self._removes.get(value)
        return removed is None or removed <= added

    def live(self) -> set:
        return {v for v in self._adds if self.lookup(v)}

    def add_stamp(self, value) -> Stamp | None:
        return self._adds.get(value)

    def remove_stamp(self, value) -> Stamp | None:
        return self._removes.get(value)

    def known(self, value) -> bool:
        return value in self._adds or value in self._removes

    def removed_values(self) -> set:
        """History inspection: every value that ever received a tombstone."""
        return set(self._removes)

    def state(self):
        return (dict(self._adds), dict(self._removes))

    def __eq__(self, other) -> bool:
        return isinstance(other, LWWSet) and self.state() == other.state()

    def __contains__(self, value) -> bool:
        return self.lookup(value)


@dataclass(frozen=True)
class MapEntry:
    """One stamped key entry. Newest-entry selection orders by
    (stamp, value) so it stays deterministic even under constructed stamp
    collisions; a None value sorts below any string."""

    stamp: Stamp
    value: str | None

    def order_key(self):
        return (self.stamp, self.value is not None, self.value or "")


class LWWMap:
    """Keyed LWW store retaining full value history per key.

    Presence of a key follows the set rule on the key's newest add and
    remove stamps. A key's current value is the value of its newest add
    entry. Updates tombstone the previous value one epsilon below the new
    stamp, so history inspection can recover superseded values.
    """

    _UNSET = object()

    def __init__(self):
        self._adds: dict[str, set[MapEntry]] = {}
        self._removes: dict[str, set[MapEntry]] = {}
        self._add_max: dict[str, MapEntry] = {}
        self._remove_max: dict[str, MapEntry] = {}

    def add(self, key: str, value: str | None, stamp: Stamp) -> None:
        entry = MapEntry(stamp, value)
        self._adds.setdefault(key, set()).add(entry)
        cur = self._add_max.get(key)
        if cur is None or entry.order_key() > cur.order_key():
            self._add_max[key] = entry

    def remove(self, key: str, stamp: Stamp, value=_UNSET) -> None:
        if value is LWWMap._UNSET:
            value = self.query(key)
        entry = MapEntry(stamp, value)
        self._removes.setdefault(key, set()).add(entry)
        cur = self._remove_max.get(key)
        if cur is None or entry.order_key() > cur.order_key():
            self._remove_max[key] = entry

    def update(self, key: str, value: str | None, stamp: Stamp) -> None:
        """Replace the value under key: tombstone the live entry at
        stamp - epsilon, then add the new value at stamp. On an absent
        key this degenerates to a plain add."""
        if self.lookup(key):
            self.remove(key, stamp.minus_epsilon(), self.query(key))
        self.add(key, value, stamp)

    def lookup(self, key: str) -> bool:
        added = self._add_max.get(key)
        if added is None:
            return False
        removed = self._remove_max.get(key)
        return removed is None or removed.stamp <= added.stamp

    def query(self, key: str) -> str | None:
        if not self.lookup(key):
            return None
        return self._add_max[key].value

    def query_stamp(self, key: str) -> Stamp | None:
        if not self.lookup(key):
            return None
        return self._add_max[key].stamp

    def live_keys(self) -> set[str]:
        return {k for k in self._adds if self.lookup(k)}

    def live_items(self) -> dict[str, str | None]:
        return {k: self._add_max[k].value for k in self.live_keys()}

    # History inspection, used by soft-delete tests and debugging views.

    def added_entries(self, key: str) -> set[MapEntry]:
        return set(self._adds.get(key, ()))

    def removed_entries(self, key: str) -> set[MapEntry]:
        return set(self._removes.get(key, ()))

    def tombstone_count(self) -> int:
        return sum(len(s) for s in self._removes.values())

    def merge_entries(self, other: LWWMap) -> None:
        """Union another map's history into this one (same logical object
        observed through a different delivery order)."""
        for key, entries in other._adds.items():
            for e in entries:
                self.add(key, e.value, e.stamp)
        for key, entries in other._removes.items():
            for e in entries:
                self.remove(key, e.stamp, e.value)

    def map_state(self):
        return (
            {k: frozenset(v) for k, v in self._adds.items()},
            {k: frozenset(v) for k, v in self._removes.items()},
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, LWWMap) and self.map_state() == other.map_state()


SOURCE_KEY = "~source"
TARGET_KEY = "~target"


class LWWVertex(LWWMap):
    """Graph vertex: an LWWMap with a stable identity."""

    def __init__(self, vertex_id: uuid.UUID):
        super().__init__()
        self.id = vertex_id

    def __repr__(self) -> str:
        return f"LWWVertex({self.id})"


class LWWEdge(LWWMap):
    """Directed edge: an LWWMap holding its endpoints under reserved keys."""

    def __init__(self, edge_id: uuid.UUID, source: uuid.UUID | None = None,
                 target: uuid.UUID | None = None, stamp: Stamp | None = None):
        super().__init__()
        self.id = edge_id
        if source is not None and target is not None:
            assert stamp is not None
            self.add(SOURCE_KEY, str(source), stamp)
            self.add(TARGET_KEY, str(target), stamp)

    def source(self) -> uuid.UUID | None:
        raw = self.query(SOURCE_KEY)
        return uuid.UUID(raw) if raw else None

    def target(self) -> uuid.UUID | None:
        raw = self.query(TARGET_KEY)
        return uuid.UUID(raw) if raw else None

    def __repr__(self) -> str:
        return f"LWWEdge({self.id}, {self.source()}->{self.target()})"


class LWWGraph(LWWMap):
    """Directed multigraph over LWW sets, itself carrying an attribute map.

    Vertex presence is the plain set rule over the vertex add/remove sets.
    Adding an edge also (re-)adds both endpoint ids at the edge's stamp,
    which materializes endpoint revival: an edge stamped newer than a
    vertex removal brings the vertex back, on every replica, in every
    delivery order. An edge is live when its own set entry is live and its
    newest add stamp beats each endpoint's newest removal; together with
    the materialized endpoint adds this makes a live edge's endpoints
    provably live, so no live edge ever dangles.

    Removals never check preconditions against the current state; the
    Applied/Rejected outcome of vertex removal is advisory only.
    """

    def __init__(self):
        super().__init__()
        self._vertices: dict[uuid.UUID, LWWVertex] = {}
        self._edges: dict[uuid.UUID, LWWEdge] = {}
        self._vset = LWWSet()
        self._eset = LWWSet()
        self._incidence: dict[uuid.UUID, set[uuid.UUID]] = {}

    # -- vertices ----------------------------------------------------

    def add_vertex(self, vertex: LWWVertex, stamp: Stamp) -> LWWVertex:
        existing = self._vertices.get(vertex.id)
        if existing is None:
            self._vertices[vertex.id] = vertex
            existing = vertex
        elif existing is not vertex:
            existing.merge_entries(vertex)
        self._vset.add(vertex.id, stamp)
        return existing

    def ensure_vertex(self, vertex_id: uuid.UUID) -> LWWVertex:
        """Register a placeholder for an id referenced before its own add
        arrives (remote reordering)."""
        v = self._vertices.get(vertex_id)
        if v is None:
            v = LWWVertex(vertex_id)
            self._vertices[vertex_id] = v
        return v

    def remove_vertex(self, vertex_id: uuid.UUID, stamp: Stamp,
                      strict: bool = True) -> Outcome:
        """Record a removal tombstone for the vertex.

        The tombstone is recorded unconditionally; last-writer-wins decides
        whether it takes effect (a live incident edge with a newer stamp
        keeps the vertex alive). The outcome reports whether the removal
        respected the no-dangling precondition: any live incident edge at
        apply time yields REJECTED.
        """
        if not self._known_vertex(vertex_id):
            if strict:
                raise UnknownVertex(vertex_id)
            self.ensure_vertex(vertex_id)
        had_live_edge = any(True for _ in self._live_incident(vertex_id))
        self._vset.remove(vertex_id, stamp)
        return Outcome.REJECTED if had_live_edge else Outcome.APPLIED

    def cascade_remove_vertex(self, vertex_id: uuid.UUID, stamp: Stamp,
                              strict: bool = True) -> None:
        """Tombstone every live incident edge at this stamp, then the vertex."""
        if not self._known_vertex(vertex_id):
            if strict:
                raise UnknownVertex(vertex_id)
            self.ensure_vertex(vertex_id)
        for edge in list(self._live_incident(vertex_id)):
            self._eset.remove(edge.id, stamp)
        self._vset.remove(vertex_id, stamp)

    def vertex(self, vertex_id: uuid.UUID) -> LWWVertex:
        v = self._vertices.get(vertex_id)
        if v is None:
            raise UnknownVertex(vertex_id)
        return v

    def vertex_live(self, vertex_id: uuid.UUID) -> bool:
        return self._vset.lookup(vertex_id)

    def live_vertices(self) -> list[LWWVertex]:
        return [self._vertices[i] for i in self._vset.live()]

    # -- edges -------------------------------------------------------

    def add_edge(self, edge: LWWEdge, stamp: Stamp, strict: bool = True) -> LWWEdge:
        """Add the edge and re-add both endpoints at the same stamp.

        With strict=True (local edits) both endpoint ids must already be
        known, live or tombstoned; remote merges pass strict=False and
        auto-register placeholders so reordered deliveries still converge.
        """
        src, tgt = edge.source(), edge.target()
        if src is None or tgt is None:
            raise ValueError("edge requires source and target entries")
        for endpoint in (src, tgt):
            if not self._known_vertex(endpoint):
                if strict:
                    raise UnknownVertex(endpoint)
                self.ensure_vertex(endpoint)
        existing = self._edges.get(edge.id)
        if existing is None:
            self._edges[edge.id] = edge
            existing = edge
        elif existing is not edge:
            existing.merge_entries(edge)
        self._eset.add(edge.id, stamp)
        self._incidence.setdefault(src, set()).add(edge.id)
        self._incidence.setdefault(tgt, set()).add(edge.id)
        # Endpoint revival: the edge asserts its endpoints exist at least
        # as recently as the edge itself.
        self._vset.add(src, stamp)
        self._vset.add(tgt, stamp)
        return existing

    def ensure_edge(self, edge_id: uuid.UUID) -> LWWEdge:
        """Register a stub for an edge id referenced before its own add
        arrives; never live until a real add fills it in."""
        e = self._edges.get(edge_id)
        if e is None:
            e = LWWEdge(edge_id)
            self._edges[edge_id] = e
        return e

    def remove_edge(self, edge_id: uuid.UUID, stamp: Stamp,
                    strict: bool = True) -> None:
        if edge_id not in self._edges:
            if strict:
                raise UnknownEdge(edge_id)
            self.ensure_edge(edge_id)
        self._eset.remove(edge_id, stamp)

    def edge(self, edge_id: uuid.UUID) -> LWWEdge:
        e = self._edges.get(edge_id)
        if e is None:
            raise UnknownEdge(edge_id)
        return e

    def edge_live(self, edge_id: uuid.UUID) -> bool:
        if not self._eset.lookup(edge_id):
            return False
        edge = self._edges[edge_id]
        src, tgt = edge.source(), edge.target()
        if src is None or tgt is None:
            return False
        added = self._eset.add_stamp(edge_id)
        for endpoint in (src, tgt):
            removed = self._vset.remove_stamp(endpoint)
            if removed is not None and added <= removed:
                return False
        return True

    def live_edges(self) -> list[LWWEdge]:
        return [self._edges[i] for i in self._eset.live() if self.edge_live(i)]

    def edge_endpoints(self, edge_id: uuid.UUID) -> tuple[uuid.UUID | None, uuid.UUID | None]:
        e = self.edge(edge_id)
        return e.source(), e.target()

    def incident_edges(self, vertex_id: uuid.UUID, direction: str = "both") -> list[LWWEdge]:
        """Live edges touching the vertex; direction is 'in', 'out' or 'both'."""
        if not self._known_vertex(vertex_id):
            raise UnknownVertex(vertex_id)
        if direction not in ("in", "out", "both"):
            raise ValueError(f"bad direction: {direction!r}")
        out = []
        for eid in self._incidence.get(vertex_id, ()):
            if not self.edge_live(eid):
                continue
            e = self._edges[eid]
            if direction == "out" and e.source() != vertex_id:
                continue
            if direction == "in" and e.target() != vertex_id:
                continue
            out.append(e)
        return out

    # -- internals ---------------------------------------------------

    def _known_vertex(self, vertex_id: uuid.UUID) -> bool:
        return vertex_id in self._vertices

    def _live_incident(self, vertex_id: uuid.UUID):
        for eid in self._incidence.get(vertex_id, ()):
            if self.edge_live(eid):
                yield self._edges[eid]

    def fingerprint(self):
        """Canonical observable state: everything lookup/query/graph
        queries can distinguish. Two replicas converged iff equal."""
        verts = tuple(sorted(
            (str(v.id), tuple(sorted(v.live_items().items())))
            for v in self.live_vertices()
        ))
        edges = tuple(sorted(
            (str(e.id), str(e.source()), str(e.target()),
             tuple(sorted(e.live_items().items())))
            for e in self.live_edges()
        ))
        own = tuple(sorted(self.live_items().items()))
        return (verts, edges, own)

    def dangling_live_edges(self) -> list[LWWEdge]:
        """Invariant probe: live edges with a non-live endpoint (must be empty)."""
        bad = []
        for e in self.live_edges():
            if not (self.vertex_live(e.source()) and self.vertex_live(e.target())):
                bad.append(e)
        return bad
