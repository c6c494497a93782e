"""Level-agnostic model layer: every element, whatever its meta-level,
is a clabject backed by one vertex (or one edge, for associations) of a
shared replicated graph.

Reserved element metadata (name, type, kind, potency, endpoints) lives
under tilde-prefixed map keys so user attributes may reuse those words.
Local edits validate preconditions and raise; remote merges are applied
permissively (placeholders are auto-registered, liveness is not required)
because a frame another replica accepted must take effect here too.
"""

from __future__ import annotations

import enum
import math
import uuid
from dataclasses import dataclass

from .crdt import LWWEdge, LWWGraph, Outcome, Stamp, UnknownVertex

NAME_KEY = "~name"
TYPE_KEY = "~type"
KIND_KEY = "~kind"
POTENCY_KEY = "~potency"
RESERVED_KEYS = {NAME_KEY, TYPE_KEY, KIND_KEY, POTENCY_KEY, "~source", "~target"}

INFINITE = math.inf

ELEMENT_NAMESPACE = uuid.uuid5(uuid.NAMESPACE_URL, "comodel/element")

_ROLE_NIBBLE = {"v": 0x0A, "e": 0x0B}


def mint_element_id(stamp: Stamp, role: str) -> uuid.UUID:
    """Derive the element id from the creating operation's stamp.

    Every replica applying the same stamped operation computes the same
    id, so ids agree across replicas without traveling on the wire. The
    last nibble encodes whether the id names a vertex or an edge, letting
    a reordered delete or update land on the right structure.
    """
    raw = bytearray(
        uuid.uuid5(ELEMENT_NAMESPACE, f"{stamp.replica}:{stamp.nanos}:{role}").bytes)
    raw[15] = (raw[15] & 0xF0) | _ROLE_NIBBLE[role]
    return uuid.UUID(bytes=bytes(raw))


def id_role(element_id: uuid.UUID) -> str:
    nibble = element_id.bytes[15] & 0x0F
    return "e" if nibble == _ROLE_NIBBLE["e"] else "v"


class Kind(enum.Enum):
    NODE = "Node"
    MODEL = "Model"
    CLABJECT = "Clabject"
    ASSOCIATION = "Association"
    COMPOSITION = "Composition"
    AGGREGATION = "Aggregation"
    ATTRIBUTE = "Attribute"


_KIND_PARENT = {
    Kind.MODEL: Kind.NODE,
    Kind.CLABJECT: Kind.NODE,
    Kind.ASSOCIATION: Kind.CLABJECT,
    Kind.COMPOSITION: Kind.ASSOCIATION,
    Kind.AGGREGATION: Kind.ASSOCIATION,
    Kind.ATTRIBUTE: Kind.NODE,
}

KIND_NAMES = {k.value for k in Kind}


def is_subkind(kind: Kind, ancestor: Kind) -> bool:
    while True:
        if kind is ancestor:
            return True
        parent = _KIND_PARENT.get(kind)
        if parent is None:
            return False
        kind = parent


def parse_potency(raw: str | None) -> int | float:
    """Potency text to value; absent or unparseable means unbounded."""
    if raw is None or raw == "*":
        return INFINITE
    try:
        value = int(raw)
    except ValueError:
        return INFINITE
    return value if value >= 0 else INFINITE


def format_potency(p: int | float) -> str:
    return "*" if p == INFINITE else str(int(p))


class ModelError(Exception):
    kind = "ModelError"

    def __init__(self, detail: str = ""):
        super().__init__(detail)
        self.detail = detail


class DuplicateName(ModelError):
    kind = "DuplicateName"


class UnknownElement(ModelError):
    kind = "UnknownElement"


class AmbiguousName(ModelError):
    kind = "AmbiguousName"


class PotencyExhausted(ModelError):
    kind = "PotencyExhausted"


class InvalidName(ModelError):
    kind = "InvalidName"


class InvalidAttribute(ModelError):
    kind = "InvalidAttribute"


@dataclass(frozen=True)
class Clabject:
    """Read-only projection of one live element."""

    id: uuid.UUID
    name: str
    kind: Kind
    typed_by: str | None
    potency: int | float
    attributes: tuple[tuple[str, str], ...]
    source: str | None = None
    target: str | None = None

    @property
    def is_association(self) -> bool:
        return self.source is not None


@dataclass(frozen=True)
class ModelView:
    """Deterministic snapshot of all live elements (sorted by name, id)."""

    elements: tuple[Clabject, ...]
    associations: tuple[Clabject, ...]

    def by_name(self, name: str) -> Clabject | None:
        for c in self.elements + self.associations:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class ByName:
    name: str


@dataclass(frozen=True)
class ById:
    id: uuid.UUID


Selector = ByName | ById


class PhysicalModel:
    """One replica of the shared model.

    All mutations funnel through the methods below; `local=False` marks a
    remote merge, which must never fail on resolution (convergence) and is
    therefore applied permissively.
    """

    def __init__(self):
        self.graph = LWWGraph()
        self._name_index: dict[str, set[uuid.UUID]] = {}
        self.strict_conformance = False

    # -- element creation ---------------------------------------------------

    def create_element(self, name: str, typed_by: str | None,
                       attrs: list[tuple[str, str]], stamp: Stamp,
                       kind: Kind = Kind.CLABJECT, local: bool = True) -> Clabject:
        if local:
            if not name:
                raise InvalidName("element name must be non-empty")
            if self._live_ids_named(name):
                raise DuplicateName(f"live element named {name!r} exists")
        vid = mint_element_id(stamp, "v")
        vertex = self.graph.ensure_vertex(vid)
        self.graph.add_vertex(vertex, stamp)
        vertex.add(NAME_KEY, name, stamp)
        vertex.add(KIND_KEY, kind.value, stamp)
        if typed_by is not None:
            vertex.add(TYPE_KEY, typed_by, stamp)
        potency_raw = None
        for key, value in attrs:
            if key == "potency":
                potency_raw = value
            else:
                self._write_attr(vertex, key, value, stamp, fresh=True, local=local)
        vertex.add(POTENCY_KEY, potency_raw if potency_raw is not None else "*", stamp)
        self._sync_index([vid])
        return self._project(vid)

    def instantiate(self, type_name: str, instance_name: str, stamp: Stamp) -> Clabject:
        """Create an instance one potency level below its type.

        The type must be live with potency at least 1; the instance gets
        potency type - 1 (unbounded stays unbounded) and an unset slot for
        each attribute its type declares.
        """
        type_el = self._resolve_name(type_name)
        potency = self._potency_of(type_el)
        if potency == 0:
            raise PotencyExhausted(f"{type_name} has potency 0")
        new_potency = INFINITE if potency == INFINITE else potency - 1
        attrs = [("potency", format_potency(new_potency))]
        attrs.extend((key, "") for key in self._user_attrs(self._backing(type_el)))
        return self.create_element(instance_name, type_name, attrs, stamp)

    # -- linking ------------------------------------------------------------

    def link_elements(self, from_ref: str, association_name: str, to_ref: str,
                      attrs: list[tuple[str, str]], stamp: Stamp,
                      name: str | None = None, local: bool = True) -> Clabject:
        if local:
            src = self._resolve_ref(from_ref)
            tgt = self._resolve_ref(to_ref)
            if name is not None and self._live_ids_named(name):
                raise DuplicateName(f"live element named {name!r} exists")
        else:
            src = self._ref_as_id(from_ref) or self._remote_lookup(from_ref)
            tgt = self._ref_as_id(to_ref) or self._remote_lookup(to_ref)
        if name is None:
            name = self._auto_edge_name(association_name)
        eid = mint_element_id(stamp, "e")
        edge = LWWEdge(eid, src, tgt, stamp)
        edge = self.graph.add_edge(edge, stamp, strict=local)
        edge.add(NAME_KEY, name, stamp)
        edge.add(TYPE_KEY, association_name, stamp)
        edge.add(KIND_KEY, self._association_kind(association_name).value, stamp)
        potency_raw = None
        for key, value in attrs:
            if key == "potency":
                potency_raw = value
            else:
                self._write_attr(edge, key, value, stamp, fresh=True, local=local)
        edge.add(POTENCY_KEY, potency_raw if potency_raw is not None else "*", stamp)
        self._sync_index([eid, src, tgt])
        return self._project(eid)

    def _association_kind(self, association_name: str) -> Kind:
        """The kind stored on a link. Deliberately state-free (a direct
        kind name, otherwise plain Association): deriving it from the
        receiver's current view of the association type would let delivery
        order leak into replicated state. Links typed by a declared
        composition or aggregation resolve their effective kind at read
        time (see effective_kind)."""
        if association_name in KIND_NAMES:
            kind = Kind(association_name)
            return kind if is_subkind(kind, Kind.ASSOCIATION) else Kind.ASSOCIATION
        return Kind.ASSOCIATION

    def effective_kind(self, backing) -> Kind:
        """Stored kind, refined through the type chain for plain
        associations: an instance of a declared composition behaves as a
        composition. Pure read over live state."""
        stored = self._kind_of_map(backing)
        if stored is not Kind.ASSOCIATION or not isinstance(backing, LWWEdge):
            return stored
        type_name = backing.query(TYPE_KEY)
        if not type_name:
            return stored
        ids = self._live_ids_named(type_name)
        if len(ids) == 1:
            type_backing = self._backing_by_id(next(iter(ids)))
            if isinstance(type_backing, LWWEdge):
                type_kind = self._kind_of_map(type_backing)
                if is_subkind(type_kind, Kind.ASSOCIATION):
                    return type_kind
        return stored

    def _auto_edge_name(self, association_name: str) -> str:
        count = 0
        for edge in self.graph.live_edges():
            if edge.query(TYPE_KEY) == association_name:
                count += 1
        return f"{association_name}_{count}"

    # -- updates ------------------------------------------------------------

    def update_element(self, selector: Selector, attrs: list[tuple[str, str]],
                       stamp: Stamp, local: bool = True) -> Clabject | None:
        if local:
            element_id = self._resolve_selector(selector)
        else:
            element_id = self._selector_id_permissive(selector, stamp)
        backing = self._backing_by_id(element_id)
        # Validate every key up front: a partial local apply that then
        # errors (and is never sent) would diverge from the other replicas.
        for key, _ in attrs:
            if key == "name":
                raise InvalidAttribute(
                    "element names are fixed at creation; delete and recreate")
            if local and (key.startswith("~") or not key):
                raise InvalidAttribute(f"attribute key {key!r} is reserved")
        for key, value in attrs:
            if key == "potency":
                backing.update(POTENCY_KEY, value, stamp)
            elif key == "typedBy":
                backing.update(TYPE_KEY, value, stamp)
            else:
                self._write_attr(backing, key, value, stamp, fresh=False,
                                 local=local)
        self._sync_index([element_id])
        return self._project(element_id) if self._is_live(element_id) else None

    def _write_attr(self, backing, key: str, value: str, stamp: Stamp,
                    fresh: bool, local: bool = True) -> None:
        if local and (key.startswith("~") or not key):
            raise InvalidAttribute(f"attribute key {key!r} is reserved")
        if fresh:
            backing.add(key, value, stamp)
        else:
            backing.update(key, value, stamp)

    # -- deletion -----------------------------------------------------------

    def delete_element(self, selector: Selector, stamp: Stamp,
                       local: bool = True) -> Outcome:
        """Tombstone an element; vertices cascade over their live edges.

        The removal intent is always recorded. APPLIED means the element is
        dead afterwards; REJECTED means it lost the last-writer race (some
        newer edge keeps it alive) and the tombstone simply remains latent.
        """
        if local:
            element_id = self._resolve_selector(selector)
        else:
            element_id = self._selector_id_permissive(selector, stamp)
        touched = [element_id]
        if element_id in self.graph._edges or \
                (not self.graph._known_vertex(element_id) and id_role(element_id) == "e"):
            self.graph.remove_edge(element_id, stamp, strict=local)
        else:
            touched.extend(self.graph._incidence.get(element_id, ()))
            self.graph.cascade_remove_vertex(element_id, stamp, strict=local)
        self._sync_index(touched)
        return Outcome.REJECTED if self._is_live(element_id) else Outcome.APPLIED

    # -- reads --------------------------------------------------------------

    def read_model(self) -> ModelView:
        elements = sorted(
            (self._project(v.id) for v in self.graph.live_vertices()),
            key=lambda c: (c.name, str(c.id)),
        )
        associations = sorted(
            (self._project(e.id) for e in self.graph.live_edges()),
            key=lambda c: (c.name, str(c.id)),
        )
        return ModelView(tuple(elements), tuple(associations))

    def element(self, selector: Selector) -> Clabject:
        return self._project(self._resolve_selector(selector))

    def find(self, name: str) -> Clabject | None:
        ids = self._live_ids_named(name)
        if len(ids) != 1:
            return None
        return self._project(next(iter(ids)))

    def live_element_ids(self) -> set[uuid.UUID]:
        live = {v.id for v in self.graph.live_vertices()}
        live.update(e.id for e in self.graph.live_edges())
        return live

    # -- name index ---------------------------------------------------------

    def rebuild_index(self) -> dict[str, set[uuid.UUID]]:
        index: dict[str, set[uuid.UUID]] = {}
        for el in self.graph.live_vertices() + self.graph.live_edges():
            name = el.query(NAME_KEY)
            if name:
                index.setdefault(name, set()).add(el.id)
        return index

    def _sync_index(self, ids) -> None:
        for element_id in ids:
            live = self._is_live(element_id)
            backing = self._backing_by_id(element_id, register=True)
            name = backing.query(NAME_KEY)
            if not name:
                continue
            bucket = self._name_index.setdefault(name, set())
            if live:
                bucket.add(element_id)
            else:
                bucket.discard(element_id)

    def _live_ids_named(self, name: str) -> set[uuid.UUID]:
        bucket = self._name_index.get(name, set())
        return {i for i in bucket if self._is_live(i)}

    # -- resolution helpers --------------------------------------------------

    def resolve(self, selector: Selector) -> uuid.UUID:
        """Resolve a selector against live elements (raises on miss)."""
        return self._resolve_selector(selector)

    def _resolve_selector(self, selector: Selector) -> uuid.UUID:
        if isinstance(selector, ById):
            if not self._known(selector.id) or not self._is_live(selector.id):
                raise UnknownElement(str(selector.id))
            return selector.id
        ids = self._live_ids_named(selector.name)
        if not ids:
            raise UnknownElement(selector.name)
        if len(ids) > 1:
            raise AmbiguousName(selector.name)
        return next(iter(ids))

    def _selector_id_permissive(self, selector: Selector, stamp: Stamp) -> uuid.UUID:
        """Remote-merge resolution: never fails. Unknown ids become
        placeholders; names fall back to the newest known match."""
        if isinstance(selector, ById):
            if not self._known(selector.id):
                if id_role(selector.id) == "e":
                    self.graph._edges[selector.id] = LWWEdge(selector.id)
                else:
                    self.graph.ensure_vertex(selector.id)
            return selector.id
        ids = self._live_ids_named(selector.name)
        if len(ids) == 1:
            return next(iter(ids))
        if ids:
            return max(ids, key=lambda i: str(i))
        # Name never seen here: deterministically derive the placeholder the
        # issuer's create will eventually fill (only reachable with frames
        # that bypassed canonical id rewriting).
        placeholder = uuid.uuid5(ELEMENT_NAMESPACE, f"name:{selector.name}")
        self.graph.ensure_vertex(placeholder)
        return placeholder

    def _resolve_name(self, name: str) -> uuid.UUID:
        return self._resolve_selector(ByName(name))

    def _resolve_ref(self, ref: str) -> uuid.UUID:
        """A reference is an element name, or an element id in canonical
        hex form (names that merely look like ids resolve as ids first)."""
        as_id = self._ref_as_id(ref)
        if as_id is not None:
            return as_id
        ids = self._live_ids_named(ref)
        if not ids:
            raise UnknownVertex(ref)
        if len(ids) > 1:
            raise AmbiguousName(ref)
        return next(iter(ids))

    def _ref_as_id(self, ref: str) -> uuid.UUID | None:
        try:
            candidate = uuid.UUID(ref)
        except ValueError:
            return None
        return candidate if self._known(candidate) else candidate

    def _remote_lookup(self, ref: str) -> uuid.UUID:
        ids = self._live_ids_named(ref)
        if ids:
            return max(ids, key=lambda i: str(i))
        placeholder = uuid.uuid5(ELEMENT_NAMESPACE, f"name:{ref}")
        self.graph.ensure_vertex(placeholder)
        return placeholder

    # -- projections ---------------------------------------------------------

    def _project(self, element_id: uuid.UUID) -> Clabject:
        backing = self._backing_by_id(element_id)
        attrs = tuple(sorted(self._user_attrs(backing).items()))
        source = target = None
        if isinstance(backing, LWWEdge):
            source = self._display_name(backing.source())
            target = self._display_name(backing.target())
        return Clabject(
            id=element_id,
            name=backing.query(NAME_KEY) or "",
            kind=self.effective_kind(backing),
            typed_by=backing.query(TYPE_KEY),
            potency=parse_potency(backing.query(POTENCY_KEY)),
            attributes=attrs,
            source=source,
            target=target,
        )

    def _display_name(self, element_id: uuid.UUID | None) -> str:
        if element_id is None:
            return ""
        try:
            backing = self._backing_by_id(element_id)
        except UnknownElement:
            return str(element_id)
        return backing.query(NAME_KEY) or str(element_id)

    def _user_attrs(self, backing) -> dict[str, str]:
        return {k: v or "" for k, v in backing.live_items().items()
                if not k.startswith("~")}

    def _kind_of_map(self, backing) -> Kind:
        raw = backing.query(KIND_KEY)
        try:
            return Kind(raw) if raw else Kind.CLABJECT
        except ValueError:
            return Kind.CLABJECT

    def _potency_of(self, element_id: uuid.UUID) -> int | float:
        return parse_potency(self._backing_by_id(element_id).query(POTENCY_KEY))

    def _backing(self, element_id: uuid.UUID):
        return self._backing_by_id(element_id)

    def _backing_by_id(self, element_id: uuid.UUID, register: bool = False):
        if element_id in self.graph._edges:
            return self.graph._edges[element_id]
        if self.graph._known_vertex(element_id):
            return self.graph.vertex(element_id)
        if register:
            return self.graph.ensure_vertex(element_id)
        raise UnknownElement(str(element_id))

    def _known(self, element_id: uuid.UUID) -> bool:
        return element_id in self.graph._edges or self.graph._known_vertex(element_id)

    def _is_live(self, element_id: uuid.UUID) -> bool:
        if element_id in self.graph._edges:
            return self.graph.edge_live(element_id)
        if self.graph._known_vertex(element_id):
            return self.graph.vertex_live(element_id)
        return False

    def typed_by_chain(self, element_id: uuid.UUID, limit: int = 32) -> list[uuid.UUID]:
        """Follow typed_by names upward while they resolve uniquely."""
        chain = []
        current = element_id
        for _ in range(limit):
            type_name = self._backing_by_id(current).query(TYPE_KEY)
            if not type_name:
                break
            ids = self._live_ids_named(type_name)
            if len(ids) != 1:
                break
            current = next(iter(ids))
            if current in chain or current == element_id:
                break
            chain.append(current)
        return chain

    def backing_bijection_ok(self) -> bool:
        """Every live graph element projects to exactly one clabject and
        vice versa (the projection is total on live elements)."""
        vertex_ids = {v.id for v in self.graph.live_vertices()}
        edge_ids = {e.id for e in self.graph.live_edges()}
        view = self.read_model()
        return vertex_ids == {c.id for c in view.elements} and \
            edge_ids == {c.id for c in view.associations}
