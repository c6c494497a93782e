"""Conformance checking across meta-levels, with tolerance.

The graph layer always enforces structural well-formedness; the rules
here (typing, multiplicities, declared attributes, potency, naming) are
computed over the current model state and reported, never enforced,
unless a replica opts into strict mode for its own local edits. Remote
merges are never gated: replicas that gated differently would diverge.
"""

from __future__ import annotations

import enum
import math
import uuid
from dataclasses import dataclass

from .model import (
    INFINITE,
    KIND_NAMES,
    NAME_KEY,
    POTENCY_KEY,
    Kind,
    PhysicalModel,
    TYPE_KEY,
    parse_potency,
)


class ViolationKind(enum.Enum):
    UNRESOLVED_TYPE = "UnresolvedType"
    MULTIPLICITY = "MultiplicityViolation"
    UNDECLARED_ATTRIBUTE = "UndeclaredAttribute"
    POTENCY = "PotencyViolation"
    AMBIGUOUS_NAME = "AmbiguousName"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: uuid.UUID
    detail: str


class Mode(enum.Enum):
    TOLERANT = "tolerant"
    STRICT = "strict"


def conformance_mode(model: PhysicalModel) -> Mode:
    return Mode.STRICT if model.strict_conformance else Mode.TOLERANT


def set_conformance_mode(model: PhysicalModel, mode: Mode) -> None:
    model.strict_conformance = mode is Mode.STRICT


@dataclass(frozen=True)
class MultiplicityDecl:
    """Bounds declared on a type-level association via its lower/upper
    attributes. A missing lower defaults to 0, a missing or '*' upper is
    unbounded."""

    association: str
    source_type: str
    lower: int
    upper: int | float

    @property
    def valid(self) -> bool:
        return 0 <= self.lower <= self.upper


def _parse_bound(raw: str | None, default):
    if raw is None or raw == "":
        return default
    if raw == "*":
        return math.inf
    try:
        return int(raw)
    except ValueError:
        return default


def multiplicity_declarations(model: PhysicalModel) -> list[MultiplicityDecl]:
    decls = []
    for edge in model.graph.live_edges():
        attrs = {k: v for k, v in edge.live_items().items() if not k.startswith("~")}
        if "lower" not in attrs and "upper" not in attrs:
            continue
        assoc_name = edge.query(NAME_KEY) or ""
        source_name = model._display_name(edge.source())
        decl = MultiplicityDecl(
            association=assoc_name,
            source_type=source_name,
            lower=int(_parse_bound(attrs.get("lower"), 0)),
            upper=_parse_bound(attrs.get("upper"), math.inf),
        )
        if decl.valid and assoc_name:
            decls.append(decl)
    return decls


def check_conformance(model: PhysicalModel) -> list[Violation]:
    """All current violations, deterministically ordered.

    Pure read over the replica snapshot; recomputable at any time from the
    model alone.
    """
    violations: list[Violation] = []
    live_vertices = model.graph.live_vertices()
    live_edges = model.graph.live_edges()
    live_all = list(live_vertices) + list(live_edges)

    name_count: dict[str, list] = {}
    for el in live_all:
        name = el.query(NAME_KEY)
        if name:
            name_count.setdefault(name, []).append(el)

    # Unresolved types: typed_by names nothing live and is not a kind.
    for el in live_all:
        type_name = el.query(TYPE_KEY)
        if not type_name or type_name in KIND_NAMES:
            continue
        if not name_count.get(type_name):
            violations.append(Violation(
                ViolationKind.UNRESOLVED_TYPE, el.id,
                f"{el.query('~name') or el.id}: type {type_name!r} "
                f"names no live element"))

    # Multiplicities: instances of a declaration's source type must hold
    # an in-bounds number of outgoing links of that association.
    decls = multiplicity_declarations(model)
    out_by_type: dict[uuid.UUID, dict[str, int]] = {}
    for edge in live_edges:
        src = edge.source()
        assoc = edge.query(TYPE_KEY)
        if src is not None and assoc:
            out_by_type.setdefault(src, {})[assoc] = \
                out_by_type.get(src, {}).get(assoc, 0) + 1
    for decl in decls:
        for el in live_vertices:
            if el.query(TYPE_KEY) != decl.source_type:
                continue
            count = out_by_type.get(el.id, {}).get(decl.association, 0)
            if count < decl.lower or count > decl.upper:
                upper = "*" if decl.upper == math.inf else str(decl.upper)
                violations.append(Violation(
                    ViolationKind.MULTIPLICITY, el.id,
                    f"{el.query('~name') or el.id}: {count} {decl.association!r} "
                    f"link(s), bounds {decl.lower}..{upper}"))

    # Containment: at most one live incoming composition per element.
    for el in live_vertices:
        containers = [e for e in model.graph.incident_edges(el.id, "in")
                      if model.effective_kind(e) is Kind.COMPOSITION]
        if len(containers) > 1:
            violations.append(Violation(
                ViolationKind.MULTIPLICITY, el.id,
                f"{el.query('~name') or el.id}: contained by "
                f"{len(containers)} compositions"))

    # Declared attributes: fully instantiated elements (potency 0) may only
    # carry attributes declared somewhere up their type chain. Elements
    # with instantiation depth left are free to declare new ones.
    for el in live_all:
        if parse_potency(el.query(POTENCY_KEY)) != 0:
            continue
        chain = model.typed_by_chain(el.id)
        if not chain:
            continue
        declared: set[str] = set()
        for type_id in chain:
            declared.update(model._user_attrs(model._backing_by_id(type_id)))
        for key in model._user_attrs(el):
            if key not in declared:
                violations.append(Violation(
                    ViolationKind.UNDECLARED_ATTRIBUTE, el.id,
                    f"{el.query('~name') or el.id}: attribute {key!r} is not "
                    f"declared by its type chain"))

    # Potency: strictly decreasing along finite typed_by steps; an
    # instance of a potency-0 type is itself evidence of a violation.
    for el in live_all:
        type_name = el.query(TYPE_KEY)
        if not type_name:
            continue
        matches = name_count.get(type_name, [])
        if len(matches) != 1:
            continue
        type_potency = parse_potency(matches[0].query(POTENCY_KEY))
        own_potency = parse_potency(el.query(POTENCY_KEY))
        if type_potency == INFINITE:
            continue
        if own_potency == INFINITE or own_potency >= type_potency:
            violations.append(Violation(
                ViolationKind.POTENCY, el.id,
                f"{el.query('~name') or el.id}: potency "
                f"{_fmt(own_potency)} not below its type's {_fmt(type_potency)}"))

    # Duplicate live names.
    for name, els in name_count.items():
        if len(els) > 1:
            subject = min(els, key=lambda e: str(e.id)).id
            violations.append(Violation(
                ViolationKind.AMBIGUOUS_NAME, subject,
                f"{len(els)} live elements named {name!r}"))

    violations.sort(key=lambda v: (v.kind.value, str(v.subject), v.detail))
    return violations


def _fmt(p) -> str:
    return "*" if p == INFINITE else str(int(p))
