"""The textual command language: the unit of local editing, wire
transfer, and snapshot replay.

Grammar: a verb, then flag/value pairs. Tokens are separated by single
spaces; flags begin with '-'; values containing spaces or specials are
double-quoted with backslash escapes. `-typedBy`, `-name`, `-id`, `-from`
and `-to` are reserved; any other flag is an attribute assignment.

Serialization is canonical (fixed flag order, attributes in input order)
and loss-free: parse(serialize(c)) == c, and serializing a parsed string
is idempotent. Canonical text never contains TAB or newline, which the
wire framing relies on.
"""

from __future__ import annotations

import copy
import enum
import uuid
from dataclasses import dataclass

from . import conformance
from .crdt import Outcome, Stamp, UnknownEdge, UnknownVertex
from .model import ById, ByName, Clabject, ModelError, PhysicalModel, Selector

Attrs = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Create:
    name: str
    typed_by: str | None = None
    attrs: Attrs = ()


@dataclass(frozen=True)
class Link:
    source: str
    association: str
    target: str
    name: str | None = None
    attrs: Attrs = ()


@dataclass(frozen=True)
class Update:
    selector: Selector
    attrs: Attrs = ()


@dataclass(frozen=True)
class Delete:
    selector: Selector


Command = Create | Link | Update | Delete

RESERVED_FLAGS = {"typedBy", "name", "id", "from", "to"}


class CommandSyntaxError(ValueError):
    def __init__(self, position: int, reason: str):
        super().__init__(f"at {position}: {reason}")
        self.position = position
        self.reason = reason


class MissingFlag(CommandSyntaxError):
    def __init__(self, flag: str, verb: str):
        super().__init__(0, f"{verb} requires -{flag}")
        self.flag = flag


class ConflictingSelector(CommandSyntaxError):
    def __init__(self):
        super().__init__(0, "both -name and -id given")


# -- tokenizing -----------------------------------------------------------

_ESCAPES = {"\\": "\\", '"': '"', "t": "\t", "n": "\n", "r": "\r"}
_UNESCAPES = {"\\": "\\\\", '"': '\\"', "\t": "\\t", "\n": "\\n", "\r": "\\r"}


def _tokenize(text: str) -> list[tuple[int, str]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        if text[i] == " ":
            i += 1
            continue
        start = i
        if text[i] == '"':
            i += 1
            parts = []
            while True:
                if i >= n:
                    raise CommandSyntaxError(start, "unterminated quote")
                ch = text[i]
                if ch == "\\":
                    if i + 1 >= n or text[i + 1] not in _ESCAPES:
                        raise CommandSyntaxError(i, "bad escape")
                    parts.append(_ESCAPES[text[i + 1]])
                    i += 2
                elif ch == '"':
                    i += 1
                    break
                else:
                    parts.append(ch)
                    i += 1
            if i < n and text[i] != " ":
                raise CommandSyntaxError(i, "quoted value not followed by space")
            tokens.append((start, "".join(parts)))
        else:
            j = text.find(" ", i)
            if j == -1:
                j = n
            tok = text[i:j]
            if "\t" in tok or "\n" in tok or "\r" in tok:
                raise CommandSyntaxError(i, "control character outside quotes")
            tokens.append((i, tok))
            i = j
    return tokens


def _quote(value: str) -> str:
    if value and not any(c in value for c in ' "\\\t\n\r'):
        return value
    out = ['"']
    for ch in value:
        out.append(_UNESCAPES.get(ch, ch))
    out.append('"')
    return "".join(out)


def _parse_flags(tokens: list[tuple[int, str]]) -> list[tuple[int, str, str]]:
    """Pair each -flag with its value token."""
    flags = []
    i = 0
    while i < len(tokens):
        pos, tok = tokens[i]
        if not tok.startswith("-") or len(tok) < 2:
            raise CommandSyntaxError(pos, f"expected a flag, got {tok!r}")
        if i + 1 >= len(tokens):
            raise CommandSyntaxError(pos, f"flag {tok} has no value")
        flags.append((pos, tok[1:], tokens[i + 1][1]))
        i += 2
    return flags


def _parse_uuid(pos: int, raw: str) -> uuid.UUID:
    try:
        parsed = uuid.UUID(raw)
    except ValueError:
        raise CommandSyntaxError(pos, f"-id value {raw!r} is not a UUID") from None
    if str(parsed) != raw.lower():
        raise CommandSyntaxError(pos, "-id must use canonical 8-4-4-4-12 form")
    return parsed


def parse(text: str) -> Command:
    tokens = _tokenize(text)
    if not tokens:
        raise CommandSyntaxError(0, "empty command")
    pos, verb = tokens[0]
    flags = _parse_flags(tokens[1:])

    if verb == "CREATE":
        name = typed_by = None
        attrs = []
        for fpos, flag, value in flags:
            if flag == "name" and name is None:
                name = value
            elif flag == "typedBy" and typed_by is None:
                typed_by = value
            elif flag in ("id", "from", "to"):
                raise CommandSyntaxError(fpos, f"-{flag} not allowed on CREATE")
            elif flag in ("name", "typedBy"):
                raise CommandSyntaxError(fpos, f"duplicate -{flag}")
            else:
                attrs.append((flag, value))
        if name is None:
            raise MissingFlag("name", "CREATE")
        return Create(name, typed_by, tuple(attrs))

    if verb == "LINK":
        source = association = target = link_name = None
        attrs = []
        for fpos, flag, value in flags:
            if flag == "from" and source is None:
                dot = value.rfind(".")
                if dot <= 0 or dot == len(value) - 1:
                    raise CommandSyntaxError(
                        fpos, "-from takes {element}.{association}")
                source, association = value[:dot], value[dot + 1:]
            elif flag == "to" and target is None:
                target = value
            elif flag == "name" and link_name is None:
                link_name = value
            elif flag in ("id", "typedBy"):
                raise CommandSyntaxError(fpos, f"-{flag} not allowed on LINK")
            elif flag in ("from", "to", "name"):
                raise CommandSyntaxError(fpos, f"duplicate -{flag}")
            else:
                attrs.append((flag, value))
        if source is None:
            raise MissingFlag("from", "LINK")
        if target is None:
            raise MissingFlag("to", "LINK")
        return Link(source, association, target, link_name, tuple(attrs))

    if verb in ("UPDATE", "DELETE"):
        name = elem_id = None
        attrs = []
        for fpos, flag, value in flags:
            if flag == "name" and name is None and elem_id is None:
                name = value
            elif flag == "id" and elem_id is None and name is None:
                elem_id = _parse_uuid(fpos, value)
            elif flag in ("name", "id"):
                raise ConflictingSelector()
            elif flag in ("from", "to"):
                raise CommandSyntaxError(fpos, f"-{flag} not allowed on {verb}")
            elif verb == "DELETE":
                raise CommandSyntaxError(fpos, "DELETE takes only a selector")
            else:
                attrs.append((flag, value))
        if name is None and elem_id is None:
            raise MissingFlag("name or -id", verb)
        selector = ById(elem_id) if elem_id is not None else ByName(name)
        if verb == "DELETE":
            return Delete(selector)
        return Update(selector, tuple(attrs))

    raise CommandSyntaxError(pos, f"unknown verb {verb!r}")


def serialize(cmd: Command) -> str:
    parts: list[str] = []

    def flag(name: str, value: str) -> None:
        parts.append(f"-{name}")
        parts.append(_quote(value))

    def attr_flags(attrs: Attrs) -> None:
        for key, value in attrs:
            if not key or key.startswith("-") or any(c in key for c in ' "\t\n\r'):
                raise ValueError(f"attribute key {key!r} cannot be serialized")
            if key in RESERVED_FLAGS and key != "typedBy":
                raise ValueError(f"attribute key {key!r} collides with a reserved flag")
            flag(key, value)

    if isinstance(cmd, Create):
        parts.append("CREATE")
        flag("name", cmd.name)
        if cmd.typed_by is not None:
            flag("typedBy", cmd.typed_by)
        attr_flags(cmd.attrs)
    elif isinstance(cmd, Link):
        parts.append("LINK")
        if cmd.name is not None:
            flag("name", cmd.name)
        if "." in cmd.association:
            raise ValueError("association names cannot contain '.'")
        flag("from", f"{cmd.source}.{cmd.association}")
        flag("to", cmd.target)
        attr_flags(cmd.attrs)
    elif isinstance(cmd, Update):
        parts.append("UPDATE")
        _selector_flags(cmd.selector, flag)
        attr_flags(cmd.attrs)
    elif isinstance(cmd, Delete):
        parts.append("DELETE")
        _selector_flags(cmd.selector, flag)
    else:
        raise TypeError(f"not a command: {cmd!r}")
    return " ".join(parts)


def _selector_flags(selector: Selector, flag) -> None:
    if isinstance(selector, ByName):
        flag("name", selector.name)
    else:
        flag("id", str(selector.id))


# -- application ----------------------------------------------------------


class Origin(enum.Enum):
    LOCAL = "local"
    REMOTE = "remote"


class ApplyStatus(enum.Enum):
    APPLIED = "applied"
    REJECTED = "rejected"
    ERROR = "error"


@dataclass
class ApplyReport:
    status: ApplyStatus
    effective: Command | None = None
    element: Clabject | None = None
    error_kind: str | None = None
    detail: str = ""

    @property
    def recorded(self) -> bool:
        """True when the operation changed replicated state and therefore
        must be propagated (REJECTED still records its tombstone)."""
        return self.status is not ApplyStatus.ERROR


def apply(cmd: Command, model: PhysicalModel, stamp: Stamp,
          origin: Origin = Origin.LOCAL) -> ApplyReport:
    """Dispatch a command against the model at the given stamp.

    Local commands validate preconditions, may be gated by strict
    conformance, and yield the canonical id-resolved command to put on the
    wire. Remote commands merge unconditionally: convergence requires that
    a frame accepted by its issuer takes effect on every replica.
    """
    local = origin is Origin.LOCAL
    if local and model.strict_conformance:
        gate = _strict_gate(cmd, model, stamp)
        if gate is not None:
            return gate
    try:
        return _dispatch(cmd, model, stamp, local)
    except (ModelError, UnknownVertex, UnknownEdge) as exc:
        kind = getattr(exc, "kind", type(exc).__name__)
        return ApplyReport(ApplyStatus.ERROR, error_kind=kind, detail=str(exc))


def _dispatch(cmd: Command, model: PhysicalModel, stamp: Stamp,
              local: bool) -> ApplyReport:
    if isinstance(cmd, Create):
        element = model.create_element(
            cmd.name, cmd.typed_by, list(cmd.attrs), stamp, local=local)
        return ApplyReport(ApplyStatus.APPLIED, effective=cmd, element=element)

    if isinstance(cmd, Link):
        element = model.link_elements(
            cmd.source, cmd.association, cmd.target, list(cmd.attrs), stamp,
            name=cmd.name, local=local)
        edge = model.graph.edge(element.id)
        effective = Link(str(edge.source()), cmd.association, str(edge.target()),
                         element.name, cmd.attrs)
        return ApplyReport(ApplyStatus.APPLIED, effective=effective, element=element)

    if isinstance(cmd, Update):
        if local:
            resolved = ById(model.resolve(cmd.selector))
        else:
            resolved = cmd.selector
        element = model.update_element(resolved, list(cmd.attrs), stamp, local=local)
        return ApplyReport(ApplyStatus.APPLIED, effective=Update(resolved, cmd.attrs),
                           element=element)

    if isinstance(cmd, Delete):
        if local:
            resolved = ById(model.resolve(cmd.selector))
        else:
            resolved = cmd.selector
        outcome = model.delete_element(resolved, stamp, local=local)
        status = ApplyStatus.APPLIED if outcome is Outcome.APPLIED \
            else ApplyStatus.REJECTED
        return ApplyReport(status, effective=Delete(resolved))

    raise TypeError(f"not a command: {cmd!r}")


def _strict_gate(cmd: Command, model: PhysicalModel, stamp: Stamp) -> ApplyReport | None:
    """Reject local commands whose post-state adds conformance violations.

    The trial run happens on a throwaway copy so a rejection leaves no
    trace (and sends nothing). Remote merges are never gated; gating them
    would make replicas diverge.
    """
    trial = copy.deepcopy(model)
    before = set(conformance.check_conformance(trial))
    try:
        _dispatch(cmd, trial, stamp, local=True)
    except (ModelError, UnknownVertex, UnknownEdge):
        return None  # let the real dispatch produce the error report
    added = set(conformance.check_conformance(trial)) - before
    if added:
        detail = "; ".join(sorted(v.detail for v in added))
        return ApplyReport(ApplyStatus.ERROR, error_kind="LinguisticViolation",
                           detail=detail)
    return None
