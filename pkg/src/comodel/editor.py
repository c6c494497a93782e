"""Command-line mindmap editor.

The editor DSL is a thin verb layer over the physical command language:

    READ                                  print the model as a tree
    OBJECTS                               list every live element
    CREATE {type} {name}                  instantiate a type
    LINK {source}.{port} TO {target}      link two elements
    UPDATE {name} {attribute} {newValue}  change one attribute
    DELETE {name}                         delete an element
    VIOLATIONS                            list conformance findings (extension)
    QUIT                                  leave the session (extension)

Each mutating verb maps to exactly one physical command. Remote updates
are merged between prompts and after each command.
"""

from __future__ import annotations

import argparse
import logging
import sys
import uuid
from dataclasses import dataclass

from . import commands, conformance
from .client import SocketClient
from .commands import ByName, Create, Delete, Link, Update
from .model import (
    INFINITE,
    Kind,
    PhysicalModel,
    PotencyExhausted,
    format_potency,
)
from .server import parse_addr

log = logging.getLogger("comodel.editor")

HELP = """\
READ                                  print the model as a tree
OBJECTS                               list every live element
CREATE {type} {name}                  instantiate a type
LINK {source}.{port} TO {target}      link two elements
UPDATE {name} {attribute} {newValue}  change one attribute
DELETE {name}                         delete an element
VIOLATIONS                            list conformance findings (extension)
QUIT                                  leave the session (extension)"""


class EditorSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class ReadVerb:
    pass


@dataclass(frozen=True)
class ObjectsVerb:
    pass


@dataclass(frozen=True)
class ViolationsVerb:
    pass


@dataclass(frozen=True)
class QuitVerb:
    pass


@dataclass(frozen=True)
class HelpVerb:
    pass


@dataclass(frozen=True)
class CreateVerb:
    type_name: str
    name: str


@dataclass(frozen=True)
class LinkVerb:
    source: str
    port: str
    target: str


@dataclass(frozen=True)
class UpdateVerb:
    name: str
    attribute: str
    value: str


@dataclass(frozen=True)
class DeleteVerb:
    name: str


def parse_verb(line: str):
    line = line.strip()
    if not line:
        return None
    head, _, rest = line.partition(" ")
    rest = rest.strip()
    if head == "READ" and not rest:
        return ReadVerb()
    if head == "OBJECTS" and not rest:
        return ObjectsVerb()
    if head == "VIOLATIONS" and not rest:
        return ViolationsVerb()
    if head == "QUIT" and not rest:
        return QuitVerb()
    if head == "HELP" and not rest:
        return HelpVerb()
    if head == "CREATE":
        parts = rest.split()
        if len(parts) != 2:
            raise EditorSyntaxError("usage: CREATE {type} {name}")
        return CreateVerb(parts[0], parts[1])
    if head == "LINK":
        parts = rest.split()
        if len(parts) != 3 or parts[1] != "TO":
            raise EditorSyntaxError("usage: LINK {source}.{port} TO {target}")
        dot = parts[0].rfind(".")
        if dot <= 0 or dot == len(parts[0]) - 1:
            raise EditorSyntaxError("usage: LINK {source}.{port} TO {target}")
        return LinkVerb(parts[0][:dot], parts[0][dot + 1:], parts[2])
    if head == "UPDATE":
        parts = rest.split(" ", 2)
        if len(parts) != 3 or not all(parts):
            raise EditorSyntaxError("usage: UPDATE {name} {attribute} {newValue}")
        return UpdateVerb(parts[0], parts[1], parts[2])
    if head == "DELETE":
        if not rest or " " in rest:
            raise EditorSyntaxError("usage: DELETE {name}")
        return DeleteVerb(rest)
    raise EditorSyntaxError(f"unknown verb {head!r} (try HELP)")


def translate(verb, model: PhysicalModel):
    """Editor verb to its one physical command, resolved against the
    current replica (potency math and attribute slots happen here, at the
    issuing client, so the wire carries materialized values)."""
    if isinstance(verb, CreateVerb):
        return _translate_create(verb, model)
    if isinstance(verb, LinkVerb):
        return Link(verb.source, verb.port, verb.target)
    if isinstance(verb, UpdateVerb):
        return Update(ByName(verb.name), ((verb.attribute, verb.value),))
    if isinstance(verb, DeleteVerb):
        return Delete(ByName(verb.name))
    raise TypeError(f"not a mutating verb: {verb!r}")


def _translate_create(verb: CreateVerb, model: PhysicalModel) -> Create:
    type_el = model.find(verb.type_name)
    if type_el is None:
        # Unresolved or kind-level type: plain creation, the conformance
        # layer reports unresolved names.
        return Create(verb.name, verb.type_name)
    if type_el.potency == 0:
        raise PotencyExhausted(f"{verb.type_name} has potency 0")
    new_potency = INFINITE if type_el.potency == INFINITE else type_el.potency - 1
    attrs = [("potency", format_potency(new_potency))]
    for key, default in type_el.attributes:
        attrs.append((key, default if default else verb.name))
    return Create(verb.name, verb.type_name, tuple(attrs))


# -- rendering -------------------------------------------------------------


def _node_label(clabject) -> str:
    type_display = clabject.typed_by or clabject.kind.value
    label = f"{clabject.name} : {type_display} (p{format_potency(clabject.potency)})"
    if clabject.attributes:
        attrs = "; ".join(f"{k}={v}" for k, v in clabject.attributes)
        label += " {" + attrs + "}"
    return label


def render_read(model: PhysicalModel) -> str:
    """The model as an indented containment tree.

    Composition links nest their target under the source; every other
    association prints as a cross reference. Ordering is by name then id
    everywhere, so converged replicas render byte-identical text.
    """
    view = model.read_model()
    if not view.elements and not view.associations:
        return "(empty model)"
    by_id = {c.id: c for c in view.elements}
    children: dict[uuid.UUID, list] = {}
    refs: dict[uuid.UUID, list] = {}
    contained: set[uuid.UUID] = set()
    for assoc in view.associations:
        edge = model.graph.edge(assoc.id)
        src, tgt = edge.source(), edge.target()
        if src not in by_id:
            continue
        entry = (assoc.name, str(assoc.id), assoc, tgt)
        if assoc.kind is Kind.COMPOSITION and tgt in by_id:
            children.setdefault(src, []).append(entry)
            contained.add(tgt)
        else:
            refs.setdefault(src, []).append(entry)

    lines: list[str] = []
    printed: set[uuid.UUID] = set()

    def emit(element_id: uuid.UUID, depth: int, via: str) -> None:
        clabject = by_id[element_id]
        prefix = "  " * depth + (via and via + " ")
        if element_id in printed:
            lines.append(f"{prefix}{clabject.name} ...")
            return
        printed.add(element_id)
        lines.append(prefix + _node_label(clabject))
        for name, _, assoc, tgt in sorted(refs.get(element_id, ())):
            target_name = by_id[tgt].name if tgt in by_id else str(tgt)
            lines.append("  " * (depth + 1) +
                         f"-> [{name} : {assoc.typed_by}] {target_name}")
        for name, _, assoc, tgt in sorted(children.get(element_id, ())):
            emit(tgt, depth + 1, f"[{name} : {assoc.typed_by}]")

    roots = [c for c in view.elements if c.id not in contained]
    for root in roots:
        emit(root.id, 0, "")
    leftovers = [c for c in view.elements if c.id not in printed]
    for c in leftovers:  # containment cycles only
        emit(c.id, 0, "")
    return "\n".join(lines)


def render_objects(model: PhysicalModel) -> str:
    view = model.read_model()
    rows = []
    for c in view.elements + view.associations:
        kind = c.kind.value
        type_display = c.typed_by or "-"
        rows.append(f"{c.id}  {c.name}  type={type_display}  kind={kind}  "
                    f"p={format_potency(c.potency)}")
    if not rows:
        return "(no objects)"
    return "\n".join(sorted(rows, key=lambda r: r.split("  ", 2)[1]))


def render_violations(violations) -> str:
    if not violations:
        return "(no violations)"
    return "\n".join(f"{v.kind.value}: {v.detail}" for v in violations)


# -- metamodel bootstrap ----------------------------------------------------

BOOTSTRAP_SENTINEL = "MindMap"

_BOOTSTRAP = [
    Create("Class", "Clabject", (("potency", "*"),)),
    Create("MindMap", "Class", (("potency", "1"), ("title", ""))),
    Create("Topic", "Class", (("potency", "1"),)),
    Create("CentralTopic", "Class", (("potency", "1"),)),
    Create("MainTopic", "Class", (("potency", "1"),)),
    Create("SubTopic", "Class", (("potency", "1"),)),
    Create("Marker", "Class", (("potency", "1"), ("symbol", ""))),
    Link("MindMap", "Composition", "CentralTopic", "topic",
         (("lower", "1"), ("upper", "1"))),
    Link("CentralTopic", "Composition", "MainTopic", "mainTopics",
         (("lower", "0"), ("upper", "*"))),
    Link("MainTopic", "Composition", "SubTopic", "subtopics",
         (("lower", "0"), ("upper", "*"))),
    Link("Topic", "Association", "Marker", "markers",
         (("lower", "0"), ("upper", "*"))),
]


def bootstrap_mindmap_metamodel(submit, model: PhysicalModel) -> int:
    """Issue the metamodel-building sequence: the mindmap language as
    clabjects (classes with potency, attribute slots, and the containment
    and marker associations), itself typed by a meta-circular Class.

    Skips everything when a live MindMap class already exists, so two
    clients bootstrapping against one server stay idempotent by name.
    """
    if model.find(BOOTSTRAP_SENTINEL) is not None:
        return 0
    for cmd in _BOOTSTRAP:
        submit(cmd)
    return len(_BOOTSTRAP)


# -- the REPL ---------------------------------------------------------------


class EditorLoop:
    def __init__(self, client: SocketClient, out=None):
        self.client = client
        self.out = out or sys.stdout

    def _print(self, text: str) -> None:
        self.out.write(text + "\n")

    def execute(self, line: str) -> bool:
        """Run one editor line; returns False when the session should end."""
        try:
            verb = parse_verb(line)
        except EditorSyntaxError as exc:
            self._print(f"error: {exc}")
            return True
        if verb is None:
            return True
        self.client.poll()
        model = self.client.model
        if isinstance(verb, QuitVerb):
            return False
        if isinstance(verb, HelpVerb):
            self._print(HELP)
        elif isinstance(verb, ReadVerb):
            self._print(render_read(model))
        elif isinstance(verb, ObjectsVerb):
            self._print(render_objects(model))
        elif isinstance(verb, ViolationsVerb):
            self._print(render_violations(conformance.check_conformance(model)))
        else:
            self._mutate(verb, model)
        self.client.poll()
        return True

    def _mutate(self, verb, model: PhysicalModel) -> None:
        try:
            cmd = translate(verb, model)
        except (PotencyExhausted,) as exc:
            self._print(f"error: {exc.kind}: {exc}")
            return
        report = self.client.submit(cmd)
        if report.status is commands.ApplyStatus.ERROR:
            self._print(f"error: {report.error_kind}: {report.detail}")
        elif report.status is commands.ApplyStatus.REJECTED:
            self._print("rejected: a newer edit keeps this element alive")
        elif report.element is not None:
            self._print(f"ok: {report.element.name} ({report.element.id})")
        else:
            self._print("ok")

    def run_interactive(self) -> int:
        self._print("connected; HELP lists the commands")
        while True:
            try:
                line = input("> ")
            except EOFError:
                return 0
            if not self.execute(line):
                return 0

    def run_script(self, lines) -> int:
        for line in lines:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if not self.execute(line):
                break
        return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="comodel-editor",
        description="Interactive collaborative mindmap editor.")
    parser.add_argument("--server", type=parse_addr, default=("127.0.0.1", 7700))
    parser.add_argument("--bootstrap", action="store_true",
                        help="create the mindmap metamodel if absent")
    parser.add_argument("--script", type=argparse.FileType("r"), default=None,
                        help="replay editor commands from a file and exit")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())

    client = SocketClient(args.server)
    client.connect()
    loop = EditorLoop(client)
    try:
        if args.bootstrap:
            created = bootstrap_mindmap_metamodel(client.submit, client.model)
            loop._print(f"bootstrap: {created} commands issued")
        if args.script is not None:
            return loop.run_script(args.script)
        return loop.run_interactive()
    finally:
        client.close()


if __name__ == "__main__":
    raise SystemExit(main())
