"""Real-time collaborative multi-level modeling on operation-based
last-writer-wins CRDTs.

Layers, bottom up: `crdt` (replicated register/set/map/graph), `model`
(clabjects over one shared graph), `commands` (the textual edit language
that is also the wire payload), `conformance` (tolerated linguistic
checking), `wire`/`server`/`client` (broadcast with snapshot replay),
`sim` (deterministic multi-replica harness), `editor` (command-line
mindmap editor).
"""

from .crdt import (
    LWWEdge,
    LWWGraph,
    LWWMap,
    LWWRegister,
    LWWSet,
    LWWVertex,
    Outcome,
    Stamp,
)
from .model import Clabject, ModelView, PhysicalModel

__all__ = [
    "Clabject",
    "LWWEdge",
    "LWWGraph",
    "LWWMap",
    "LWWRegister",
    "LWWSet",
    "LWWVertex",
    "ModelView",
    "Outcome",
    "PhysicalModel",
    "Stamp",
]

__version__ = "0.1.0"
