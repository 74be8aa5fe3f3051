"""Domain types shared by every certification protocol."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .field import Q

NodeId = int


def valid_node_id(x: object) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and 0 <= x < Q


class ErrorKind(enum.Enum):
    STRUCTURE = "Structure"
    SPAN = "Span"
    UNIQUENESS = "Uniqueness"
    AGREEMENT = "Agreement"
    VALIDITY = "Validity"


@dataclass(frozen=True)
class ErrorSignal:
    """A verdict raised at one node. Signals stay local; they are never sent."""

    node: NodeId
    round: int
    kind: ErrorKind
    detail: str = ""

    def __str__(self) -> str:
        return f"[{self.kind.value}] node={self.node} round={self.round}: {self.detail}"


@dataclass(frozen=True)
class TreeInput:
    """One node's view of the claimed spanning tree.

    ``id`` is the ID the node was told it has; it is only trusted after the
    uniqueness round. Parent and children are named by ID and the network
    delivers to those IDs.
    """

    id: NodeId
    id_list: tuple[NodeId, ...]
    root_id: NodeId
    parent_id: Optional[NodeId]
    children: tuple[NodeId, ...] = ()
    depth: int = 0

    @property
    def n(self) -> int:
        return len(self.id_list)

    @property
    def is_root(self) -> bool:
        return self.parent_id is None

    def local_violations(self) -> list[tuple[ErrorKind, str]]:
        """Checks a node can make on its own input, before any message."""
        found: list[tuple[ErrorKind, str]] = []
        ids = self.id_list
        if not ids or any(a >= b for a, b in zip(ids, ids[1:])):
            found.append((ErrorKind.UNIQUENESS, "id_list is empty or not strictly increasing"))
        for label, x in (("id", self.id), ("root_id", self.root_id)):
            if not valid_node_id(x):
                found.append((ErrorKind.STRUCTURE, f"{label} {x!r} is not a valid node id"))
            elif x not in ids:
                found.append((ErrorKind.STRUCTURE, f"{label} {x} missing from id_list"))
        if (self.parent_id is None) != (self.id == self.root_id):
            found.append((ErrorKind.STRUCTURE, "parent must be absent exactly at the root"))
        if (self.depth == 0) != (self.id == self.root_id) or self.depth < 0:
            found.append((ErrorKind.STRUCTURE, f"depth {self.depth} inconsistent with root status"))
        if len(set(self.children)) != len(self.children):
            found.append((ErrorKind.STRUCTURE, "children list repeats an id"))
        if self.parent_id is not None and self.parent_id in self.children:
            found.append((ErrorKind.STRUCTURE, "children list names the parent"))
        return found


@dataclass
class Effects:
    """What an agent asks of the network after handling one event."""

    sends: list = field(default_factory=list)      # (dst, Envelope)
    signals: list = field(default_factory=list)    # ErrorSignal
    timers: list = field(default_factory=list)     # (delay, token)
    notes: list = field(default_factory=list)      # (kind, detail) for the trace

    def extend(self, other: "Effects") -> None:
        self.sends += other.sends
        self.signals += other.signals
        self.timers += other.timers
        self.notes += other.notes
