"""Spanning-tree structure certificate.

Every node reports ``(root, depth, subtree count)`` to its parent. A parent
checks that each child names the same root and sits strictly deeper, then
forwards its own count. The root compares the final count with the length of
the ID list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .types import ErrorKind, ErrorSignal, TreeInput
from .wire import StructureMsg


@dataclass(frozen=True)
class StructureVerdict:
    errors: tuple[ErrorSignal, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.errors

    @property
    def error(self) -> Optional[ErrorSignal]:
        return self.errors[0] if self.errors else None


def structure_check_local(
    tree: TreeInput,
    child_msgs: Sequence[StructureMsg],
    round_no: int = 0,
    check_depth: bool = True,
) -> tuple[Optional[StructureMsg], StructureVerdict]:
    """One node's step of the structure round.

    ``child_msgs`` holds the reports that arrived from the node's children.
    All checks run before the count is forwarded, so a single pass surfaces
    every error this node can see. ``check_depth=False`` exists only for
    mutation tests.
    """
    errors = []
    count = 1
    for msg in child_msgs:
        if msg.claimed_root != tree.root_id:
            errors.append(ErrorSignal(
                tree.id, round_no, ErrorKind.STRUCTURE,
                f"child reports root {msg.claimed_root}, expected {tree.root_id}",
            ))
        if check_depth and msg.sender_depth <= tree.depth:
            errors.append(ErrorSignal(
                tree.id, round_no, ErrorKind.STRUCTURE,
                f"child depth {msg.sender_depth} not below own depth {tree.depth}",
            ))
        count += msg.subtree_count
    if tree.is_root:
        if count != tree.n:
            errors.append(ErrorSignal(
                tree.id, round_no, ErrorKind.SPAN,
                f"tree covers {count} nodes, id_list has {tree.n}",
            ))
        return None, StructureVerdict(tuple(errors))
    return StructureMsg(tree.root_id, tree.depth, count), StructureVerdict(tuple(errors))
