"""Agreement and validity certificates, run together in one up-sweep."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .digest import DEFAULT_WIDTH, WireDecision, to_wire
from .types import ErrorKind, ErrorSignal, NodeId, TreeInput
from .wire import CombinedMsg


@dataclass(frozen=True)
class ConsensusInput:
    """What the local consensus implementation hands its agent.

    Nothing is enforced here: buggy implementations are the thing under test.
    """

    decision: bytes
    proposals: tuple[bytes, ...] = field(default_factory=tuple)


def certify_agreement(
    d: WireDecision,
    child_decisions: Sequence[WireDecision],
    node: NodeId = 0,
    round_no: int = 0,
    children: Optional[Sequence[NodeId]] = None,
) -> tuple[WireDecision, list[ErrorSignal]]:
    """Flag every child whose decision differs; always forward our own."""
    errors = []
    for i, cd in enumerate(child_decisions):
        if cd != d:
            who = children[i] if children is not None else i
            errors.append(ErrorSignal(
                node, round_no, ErrorKind.AGREEMENT,
                f"child {who} decided {cd.summary()}, local decision {d.summary()}",
            ))
    return d, errors


def local_witness(inp: ConsensusInput, width: int = DEFAULT_WIDTH) -> bool:
    """Did this node receive a proposal equal to its decision (in wire form)?"""
    d = to_wire(inp.decision, width)
    return any(to_wire(p, width) == d for p in inp.proposals)


def certify_validity(
    inp: ConsensusInput,
    child_flags: Sequence[bool],
    is_root: bool,
    node: NodeId = 0,
    round_no: int = 0,
    width: int = DEFAULT_WIDTH,
) -> tuple[bool, Optional[ErrorSignal]]:
    """OR the local witness with the children's flags; only the root judges."""
    c = local_witness(inp, width) or any(child_flags)
    if is_root and not c:
        return c, ErrorSignal(
            node, round_no, ErrorKind.VALIDITY, "no node holds a proposal matching the decision"
        )
    return c, None


def certify_consensus(
    tree: TreeInput,
    inp: ConsensusInput,
    child_msgs: Sequence[CombinedMsg],
    round_no: int = 0,
    width: int = DEFAULT_WIDTH,
) -> tuple[Optional[CombinedMsg], list[ErrorSignal]]:
    """One node's step of a consensus round.

    ``child_msgs`` must be in the order of ``tree.children``. Validity is
    evaluated even when agreement already failed.
    """
    d = to_wire(inp.decision, width)
    fwd, errors = certify_agreement(
        d, [m.decision for m in child_msgs], tree.id, round_no, tree.children
    )
    c, verr = certify_validity(
        inp, [m.witness_found for m in child_msgs], tree.is_root, tree.id, round_no, width
    )
    if verr is not None:
        errors.append(verr)
    if tree.is_root:
        return None, errors
    return CombinedMsg(fwd, c), errors
