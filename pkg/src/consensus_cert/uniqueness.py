"""Unique-ID certificate via multi-set equality on the successor ring.

Each node holds its ID ``a`` and the successor ``b`` of that ID in the sorted
ID list. The multi-set of IDs equals the multi-set of successors exactly when
no ID repeats. Equality is tested by evaluating ``prod(x - a)`` and
``prod(x - b)`` up the tree at a batch of points: either ``0..n`` (a nonzero
difference of two monic degree-n polynomials has fewer than ``n`` roots, so
one of these ``n + 1`` points exposes it) or a few random field points drawn
by the root.
"""

from __future__ import annotations

import bisect
import enum
import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from . import kernels
from .field import Q, FieldElement, fsub, field_mul_fold
from .types import ErrorKind, ErrorSignal, NodeId, TreeInput
from .wire import SetEqMsg

RANDOM_POINTS = 3


class InputIntegrityError(ValueError):
    """A node's own input contradicts itself."""


class Mode(enum.Enum):
    DETERMINISTIC = "deterministic"
    ROOT_RANDOM = "root-random"


def check_id_list(id_list: Sequence[NodeId]) -> bool:
    """True iff the list is nonempty and strictly increasing."""
    return bool(id_list) and all(a < b for a, b in zip(id_list, id_list[1:]))


def successor(node_id: NodeId, id_list: Sequence[NodeId]) -> NodeId:
    """Next larger ID in the list, wrapping to the smallest."""
    i = bisect.bisect_left(id_list, node_id)
    if i == len(id_list) or id_list[i] != node_id:
        raise InputIntegrityError(f"id {node_id} is not in the id list")
    return id_list[(i + 1) % len(id_list)]


def deterministic_points(n: int) -> tuple[FieldElement, ...]:
    return tuple(range(n + 1))


def random_points(rng: random.Random, k: int = RANDOM_POINTS) -> tuple[FieldElement, ...]:
    return tuple(rng.randrange(Q) for _ in range(k))


def miss_probability(n: int, k: int = RANDOM_POINTS) -> float:
    """Upper bound on random points all landing on roots of the difference."""
    return (n / Q) ** k


@dataclass(frozen=True)
class EqualityRoundState:
    points: tuple[FieldElement, ...]
    own_a: FieldElement
    own_b: FieldElement

    @classmethod
    def for_node(cls, tree: TreeInput, points: Sequence[FieldElement]) -> "EqualityRoundState":
        return cls(tuple(points), tree.id, successor(tree.id, tree.id_list))


def set_equality_step(
    v: FieldElement,
    a: FieldElement,
    b: FieldElement,
    child_pairs: Sequence[tuple[FieldElement, FieldElement]],
) -> tuple[FieldElement, FieldElement]:
    """Single-point step: ``(v - a) * prod(child p0), (v - b) * prod(child p1)``."""
    p0 = field_mul_fold(fsub(v, a), [c[0] for c in child_pairs])
    p1 = field_mul_fold(fsub(v, b), [c[1] for c in child_pairs])
    return p0, p1


def batch_step(
    state: EqualityRoundState,
    child_msgs: Sequence[SetEqMsg],
) -> tuple[tuple[FieldElement, FieldElement], ...]:
    return kernels.set_equality_batch(
        state.points, state.own_a, state.own_b, [m.pairs for m in child_msgs]
    )


def root_check(
    pairs: Sequence[tuple[FieldElement, FieldElement]],
    node: NodeId,
    round_no: int = 0,
) -> Optional[ErrorSignal]:
    """One signal if any point separates the two products, naming the first."""
    bad = [i for i, (p0, p1) in enumerate(pairs) if p0 != p1]
    if not bad:
        return None
    return ErrorSignal(
        node, round_no, ErrorKind.UNIQUENESS,
        f"id multi-set differs from successor multi-set at {len(bad)} of "
        f"{len(pairs)} points (first at index {bad[0]})",
    )


def certify_unique_ids(
    trees: Mapping[NodeId, TreeInput],
    mode: Mode = Mode.DETERMINISTIC,
    rng: Optional[random.Random] = None,
) -> Optional[ErrorSignal]:
    """Run the uniqueness round synchronously over an already-certified tree.

    ``trees`` is keyed by network address, which may differ from the ID a
    node claims. Returns the root's verdict. This is the message-free
    counterpart of the round the agents run; the tests use it for
    exhaustive sweeps.
    """
    roots = [addr for addr, t in trees.items() if t.is_root]
    if len(roots) != 1:
        raise InputIntegrityError(f"expected one root, found {len(roots)}")
    root = roots[0]
    n = trees[root].n
    if mode is Mode.DETERMINISTIC:
        points = deterministic_points(n)
    else:
        points = random_points(rng or random.Random(0))

    # post-order without recursion; children are network addresses
    order: list[NodeId] = []
    stack = [root]
    while stack:
        addr = stack.pop()
        order.append(addr)
        stack.extend(trees[addr].children)
    sent: dict[NodeId, SetEqMsg] = {}
    for addr in reversed(order):
        tree = trees[addr]
        state = EqualityRoundState.for_node(tree, points)
        pairs = batch_step(state, [sent[c] for c in tree.children])
        if addr == root:
            return root_check(pairs, addr)
        sent[addr] = SetEqMsg(pairs)
    raise AssertionError("unreachable")
