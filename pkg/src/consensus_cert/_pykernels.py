"""Pure-Python kernels. Same contract as ``_ckernels``."""

from __future__ import annotations

from typing import Sequence

Q = (1 << 61) - 1


def mul_fold(init: int, factors: Sequence[int]) -> int:
    acc = init
    for f in factors:
        acc = acc * f % Q
    return acc


def set_equality_batch(
    points: Sequence[int],
    a: int,
    b: int,
    child_pairs: Sequence[Sequence[tuple[int, int]]],
) -> tuple[tuple[int, int], ...]:
    """Fold ``(v - a, v - b)`` with every child's pair at each point ``v``."""
    k = len(points)
    if any(len(pairs) != k for pairs in child_pairs):
        raise ValueError("child pair count does not match point count")
    out = []
    for i, v in enumerate(points):
        p0 = (v + Q - a) % Q
        p1 = (v + Q - b) % Q
        for pairs in child_pairs:
            c0, c1 = pairs[i]
            p0 = p0 * c0 % Q
            p1 = p1 * c1 % Q
        out.append((p0, p1))
    return tuple(out)
