"""Arithmetic in the prime field of order 2**61 - 1.

Field elements are plain ``int`` values in ``[0, Q)``. Node IDs below ``Q``
embed directly, which is what the multi-set equality check relies on.
"""

from __future__ import annotations

from typing import Iterable

Q = (1 << 61) - 1

FieldElement = int


def to_field(x: int) -> FieldElement:
    """Reduce an arbitrary integer into ``[0, Q)``."""
    return x % Q


def fadd(a: FieldElement, b: FieldElement) -> FieldElement:
    s = a + b
    return s - Q if s >= Q else s


def fsub(a: FieldElement, b: FieldElement) -> FieldElement:
    return (a + Q - b) % Q


def fmul(a: FieldElement, b: FieldElement) -> FieldElement:
    return (a * b) % Q


def field_mul_fold(init: FieldElement, factors: Iterable[FieldElement]) -> FieldElement:
    """Return ``init * prod(factors) mod Q``."""
    acc = init
    for f in factors:
        acc = (acc * f) % Q
    return acc


def is_element(x: object) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and 0 <= x < Q
