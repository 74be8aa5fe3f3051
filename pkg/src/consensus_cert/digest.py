"""Decision digests and the raw-or-digest wire form of a decision value."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

DIGEST_WIDTHS = (8, 32)
DEFAULT_WIDTH = 32
# decisions up to this many bytes travel unhashed
RAW_LIMIT = 8


def digest_value(value: bytes, width: int = DEFAULT_WIDTH) -> bytes:
    """SHA-256 of ``value`` truncated to ``width`` bytes."""
    if width not in DIGEST_WIDTHS:
        raise ValueError(f"digest width must be one of {DIGEST_WIDTHS}, got {width}")
    return hashlib.sha256(value).digest()[:width]


@dataclass(frozen=True)
class WireDecision:
    """A decision as it appears on the wire.

    Short values are carried verbatim; anything longer than ``RAW_LIMIT``
    bytes is replaced by its digest. Two decisions compare equal exactly when
    their wire forms do, so a long proposal validates a long decision through
    digest equality.
    """

    value: bytes
    digested: bool = False

    def __post_init__(self) -> None:
        if self.digested:
            if len(self.value) not in DIGEST_WIDTHS:
                raise ValueError(f"digest must be 8 or 32 bytes, got {len(self.value)}")
        elif len(self.value) > RAW_LIMIT:
            raise ValueError(f"raw decision longer than {RAW_LIMIT} bytes")

    def summary(self) -> str:
        kind = "h" if self.digested else "r"
        return f"{kind}:{self.value.hex()}"


def to_wire(value: bytes, width: int = DEFAULT_WIDTH) -> WireDecision:
    if len(value) <= RAW_LIMIT:
        return WireDecision(bytes(value), False)
    return WireDecision(digest_value(value, width), True)
