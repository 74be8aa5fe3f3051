"""Byte-exact encoding of certification messages.

Layout: one tag byte, then the body. Integers are unsigned LEB128 varints,
field elements are 8 bytes little-endian, lists carry a varint length.

=========  ===  ==========================================================
message    tag  body
=========  ===  ==========================================================
Structure  1    root, depth, subtree count
SetEq      2    k, then k pairs (p0, p1)
Combined   3    varint(len << 1 | digested), decision bytes, witness byte
Challenge  4    k, then k evaluation points
=========  ===  ==========================================================
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Union

from .digest import DIGEST_WIDTHS, RAW_LIMIT, WireDecision
from .field import Q

MAX_VARINT_BYTES = 10


class MalformedMessage(ValueError):
    pass


class Tag(enum.IntEnum):
    STRUCTURE = 1
    SETEQ = 2
    COMBINED = 3
    CHALLENGE = 4


@dataclass(frozen=True)
class StructureMsg:
    claimed_root: int
    sender_depth: int
    subtree_count: int
    tag = Tag.STRUCTURE


@dataclass(frozen=True)
class SetEqMsg:
    pairs: tuple[tuple[int, int], ...]
    tag = Tag.SETEQ


@dataclass(frozen=True)
class CombinedMsg:
    decision: WireDecision
    witness_found: bool
    tag = Tag.COMBINED


@dataclass(frozen=True)
class ChallengeMsg:
    points: tuple[int, ...]
    tag = Tag.CHALLENGE


CertMessage = Union[StructureMsg, SetEqMsg, CombinedMsg, ChallengeMsg]


def encode_varint(x: int) -> bytes:
    if x < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        b = x & 0x7F
        x >>= 7
        if x:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def decode_varint(buf: bytes, pos: int) -> tuple[int, int]:
    """Return ``(value, next_pos)``."""
    result = 0
    shift = 0
    for i in range(MAX_VARINT_BYTES):
        if pos + i >= len(buf):
            raise MalformedMessage("truncated varint")
        b = buf[pos + i]
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos + i + 1
        shift += 7
    raise MalformedMessage("varint longer than 10 bytes")


def _check_elements(values) -> None:
    for v in values:
        if not 0 <= v < Q:
            raise ValueError(f"field element out of range: {v}")


def encode(msg: CertMessage) -> bytes:
    if isinstance(msg, StructureMsg):
        return (
            bytes((Tag.STRUCTURE,))
            + encode_varint(msg.claimed_root)
            + encode_varint(msg.sender_depth)
            + encode_varint(msg.subtree_count)
        )
    if isinstance(msg, SetEqMsg):
        flat = [v for pair in msg.pairs for v in pair]
        _check_elements(flat)
        return (
            bytes((Tag.SETEQ,))
            + encode_varint(len(msg.pairs))
            + struct.pack(f"<{len(flat)}Q", *flat)
        )
    if isinstance(msg, CombinedMsg):
        d = msg.decision
        return (
            bytes((Tag.COMBINED,))
            + encode_varint(len(d.value) << 1 | int(d.digested))
            + d.value
            + bytes((int(msg.witness_found),))
        )
    if isinstance(msg, ChallengeMsg):
        _check_elements(msg.points)
        return (
            bytes((Tag.CHALLENGE,))
            + encode_varint(len(msg.points))
            + struct.pack(f"<{len(msg.points)}Q", *msg.points)
        )
    raise TypeError(f"not a certification message: {msg!r}")


def _take(buf: bytes, pos: int, n: int) -> tuple[bytes, int]:
    if pos + n > len(buf):
        raise MalformedMessage("truncated body")
    return buf[pos:pos + n], pos + n


def _unpack_elements(buf: bytes, pos: int, count: int) -> tuple[tuple[int, ...], int]:
    raw, pos = _take(buf, pos, 8 * count)
    values = struct.unpack(f"<{count}Q", raw)
    if any(v >= Q for v in values):
        raise MalformedMessage("field element out of range")
    return values, pos


def decode(buf: bytes) -> CertMessage:
    if not buf:
        raise MalformedMessage("empty message")
    try:
        tag = Tag(buf[0])
    except ValueError:
        raise MalformedMessage(f"unknown tag {buf[0]}") from None
    pos = 1
    if tag is Tag.STRUCTURE:
        root, pos = decode_varint(buf, pos)
        depth, pos = decode_varint(buf, pos)
        count, pos = decode_varint(buf, pos)
        msg: CertMessage = StructureMsg(root, depth, count)
    elif tag is Tag.SETEQ:
        k, pos = decode_varint(buf, pos)
        flat, pos = _unpack_elements(buf, pos, 2 * k)
        msg = SetEqMsg(tuple(zip(flat[0::2], flat[1::2])))
    elif tag is Tag.COMBINED:
        header, pos = decode_varint(buf, pos)
        length, digested = header >> 1, bool(header & 1)
        if digested and length not in DIGEST_WIDTHS or not digested and length > RAW_LIMIT:
            raise MalformedMessage(f"bad decision length {length}")
        value, pos = _take(buf, pos, length)
        flag, pos = _take(buf, pos, 1)
        if flag[0] > 1:
            raise MalformedMessage("witness flag must be 0 or 1")
        msg = CombinedMsg(WireDecision(value, digested), bool(flag[0]))
    else:
        k, pos = decode_varint(buf, pos)
        points, pos = _unpack_elements(buf, pos, k)
        msg = ChallengeMsg(points)
    if pos != len(buf):
        raise MalformedMessage(f"{len(buf) - pos} trailing bytes")
    return msg


def summarize(msg: CertMessage) -> str:
    """Short human-readable payload description for traces."""
    if isinstance(msg, StructureMsg):
        return f"Structure(root={msg.claimed_root},depth={msg.sender_depth},count={msg.subtree_count})"
    if isinstance(msg, SetEqMsg):
        return f"SetEq(k={len(msg.pairs)})"
    if isinstance(msg, CombinedMsg):
        return f"Combined({msg.decision.summary()},witness={int(msg.witness_found)})"
    return f"Challenge(k={len(msg.points)})"
