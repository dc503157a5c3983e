"""Wire format for the five protocol messages.

Everything is little-endian and bit-exact: header = type(1) || sender(8) ||
iteration(8), followed by a type-specific payload. Serialized lengths are
the unit of bandwidth accounting, so nothing here may be approximate.

    SETUP_SHARE   target BS id(8) || share x(8) || share y(8)
    MASKED_UPDATE dim(4) || field elements(8 each)
    ONLINE_LIST   count(4) || sorted UE ids(8 each)
    MASK_SHARE    mode(1) || dim(4) + elements   (EVALUATED)
                  mode(1) || scalar(8)           (COMPACT)
    GLOBAL_MODEL  dim(4) || float64 weights(8 each)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from .shamir import SecretShare

SETUP_SHARE = 1
MASKED_UPDATE = 2
ONLINE_LIST = 3
MASK_SHARE = 4
GLOBAL_MODEL = 5

HEADER_LEN = 17
_HEADER = struct.Struct("<BQQ")


class MaskShareMode(IntEnum):
    """How a base station ships its per-round contribution: the evaluated
    mask vector, or just the summed key share for the server to expand."""

    EVALUATED = 0
    COMPACT = 1


def _pack_header(msg_type: int, sender: int, iteration: int) -> bytes:
    return _HEADER.pack(msg_type, sender, iteration)


@dataclass(frozen=True)
class SetupShareMsg:
    sender: int
    iteration: int
    target_bs: int
    share: SecretShare

    def to_bytes(self) -> bytes:
        return _pack_header(SETUP_SHARE, self.sender, self.iteration) + struct.pack(
            "<QQQ", self.target_bs, self.share.x, self.share.y
        )


@dataclass(frozen=True)
class MaskedUpdateMsg:
    sender: int
    iteration: int
    payload: tuple[int, ...]  # encoded update + mask, in Z_p

    def to_bytes(self) -> bytes:
        head = _pack_header(MASKED_UPDATE, self.sender, self.iteration)
        return head + struct.pack("<I", len(self.payload)) + struct.pack(
            f"<{len(self.payload)}Q", *self.payload
        )


@dataclass(frozen=True)
class OnlineListMsg:
    sender: int
    iteration: int
    ue_ids: tuple[int, ...]  # sorted ascending

    def to_bytes(self) -> bytes:
        head = _pack_header(ONLINE_LIST, self.sender, self.iteration)
        return head + struct.pack("<I", len(self.ue_ids)) + struct.pack(
            f"<{len(self.ue_ids)}Q", *self.ue_ids
        )


@dataclass(frozen=True)
class MaskShareMsg:
    sender: int
    iteration: int
    mode: MaskShareMode
    vector: tuple[int, ...] | None = None  # EVALUATED payload
    scalar: int | None = None  # COMPACT payload

    def __post_init__(self):
        if self.mode is MaskShareMode.EVALUATED and self.vector is None:
            raise ValueError("EVALUATED mask share needs a vector payload")
        if self.mode is MaskShareMode.COMPACT and self.scalar is None:
            raise ValueError("COMPACT mask share needs a scalar payload")

    def to_bytes(self) -> bytes:
        head = _pack_header(MASK_SHARE, self.sender, self.iteration)
        if self.mode is MaskShareMode.EVALUATED:
            body = struct.pack("<I", len(self.vector)) + struct.pack(
                f"<{len(self.vector)}Q", *self.vector
            )
        else:
            body = struct.pack("<Q", self.scalar)
        return head + bytes([self.mode]) + body


@dataclass(frozen=True)
class GlobalModelMsg:
    sender: int
    iteration: int
    weights: tuple[float, ...]

    def to_bytes(self) -> bytes:
        head = _pack_header(GLOBAL_MODEL, self.sender, self.iteration)
        return head + struct.pack("<I", len(self.weights)) + struct.pack(
            f"<{len(self.weights)}d", *self.weights
        )


Message = SetupShareMsg | MaskedUpdateMsg | OnlineListMsg | MaskShareMsg | GlobalModelMsg


def from_bytes(data: bytes) -> Message:
    """Decode a serialized message; inverse of ``to_bytes`` bit for bit."""
    if len(data) < HEADER_LEN:
        raise ValueError("truncated header")
    msg_type, sender, iteration = _HEADER.unpack_from(data)
    body = data[HEADER_LEN:]
    if msg_type == SETUP_SHARE:
        target_bs, x, y = struct.unpack("<QQQ", body)
        return SetupShareMsg(sender, iteration, target_bs, SecretShare(x, y))
    if msg_type == MASKED_UPDATE:
        (dim,) = struct.unpack_from("<I", body)
        return MaskedUpdateMsg(sender, iteration, struct.unpack_from(f"<{dim}Q", body, 4))
    if msg_type == ONLINE_LIST:
        (count,) = struct.unpack_from("<I", body)
        return OnlineListMsg(sender, iteration, struct.unpack_from(f"<{count}Q", body, 4))
    if msg_type == MASK_SHARE:
        mode = MaskShareMode(body[0])
        if mode is MaskShareMode.EVALUATED:
            (dim,) = struct.unpack_from("<I", body, 1)
            vec = struct.unpack_from(f"<{dim}Q", body, 5)
            return MaskShareMsg(sender, iteration, mode, vector=vec)
        (scalar,) = struct.unpack_from("<Q", body, 1)
        return MaskShareMsg(sender, iteration, mode, scalar=scalar)
    if msg_type == GLOBAL_MODEL:
        (dim,) = struct.unpack_from("<I", body)
        return GlobalModelMsg(sender, iteration, struct.unpack_from(f"<{dim}d", body, 4))
    raise ValueError(f"unknown message type {msg_type}")


def wire_length(msg: Message) -> int:
    return len(msg.to_bytes())


def payload_length(msg: Message) -> int:
    """Bytes after the fixed 17-byte header."""
    return wire_length(msg) - HEADER_LEN
