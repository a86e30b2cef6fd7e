"""Binary wire format for protocol messages.

Every frame is::

    u32 length | u32 round | u32 sender | u8 kind | payload

with ``length`` counting the bytes after itself, all integers big-endian.
Relayed ciphertexts prefix their payload with ``u32 recipient``. The server
uses sender id ``SERVER``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

SERVER = 0xFFFFFFFF
_HEADER = struct.Struct(">IIIB")


class Kind(IntEnum):
    PUBLIC_KEY = 1
    KEY_SHARE = 2
    SEED_SHARE = 3
    MASKED_INPUT = 4
    UNMASK_REQUEST = 5
    UNMASK_SHARES = 6
    FIT_TIME = 7
    NETWORK_TIME = 8


@dataclass(frozen=True)
class Message:
    round_id: int
    sender: int
    kind: Kind
    payload: bytes

    def encode(self) -> bytes:
        return _HEADER.pack(_HEADER.size - 4 + len(self.payload), self.round_id, self.sender, int(self.kind)) + self.payload

    @classmethod
    def decode(cls, frame: bytes) -> "Message":
        length, round_id, sender, kind = _HEADER.unpack_from(frame)
        if length + 4 != len(frame):
            raise ValueError(f"frame length {len(frame)} does not match header ({length + 4})")
        return cls(round_id, sender, Kind(kind), bytes(frame[_HEADER.size:]))


def decode_stream(data: bytes) -> list[Message]:
    out, pos = [], 0
    while pos < len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        out.append(Message.decode(data[pos:pos + 4 + length]))
        pos += 4 + length
    return out


def addressed(recipient: int, body: bytes) -> bytes:
    return struct.pack(">I", recipient) + body


def split_addressed(payload: bytes) -> tuple[int, bytes]:
    return struct.unpack_from(">I", payload)[0], payload[4:]


def encode_vector(vec: np.ndarray) -> bytes:
    return np.asarray(vec, dtype="<u8").tobytes()


def decode_vector(payload: bytes) -> np.ndarray:
    return np.frombuffer(payload, dtype="<u8").astype(np.uint64)


@dataclass
class Relay:
    """The server's network position: every frame routed through it is logged."""

    transcript: list[bytes] = field(default_factory=list)

    def carry(self, msg: Message) -> Message:
        frame = msg.encode()
        self.transcript.append(frame)
        return Message.decode(frame)

    def dump(self) -> bytes:
        return b"".join(self.transcript)
