"""Authenticated encryption between two parties holding a pairwise seed.

ChaCha20-Poly1305 with a key derived per (seed, message kind) and a nonce
built from (round, sender, recipient), so ciphertexts are deterministic for a
fixed seed and no nonce repeats under one key.
"""

from __future__ import annotations

import hashlib
import struct

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305


class IntegrityError(ValueError):
    pass


def _key(seed: bytes, kind: int) -> bytes:
    return hashlib.sha256(b"clipsim/aead" + bytes([kind]) + seed).digest()


def _nonce(round_id: int, sender: int, recipient: int) -> bytes:
    return struct.pack(">III", round_id, sender, recipient)


def seal(seed: bytes, kind: int, round_id: int, sender: int, recipient: int, plaintext: bytes) -> bytes:
    return ChaCha20Poly1305(_key(seed, kind)).encrypt(
        _nonce(round_id, sender, recipient), plaintext, bytes([kind])
    )


def open_sealed(seed: bytes, kind: int, round_id: int, sender: int, recipient: int, ciphertext: bytes) -> bytes:
    try:
        return ChaCha20Poly1305(_key(seed, kind)).decrypt(
            _nonce(round_id, sender, recipient), ciphertext, bytes([kind])
        )
    except InvalidTag as exc:
        raise IntegrityError(
            f"ciphertext from {sender} to {recipient} (round {round_id}) failed authentication"
        ) from exc
