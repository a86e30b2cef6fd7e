"""Fixed-point encoding into Z/2^64 and PRG mask expansion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

MODULUS = 1 << 64
ELEMENT_BYTES = 8


@dataclass(frozen=True)
class RingParams:
    scale: int = 1 << 16
    clip: float = 8.0

    def __post_init__(self):
        if self.scale < 1 or self.scale & (self.scale - 1):
            raise ValueError(f"scale must be a power of two, got {self.scale}")
        if self.clip <= 0:
            raise ValueError("clip must be positive")

    @property
    def modulus(self) -> int:
        return MODULUS

    def max_clients(self) -> int:
        # signed decoding needs |sum| < modulus / 2
        return int((MODULUS // 2 - 1) // (self.scale * self.clip))

    def check_capacity(self, n_clients: int) -> None:
        if n_clients > self.max_clients():
            raise ValueError(
                f"{n_clients} clients x scale {self.scale} x clip {self.clip} overflows the ring"
            )


def quantize(delta: np.ndarray, params: RingParams) -> np.ndarray:
    x = np.clip(np.asarray(delta, dtype=np.float64), -params.clip, params.clip)
    return np.rint(x * params.scale).astype(np.int64).view(np.uint64)


def ring_sum(vectors) -> np.ndarray:
    """Exact sum mod 2^64 (uint64 addition wraps)."""
    it = iter(vectors)
    total = np.array(next(it), dtype=np.uint64, copy=True)
    for v in it:
        total += v
    return total


def dequantize_sum(total: np.ndarray, n_clients: int, params: RingParams) -> np.ndarray:
    """Signed decode of a ring sum, then the federated average over ``n_clients``."""
    if n_clients < 1:
        raise ValueError("n_clients must be >= 1")
    signed = np.asarray(total, dtype=np.uint64).view(np.int64).astype(np.float64)
    return signed / params.scale / n_clients


def expand_mask(seed: bytes, length: int) -> np.ndarray:
    """Expand a 128-bit seed into ``length`` uniform ring elements (AES-128-CTR keystream)."""
    if len(seed) != 16:
        raise ValueError("mask seeds are 16 bytes")
    enc = Cipher(algorithms.AES(seed), modes.CTR(bytes(16))).encryptor()
    stream = enc.update(bytes(ELEMENT_BYTES * length)) + enc.finalize()
    return np.frombuffer(stream, dtype="<u8").astype(np.uint64)
