"""Finite-field Diffie-Hellman over the RFC 7919 ffdhe3072 group.

The modulus is a safe prime p = 2q + 1 and g = 2 generates the subgroup of
prime order q. Secret exponents are 256-bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import gmpy2

P = int(
    "FFFFFFFFFFFFFFFFADF85458A2BB4A9AAFDC5620273D3CF1D8B9C583CE2D3695A9E13641146433FBCC939DCE249B3EF9"
    "7D2FE363630C75D8F681B202AEC4617AD3DF1ED5D5FD65612433F51F5F066ED0856365553DED1AF3B557135E7F57C935"
    "984F0C70E0E68B77E2A689DAF3EFE8721DF158A136ADE73530ACCA4F483A797ABC0AB182B324FB61D108A94BB2C8E3FB"
    "B96ADAB760D7F4681D4F42A3DE394DF4AE56EDE76372BB190B07A7C8EE0A6D709E02FCE1CDF7E2ECC03404CD28342F61"
    "9172FE9CE98583FF8E4F1232EEF28183C3FE3B1B4C6FAD733BB5FCBC2EC22005C58EF1837D1683B2C6F34A26C1B2EFFA"
    "886B4238611FCFDCDE355B3B6519035BBC34F4DEF99C023861B46FC9D6E6C9077AD91D2691F7F7EE598CB0FAC186D91C"
    "AEFE130985139270B4130C93BC437944F4FD4452E2D74DD364F2E21E71F54BFF5CAE82AB9C9DF69EE86D2BC522363A0D"
    "ABC521979B0DEADA1DBF9A42D5C4484E0ABCD06BFA53DDEF3C1B20EE3FD59D7C25E41D2B66C62E37FFFFFFFFFFFFFFFF",
    16,
)
Q = (P - 1) // 2
G = 2
PUBLIC_BYTES = (P.bit_length() + 7) // 8
SECRET_BITS = 256

_P = gmpy2.mpz(P)


@dataclass(frozen=True)
class ClientKeys:
    secret: int
    public: int
    self_seed: bytes  # base for per-round self-mask seeds

    @classmethod
    def generate(cls, entropy: bytes) -> "ClientKeys":
        """Deterministic key generation from caller-provided entropy."""
        material = hashlib.shake_256(b"clipsim/keygen" + entropy).digest(SECRET_BITS // 8 + 16)
        secret = int.from_bytes(material[:SECRET_BITS // 8], "big") % (Q - 2) + 2
        return cls(secret, public_key(secret), material[SECRET_BITS // 8:])


def public_key(secret: int) -> int:
    return int(gmpy2.powmod(G, secret, _P))


def encode_public(public: int) -> bytes:
    return public.to_bytes(PUBLIC_BYTES, "big")


def decode_public(data: bytes) -> int:
    value = int.from_bytes(data, "big")
    if not 1 < value < P - 1:
        raise ValueError("public key outside the group")
    return value


def agree_pairwise(secret_u: int, public_v: int) -> bytes:
    """Shared 128-bit seed: SHA-256 of g^(uv) truncated to 16 bytes."""
    if not 1 < public_v < P - 1:
        raise ValueError("public key outside the group")
    shared = int(gmpy2.powmod(public_v, secret_u, _P))
    return hashlib.sha256(b"clipsim/agree" + shared.to_bytes(PUBLIC_BYTES, "big")).digest()[:16]


def derive_seed(base: bytes, round_id: int, label: bytes) -> bytes:
    """Per-round 128-bit seed from a long-lived secret."""
    return hashlib.sha256(label + round_id.to_bytes(8, "big") + base).digest()[:16]
