"""Shamir threshold sharing over a prime field.

The default field is GF(2^521 - 1), large enough to hold both 128-bit mask
seeds and 256-bit key-agreement exponents.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

PRIME = (1 << 521) - 1


class ShareKind(str, Enum):
    SELF_SEED = "self_seed"
    SECRET_KEY = "secret_key"


class ShareError(ValueError):
    pass


@dataclass(frozen=True)
class SeedShare:
    owner: int
    x: int
    y: int
    kind: ShareKind = ShareKind.SELF_SEED


def default_threshold(holders: int) -> int:
    return 2 * holders // 3 + 1


def _eval_poly(coeffs: Sequence[int], x: int, prime: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % prime
    return acc


def share_secret(
    value: int,
    n: int,
    t: int,
    seed: int | None = None,
    *,
    xs: Sequence[int] | None = None,
    owner: int = 0,
    kind: ShareKind = ShareKind.SELF_SEED,
    prime: int = PRIME,
) -> list[SeedShare]:
    """Split ``value`` into ``n`` shares, any ``t`` of which reconstruct it."""
    if not 2 <= t <= n:
        raise ShareError(f"threshold must satisfy 2 <= t <= n, got t={t}, n={n}")
    if not 0 <= value < prime:
        raise ShareError("secret does not fit in the field")
    xs = list(range(1, n + 1)) if xs is None else list(xs)
    if len(xs) != n or len(set(x % prime for x in xs)) != n or any(x % prime == 0 for x in xs):
        raise ShareError("evaluation points must be n distinct nonzero field elements")
    rng = random.Random(seed) if seed is not None else random.SystemRandom()
    coeffs = [value] + [rng.randrange(prime) for _ in range(t - 1)]
    return [SeedShare(owner, x, _eval_poly(coeffs, x, prime), kind) for x in xs]


def _interpolate_at(points: Sequence[tuple[int, int]], at: int, prime: int) -> int:
    total = 0
    for i, (xi, yi) in enumerate(points):
        num, den = 1, 1
        for j, (xj, _) in enumerate(points):
            if i != j:
                num = num * (at - xj) % prime
                den = den * (xi - xj) % prime
        total = (total + yi * num * pow(den, -1, prime)) % prime
    return total


def reconstruct_secret(shares: Iterable[SeedShare], t: int, prime: int = PRIME) -> int:
    """Lagrange interpolation at zero.

    Extra shares beyond ``t`` are checked against the interpolated polynomial,
    so shares of different secrets are rejected instead of silently mixed.
    """
    shares = list(shares)
    if len(shares) < t:
        raise ShareError(f"need {t} shares, got {len(shares)}")
    if len({s.x % prime for s in shares}) != len(shares):
        raise ShareError("duplicate evaluation points")
    if len({(s.owner, s.kind) for s in shares}) != 1:
        raise ShareError("shares belong to different secrets")
    base = [(s.x, s.y) for s in shares[:t]]
    for s in shares[t:]:
        if _interpolate_at(base, s.x, prime) != s.y % prime:
            raise ShareError("inconsistent shares: not on a single degree t-1 polynomial")
    return _interpolate_at(base, 0, prime)
