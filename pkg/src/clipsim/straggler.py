"""Client-side straggler self-identification and sub-model sizing.

Clients exchange fit times encrypted under their pairwise secrets; the server
only relays ciphertexts. Each client then ranks the times itself and, if it
lands among the slowest ``ceil(percentile * n)``, sizes its sub-model.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Mapping, Sequence

from .secagg import channel
from .secagg.messages import SERVER, Kind, Message, Relay, addressed, split_addressed

__all__ = [
    "NetworkTimeReport",
    "StragglerContext",
    "straggler_count",
    "rank_stragglers",
    "seal_fit_time",
    "open_fit_time",
    "broadcast_fit_times",
    "self_identify",
    "submodel_fraction_compute",
    "submodel_fraction_network",
]


@dataclass(frozen=True)
class NetworkTimeReport:
    """Per-client upload/download seconds as measured by the server."""

    upload: tuple[float, ...]
    download: tuple[float, ...]

    def __post_init__(self):
        if len(self.upload) != len(self.download):
            raise ValueError("one upload and one download time per client")
        if any(t < 0 for t in self.upload + self.download):
            raise ValueError("network times must be nonnegative")

    def to_message(self, round_id: int) -> Message:
        n = len(self.upload)
        return Message(round_id, SERVER, Kind.NETWORK_TIME, struct.pack(f">I{2 * n}d", n, *self.upload, *self.download))

    @classmethod
    def from_message(cls, msg: Message) -> "NetworkTimeReport":
        (n,) = struct.unpack_from(">I", msg.payload)
        vals = struct.unpack_from(f">{2 * n}d", msg.payload, 4)
        return cls(tuple(vals[:n]), tuple(vals[n:]))


def straggler_count(n: int, percentile: float) -> int:
    # round() first: 0.2 * 15 would otherwise ceil to 4
    m = math.ceil(round(percentile * n, 9))
    if not 0 <= m < n:
        raise ValueError(f"percentile {percentile} leaves no non-straggler among {n} clients")
    return m


def rank_stragglers(fit_times: Sequence[float], percentile: float) -> frozenset[int]:
    """The slowest ceil(percentile * n) clients; on ties the lower id stays a non-straggler."""
    order = sorted(range(len(fit_times)), key=lambda c: (fit_times[c], c))
    m = straggler_count(len(fit_times), percentile)
    return frozenset(order[len(order) - m:]) if m else frozenset()


@dataclass(frozen=True)
class StragglerContext:
    client: int
    fit_times: tuple[float, ...]
    percentile: float = 0.20
    network: NetworkTimeReport | None = None

    @property
    def n_stragglers(self) -> int:
        return straggler_count(len(self.fit_times), self.percentile)

    @property
    def stragglers(self) -> frozenset[int]:
        return rank_stragglers(self.fit_times, self.percentile)

    @property
    def own_fit(self) -> float:
        return self.fit_times[self.client]

    @property
    def slowest_non_straggler_fit(self) -> float:
        s = self.stragglers
        return max(t for c, t in enumerate(self.fit_times) if c not in s)

    @property
    def target_completion(self) -> float:
        """Latest fit + upload finish among non-stragglers."""
        if self.network is None:
            raise ValueError("no network report in this context")
        s = self.stragglers
        return max(t + self.network.upload[c] for c, t in enumerate(self.fit_times) if c not in s)

    @property
    def own_upload(self) -> float:
        if self.network is None:
            raise ValueError("no network report in this context")
        return self.network.upload[self.client]


def seal_fit_time(seed: bytes, round_id: int, sender: int, recipient: int, seconds: float) -> Message:
    ct = channel.seal(seed, Kind.FIT_TIME, round_id, sender, recipient, struct.pack(">d", seconds))
    return Message(round_id, sender, Kind.FIT_TIME, addressed(recipient, ct))


def open_fit_time(msg: Message, seed: bytes, recipient: int) -> float:
    to, ct = split_addressed(msg.payload)
    if to != recipient:
        raise ValueError(f"fit-time packet for {to} delivered to {recipient}")
    (seconds,) = struct.unpack(">d", channel.open_sealed(seed, Kind.FIT_TIME, msg.round_id, msg.sender, recipient, ct))
    return seconds


def broadcast_fit_times(
    times: Sequence[float],
    pairwise_seeds: Mapping[tuple[int, int], bytes],
    round_id: int = 1,
    relay: Relay | None = None,
    percentile: float = 0.20,
    network: NetworkTimeReport | None = None,
) -> list[StragglerContext]:
    """All-to-all encrypted broadcast through the relay.

    ``pairwise_seeds[(u, v)]`` is the secret client ``u`` shares with ``v``
    (each side holds its own copy). Returns one context per client, built
    only from what that client decrypted.
    """
    n = len(times)
    relay = relay if relay is not None else Relay()
    net_msg = relay.carry(network.to_message(round_id)) if network is not None else None
    inbox: list[dict[int, float]] = [{u: float(times[u])} for u in range(n)]
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            try:
                out_seed, in_seed = pairwise_seeds[(u, v)], pairwise_seeds[(v, u)]
            except KeyError:
                raise ValueError(f"no pairwise seed between clients {u} and {v}") from None
            msg = relay.carry(seal_fit_time(out_seed, round_id, u, v, times[u]))
            inbox[v][u] = open_fit_time(msg, in_seed, v)
    report = NetworkTimeReport.from_message(net_msg) if net_msg is not None else None
    return [
        StragglerContext(v, tuple(inbox[v][u] for u in range(n)), percentile, report)
        for v in range(n)
    ]


def self_identify(ctx: StragglerContext) -> bool:
    return ctx.client in ctx.stragglers


def _clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def submodel_fraction_compute(fit_k: float, fit_ns: float, floor: float) -> float:
    """Fraction that brings a straggler's fit down to the slowest non-straggler's."""
    if fit_k <= 0 or fit_ns <= 0:
        raise ValueError("fit times must be positive")
    if not 0 < floor <= 1:
        raise ValueError(f"floor must be in (0, 1], got {floor}")
    return _clamp(fit_ns / fit_k, floor, 1.0)


def submodel_fraction_network(fit_full_k: float, upload_k: float, target_completion: float, floor: float) -> float:
    """Over-prune so fit + fixed-size upload ends by ``target_completion``."""
    if fit_full_k <= 0 or upload_k <= 0 or target_completion <= 0:
        raise ValueError("times must be positive")
    if not 0 < floor <= 1:
        raise ValueError(f"floor must be in (0, 1], got {floor}")
    return _clamp((target_completion - upload_k) / fit_full_k, floor, 1.0)
