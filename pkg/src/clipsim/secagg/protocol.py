"""Masked aggregation over a k-regular graph with dropout recovery.

Flow of one session:

1. setup: every client publishes a public key through the server, agrees a
   long-lived secret with every peer, and Shamir-shares its secret exponent
   with its graph neighbors (encrypted, relayed by the server);
2. per round: every client shares a fresh self-mask seed with its neighbors,
   then uploads ``quantized + self mask + signed pairwise masks``;
3. the server announces survivors and dropped clients; survivors return the
   self-seed shares of survivors and the key shares of dropped clients;
4. the server strips self masks and the pairwise masks that dropped clients
   left uncancelled, leaving the exact ring sum of the survivors' inputs.

A dropped client's secret exponent is revealed in step 4, so it must rekey
before it rejoins.
"""

from __future__ import annotations

import hashlib
import struct
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import channel
from .graph import CommGraph, build_k_regular
from .keys import ClientKeys, agree_pairwise, decode_public, derive_seed, encode_public
from .messages import SERVER, Kind, Message, Relay, addressed, decode_vector, encode_vector, split_addressed
from .ring import RingParams, expand_mask, ring_sum
from .shamir import PRIME, SeedShare, ShareError, ShareKind, default_threshold, reconstruct_secret, share_secret

PAIR_LABEL = b"clipsim/pair"
SELF_LABEL = b"clipsim/self"

_KIND_CODE = {ShareKind.SELF_SEED: 0, ShareKind.SECRET_KEY: 1}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}
_Y_BYTES = (PRIME.bit_length() + 7) // 8
_SHARE = struct.Struct(f">IBII{_Y_BYTES}s")


class AbortedRound(RuntimeError):
    """Unmasking could not complete (too few shares)."""


@dataclass(frozen=True)
class MaskedUpdate:
    client: int
    vector: np.ndarray


def pair_seed(shared: bytes, round_id: int) -> bytes:
    return derive_seed(shared, round_id, PAIR_LABEL)


def mask_update(
    quantized: np.ndarray,
    client: int,
    graph: CommGraph,
    pairwise_seeds: Mapping[int, bytes],
    self_seed: bytes | None,
) -> MaskedUpdate:
    """Add the self mask and one signed pairwise mask per neighbor.

    The pairwise mask for edge (u, v) enters with ``+`` at the lower id and
    ``-`` at the higher id, so it cancels in the sum.
    """
    vec = np.array(quantized, dtype=np.uint64, copy=True)
    if self_seed is not None:
        vec += expand_mask(self_seed, vec.size)
    for v in sorted(graph.neighbors(client)):
        if v not in pairwise_seeds:
            raise KeyError(f"client {client} has no pairwise seed for neighbor {v}")
        m = expand_mask(pairwise_seeds[v], vec.size)
        if client < v:
            vec += m
        else:
            vec -= m
    return MaskedUpdate(client, vec)


def _group(shares: Iterable[SeedShare]) -> dict[tuple[int, ShareKind], list[SeedShare]]:
    out: dict[tuple[int, ShareKind], list[SeedShare]] = defaultdict(list)
    for s in shares:
        out[(s.owner, s.kind)].append(s)
    return out


def _recover(groups, owner: int, kind: ShareKind, threshold: int) -> int:
    got = groups.get((owner, kind), [])
    if len(got) < threshold:
        raise AbortedRound(f"only {len(got)} of {threshold} {kind.value} shares for client {owner}")
    try:
        return reconstruct_secret(sorted(got, key=lambda s: s.x)[:threshold], threshold)
    except ShareError as exc:
        raise AbortedRound(f"cannot reconstruct {kind.value} of client {owner}: {exc}") from exc


def unmask_aggregate(
    masked: Sequence[MaskedUpdate],
    survivors: Iterable[int],
    dropped: Iterable[int],
    shares: Iterable[SeedShare],
    graph: CommGraph,
    public_keys: Mapping[int, int],
    round_id: int,
    threshold: int,
) -> np.ndarray:
    """Ring sum of the survivors' quantized inputs."""
    survivors, dropped = set(survivors), set(dropped)
    if survivors & dropped:
        raise ValueError("a client cannot both survive and drop")
    if {m.client for m in masked} != survivors:
        raise ValueError("masked inputs must come from exactly the survivors")
    if not masked:
        raise AbortedRound("no surviving inputs")
    total = ring_sum(m.vector for m in masked)
    length = total.size
    groups = _group(shares)
    for u in sorted(survivors):
        seed = _recover(groups, u, ShareKind.SELF_SEED, threshold)
        total -= expand_mask(seed.to_bytes(16, "big"), length)
    for d in sorted(dropped):
        secret = _recover(groups, d, ShareKind.SECRET_KEY, threshold)
        for v in sorted(graph.neighbors(d) & survivors):
            m = expand_mask(pair_seed(agree_pairwise(secret, public_keys[v]), round_id), length)
            # undo what v added for edge (v, d)
            if v < d:
                total -= m
            else:
                total += m
    return total


def _encode_share(share: SeedShare, round_id: int) -> bytes:
    return _SHARE.pack(share.owner, _KIND_CODE[share.kind], round_id, share.x, share.y.to_bytes(_Y_BYTES, "big"))


def _decode_share(data: bytes) -> tuple[SeedShare, int]:
    owner, kind, round_id, x, y = _SHARE.unpack(data)
    return SeedShare(owner, x, int.from_bytes(y, "big"), _CODE_KIND[kind]), round_id


def _encode_ids(ids: Iterable[int]) -> bytes:
    ids = sorted(ids)
    return struct.pack(f">I{len(ids)}I", len(ids), *ids)


def _decode_ids(data: bytes, pos: int) -> tuple[list[int], int]:
    (n,) = struct.unpack_from(">I", data, pos)
    return list(struct.unpack_from(f">{n}I", data, pos + 4)), pos + 4 + 4 * n


class Client:
    """One party's protocol state."""

    def __init__(self, cid: int, graph: CommGraph, entropy: bytes, threshold: int | None = None):
        self.cid = cid
        self.graph = graph
        self.keys = ClientKeys.generate(entropy)
        self.threshold = threshold or default_threshold(graph.k)
        self.shared: dict[int, bytes] = {}
        self.held: dict[tuple[int, ShareKind, int], SeedShare] = {}

    @property
    def neighbors(self) -> list[int]:
        return sorted(self.graph.neighbors(self.cid))

    def public_key_message(self) -> Message:
        return Message(0, self.cid, Kind.PUBLIC_KEY, encode_public(self.keys.public))

    def receive_public_keys(self, table: Mapping[int, int]) -> None:
        for v, pk in table.items():
            if v != self.cid:
                self.shared[v] = agree_pairwise(self.keys.secret, pk)

    def self_seed(self, round_id: int) -> bytes:
        return derive_seed(self.keys.self_seed, round_id, SELF_LABEL)

    def _share_messages(self, value: int, kind: ShareKind, msg_kind: Kind, round_id: int) -> list[Message]:
        holders = self.neighbors
        xs = [v + 1 for v in holders]
        coeff_seed = int.from_bytes(
            hashlib.sha256(b"clipsim/share" + self.keys.self_seed + struct.pack(">IB", round_id, _KIND_CODE[kind])).digest(),
            "big",
        )
        shares = share_secret(value, len(holders), self.threshold, coeff_seed, xs=xs, owner=self.cid, kind=kind)
        out = []
        for v, s in zip(holders, shares):
            ct = channel.seal(self.shared[v], msg_kind, round_id, self.cid, v, _encode_share(s, round_id))
            out.append(Message(round_id, self.cid, msg_kind, addressed(v, ct)))
        return out

    def key_share_messages(self) -> list[Message]:
        return self._share_messages(self.keys.secret, ShareKind.SECRET_KEY, Kind.KEY_SHARE, 0)

    def seed_share_messages(self, round_id: int) -> list[Message]:
        value = int.from_bytes(self.self_seed(round_id), "big")
        return self._share_messages(value, ShareKind.SELF_SEED, Kind.SEED_SHARE, round_id)

    def receive_share(self, msg: Message) -> None:
        recipient, ct = split_addressed(msg.payload)
        if recipient != self.cid:
            raise ValueError(f"share for {recipient} delivered to {self.cid}")
        plain = channel.open_sealed(self.shared[msg.sender], msg.kind, msg.round_id, msg.sender, self.cid, ct)
        share, round_id = _decode_share(plain)
        if share.owner != msg.sender or round_id != msg.round_id:
            raise ValueError("share header does not match its envelope")
        self.held[(share.owner, share.kind, round_id)] = share

    def masked_input(self, round_id: int, quantized: np.ndarray) -> Message:
        seeds = {v: pair_seed(self.shared[v], round_id) for v in self.neighbors}
        upd = mask_update(quantized, self.cid, self.graph, seeds, self.self_seed(round_id))
        return Message(round_id, self.cid, Kind.MASKED_INPUT, encode_vector(upd.vector))

    def unmask_response(self, request: Message) -> Message:
        survivors, pos = _decode_ids(request.payload, 0)
        dropped, _ = _decode_ids(request.payload, pos)
        if set(survivors) & set(dropped):
            raise ValueError("server asked for both masks of one client")
        wanted = [(u, ShareKind.SELF_SEED, request.round_id) for u in survivors]
        wanted += [(d, ShareKind.SECRET_KEY, 0) for d in dropped]
        body = [_encode_share(self.held[w], w[2]) for w in wanted if w in self.held]
        return Message(request.round_id, self.cid, Kind.UNMASK_SHARES, struct.pack(">I", len(body)) + b"".join(body))


class Server:
    """Aggregator state. Sees only wire messages."""

    def __init__(self, graph: CommGraph, threshold: int | None = None):
        self.graph = graph
        self.threshold = threshold or default_threshold(graph.k)
        self.public_keys: dict[int, int] = {}
        self.masked: dict[int, MaskedUpdate] = {}
        self.shares: list[SeedShare] = []
        self.survivors: set[int] = set()
        self.dropped: set[int] = set()
        self.vector_len: int | None = None

    def receive_public_key(self, msg: Message) -> None:
        self.public_keys[msg.sender] = decode_public(msg.payload)

    def start_round(self) -> None:
        self.masked.clear()
        self.shares.clear()

    def receive_masked(self, msg: Message) -> None:
        vec = decode_vector(msg.payload)
        if self.vector_len is None:
            self.vector_len = vec.size
        elif vec.size != self.vector_len:
            raise ValueError(f"client {msg.sender} sent {vec.size} elements, expected {self.vector_len}")
        self.masked[msg.sender] = MaskedUpdate(msg.sender, vec)

    def unmask_request(self, round_id: int) -> Message:
        self.survivors = set(self.masked)
        self.dropped = set(range(self.graph.n)) - self.survivors
        return Message(round_id, SERVER, Kind.UNMASK_REQUEST, _encode_ids(self.survivors) + _encode_ids(self.dropped))

    def receive_unmask_shares(self, msg: Message) -> None:
        (count,) = struct.unpack_from(">I", msg.payload)
        for i in range(count):
            lo = 4 + i * _SHARE.size
            share, _ = _decode_share(msg.payload[lo:lo + _SHARE.size])
            self.shares.append(share)

    def finish_round(self, round_id: int) -> np.ndarray:
        return unmask_aggregate(
            [self.masked[u] for u in sorted(self.masked)],
            self.survivors,
            self.dropped,
            self.shares,
            self.graph,
            self.public_keys,
            round_id,
            self.threshold,
        )


class SecAggSession:
    """In-process run of all parties, with every frame passing the relay."""

    def __init__(
        self,
        n: int,
        k: int,
        seed: int,
        params: RingParams | None = None,
        threshold: int | None = None,
        relay: Relay | None = None,
    ):
        self.params = params or RingParams()
        self.params.check_capacity(n)
        if k < 2:
            raise ValueError("threshold sharing needs at least 2 neighbors per client")
        self.graph = build_k_regular(n, k, seed)
        self.relay = relay if relay is not None else Relay()
        self.clients = [
            Client(u, self.graph, hashlib.sha256(struct.pack(">qI", seed, u)).digest(), threshold)
            for u in range(n)
        ]
        self.server = Server(self.graph, threshold)
        for c in self.clients:
            self.server.receive_public_key(self.relay.carry(c.public_key_message()))
        for c in self.clients:
            c.receive_public_keys(self.server.public_keys)
        for c in self.clients:
            self._deliver(c.key_share_messages())

    @property
    def n(self) -> int:
        return self.graph.n

    def _deliver(self, msgs: Iterable[Message]) -> None:
        for m in msgs:
            m = self.relay.carry(m)
            recipient, _ = split_addressed(m.payload)
            self.clients[recipient].receive_share(m)

    def pairwise_secrets(self) -> dict[tuple[int, int], bytes]:
        """Long-lived secret per ordered client pair, as each holder sees it."""
        return {(c.cid, v): s for c in self.clients for v, s in c.shared.items()}

    def aggregate(self, round_id: int, inputs: Mapping[int, np.ndarray], dropped: Iterable[int] = ()) -> np.ndarray:
        """Run one round; ``dropped`` clients share seeds but never upload."""
        if round_id < 1:
            raise ValueError("round 0 is reserved for setup")
        dropped = set(dropped)
        self.server.start_round()
        for c in self.clients:
            self._deliver(c.seed_share_messages(round_id))
        for u in range(self.n):
            if u not in dropped:
                self.server.receive_masked(self.relay.carry(self.clients[u].masked_input(round_id, inputs[u])))
        request = self.relay.carry(self.server.unmask_request(round_id))
        for u in sorted(self.server.survivors):
            self.server.receive_unmask_shares(self.relay.carry(self.clients[u].unmask_response(request)))
        return self.server.finish_round(round_id)
