"""Deterministic timing model of one secure FL round.

All clients begin fitting once key setup ends, mask, then upload over their
own link (no contention). The server unmasks after the last upload lands and
everyone downloads the new model. Times are kept as integer milliseconds so
max/sum comparisons are exact; the public fields are in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "ClientProfile",
    "CostModel",
    "ClientTimeline",
    "RoundTimeline",
    "FAST_PROFILE",
    "SLOW_PROFILE",
    "update_nbytes",
    "fit_duration",
    "comm_duration",
    "simulate_round",
    "PhaseBreakdown",
    "phase_breakdown",
    "PHASES",
]

PHASES = ("setup", "fit", "mask", "upload", "unmask", "download")
HEADER_BYTES = 13


@dataclass(frozen=True)
class ClientProfile:
    cpu_hz: float
    up_bps: float
    down_bps: float
    is_straggler_ground_truth: bool = False

    def __post_init__(self):
        if min(self.cpu_hz, self.up_bps, self.down_bps) <= 0:
            raise ValueError(f"profile rates must be positive: {self}")


# 3 GHz on 5G (155 down / 17 up Mbps) and 2 GHz on 4G (27 down / 7 up Mbps)
FAST_PROFILE = ClientProfile(3e9, 17e6, 155e6)
SLOW_PROFILE = ClientProfile(2e9, 7e6, 27e6, True)


def update_nbytes(total_len: int, element_bytes: int = 8, wire_scale: float = 1.0) -> int:
    """Size of one masked-update frame, optionally scaled to an emulated model size."""
    return int(round((total_len * element_bytes + HEADER_BYTES) * wire_scale))


@dataclass(frozen=True)
class CostModel:
    flops_full: float
    bytes_per_update: int
    cycles_per_flop: float = 1.0
    setup_s: float = 0.05
    mask_s: float = 0.05
    unmask_s: float = 0.05
    mask_overlaps_fit: bool = False


def fit_duration(profile: ClientProfile, submodel_fraction: float, cost: CostModel) -> float:
    if not 0 < submodel_fraction <= 1:
        raise ValueError(f"sub-model fraction must be in (0, 1], got {submodel_fraction}")
    return cost.flops_full * submodel_fraction * cost.cycles_per_flop / profile.cpu_hz


def comm_duration(nbytes: float, bps: float) -> float:
    if nbytes < 0 or bps <= 0:
        raise ValueError("bytes must be nonnegative and bandwidth positive")
    return nbytes * 8.0 / bps


def _ms(seconds: float) -> int:
    return int(round(seconds * 1000.0))


@dataclass(frozen=True)
class ClientTimeline:
    """Milliseconds from round start."""

    fit_start: int
    fit_end: int
    mask_start: int
    mask_end: int
    upload_end: int
    download_start: int
    download_end: int

    @property
    def fit_ms(self) -> int:
        return self.fit_end - self.fit_start

    @property
    def upload_ms(self) -> int:
        return self.upload_end - self.mask_end

    @property
    def download_ms(self) -> int:
        return self.download_end - self.download_start


@dataclass(frozen=True)
class RoundTimeline:
    clients: tuple[ClientTimeline, ...]
    setup_ms: int
    unmask_start: int
    unmask_end: int
    round_ms: int

    @property
    def round_time(self) -> float:
        return self.round_ms / 1000.0

    def seconds(self, client: int) -> dict[str, float]:
        c = self.clients[client]
        return {
            "fit_start": c.fit_start / 1000.0,
            "fit_end": c.fit_end / 1000.0,
            "upload_end": c.upload_end / 1000.0,
            "download_end": c.download_end / 1000.0,
        }

    def rows(self) -> list[tuple[str, str, int, int]]:
        """(client, phase, start_ms, end_ms) for every phase, server last."""
        out = []
        for i, c in enumerate(self.clients):
            out += [
                (str(i), "setup", 0, self.setup_ms),
                (str(i), "fit", c.fit_start, c.fit_end),
                (str(i), "mask", c.mask_start, c.mask_end),
                (str(i), "upload", c.mask_end, c.upload_end),
                (str(i), "download", c.download_start, c.download_end),
            ]
        out.append(("server", "unmask", self.unmask_start, self.unmask_end))
        return out


def simulate_round(
    profiles: Sequence[ClientProfile],
    fractions: Sequence[float],
    cost: CostModel,
) -> RoundTimeline:
    """Timeline for one round given each client's active sub-model fraction."""
    if len(fractions) != len(profiles):
        raise ValueError(f"{len(profiles)} profiles but {len(fractions)} sub-model fractions")
    setup = _ms(cost.setup_s)
    mask = _ms(cost.mask_s)
    clients = []
    for prof, p in zip(profiles, fractions):
        fit_end = setup + _ms(fit_duration(prof, p, cost))
        mask_start = setup if cost.mask_overlaps_fit else fit_end
        mask_end = max(fit_end, mask_start + mask)
        upload_end = mask_end + _ms(comm_duration(cost.bytes_per_update, prof.up_bps))
        clients.append((setup, fit_end, mask_start, mask_end, upload_end, prof))
    unmask_start = max(c[4] for c in clients)
    unmask_end = unmask_start + _ms(cost.unmask_s)
    done = []
    for *phases, prof in clients:
        dl = _ms(comm_duration(cost.bytes_per_update, prof.down_bps))
        done.append(ClientTimeline(*phases, unmask_end, unmask_end + dl))
    return RoundTimeline(tuple(done), setup, unmask_start, unmask_end, max(c.download_end for c in done))


@dataclass(frozen=True)
class PhaseBreakdown:
    """Critical-path decomposition; the components sum to the round time."""

    setup: int
    fit: int
    mask: int
    upload: int
    unmask: int
    download: int
    upload_client: int
    download_client: int

    def seconds(self) -> dict[str, float]:
        return {p: getattr(self, p) / 1000.0 for p in PHASES}

    @property
    def total_ms(self) -> int:
        return sum(getattr(self, p) for p in PHASES)


def phase_breakdown(timeline: RoundTimeline) -> PhaseBreakdown:
    """Phases along the critical path.

    The path runs through the last client to finish uploading (lowest id on
    ties) and then through the slowest download.
    """
    cs = timeline.clients
    up = max(range(len(cs)), key=lambda i: (cs[i].upload_end, -i))
    dl = max(range(len(cs)), key=lambda i: (cs[i].download_end, -i))
    c = cs[up]
    return PhaseBreakdown(
        setup=timeline.setup_ms,
        fit=c.fit_end - c.fit_start,
        mask=c.mask_end - c.fit_end,
        upload=c.upload_end - c.mask_end,
        unmask=timeline.unmask_end - timeline.unmask_start,
        download=cs[dl].download_end - cs[dl].download_start,
        upload_client=up,
        download_client=dl,
    )
