"""Client-side neuron selection for stragglers.

Hidden neurons are addressed by a global index over the concatenation of all
hidden layers. The invariance threshold is a single scalar across layers,
fixed at round 2 from the change between the first two global models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import LayerShape, ModelWeights, NeuronMask, hidden_sizes

EPS = 1e-8

__all__ = [
    "EPS",
    "InvarianceState",
    "PruneDecision",
    "round_half_up",
    "drop_count",
    "invariance",
    "neuron_invariance",
    "init_threshold",
    "deterministic_share",
    "select_invariant",
    "select_slack",
    "random_dropout",
    "ordered_dropout",
    "no_pruning",
]


def round_half_up(x: float) -> int:
    # 1e-9 absorbs float noise such as 10 * (1 - 0.7) = 3.0000000000000004
    return int(math.floor(round(x, 9) + 0.5))


def drop_count(n_prunable: int, submodel_fraction: float) -> int:
    return round_half_up(n_prunable * (1.0 - submodel_fraction))


@dataclass(frozen=True)
class PruneDecision:
    to_drop: frozenset[int]
    submodel_fraction: float
    slack_count: int = 0
    policy: str = "none"

    def mask(self, shapes: Sequence[LayerShape]) -> NeuronMask:
        return NeuronMask.from_global(self.to_drop, shapes)

    def csv_row(self, round_id: int, client: int) -> list:
        return [round_id, client, self.policy, repr(float(self.submodel_fraction)), len(self.to_drop), self.slack_count]


DECISION_HEADER = ["round", "client", "policy", "submodel_fraction", "drop_count", "slack_count"]


def no_pruning() -> PruneDecision:
    return PruneDecision(frozenset(), 1.0, 0, "none")


@dataclass
class InvarianceState:
    """One client's memory across rounds. ``round`` counts the current round from 1."""

    prev_weights: ModelWeights | None = None
    threshold: float | None = None
    prev_drop: frozenset[int] = frozenset()
    acc_gains: list[float] = field(default_factory=list)
    round: int = 0


def invariance(w_prev, w_cur):
    """Relative change |w_cur - w_prev| / (|w_prev| + EPS), elementwise."""
    w_prev = np.asarray(w_prev, dtype=np.float64)
    return np.abs(np.asarray(w_cur, dtype=np.float64) - w_prev) / (np.abs(w_prev) + EPS)


def neuron_invariance(state: InvarianceState, cur: ModelWeights) -> np.ndarray:
    """Mean invariance over each hidden neuron's incoming row, bias and outgoing column."""
    prev = state.prev_weights
    if prev is None:
        raise ValueError("no previous global model recorded")
    if prev.shapes != cur.shapes:
        raise ValueError("previous and current models have different shapes")
    per_layer = [
        (invariance(p_w, c_w), invariance(p_b, c_b))
        for (p_w, p_b), (c_w, c_b) in (
            (prev.layer(l), cur.layer(l)) for l in range(len(cur.shapes))
        )
    ]
    out = []
    for l in range(len(cur.shapes) - 1):
        inc, bias = per_layer[l]
        outgoing = per_layer[l + 1][0]
        total = inc.sum(axis=1) + bias + outgoing.sum(axis=0)
        count = inc.shape[1] + 1 + outgoing.shape[0]
        out.append(total / count)
    return np.concatenate(out)


def init_threshold(state: InvarianceState, cur: ModelWeights) -> float:
    if state.round != 2:
        raise ValueError(f"the threshold is set at round 2, not round {state.round}")
    if state.threshold is not None:
        raise ValueError("threshold already set")
    state.threshold = float(np.mean(neuron_invariance(state, cur)))
    return state.threshold


def deterministic_share(acc_gains: Sequence[float]) -> float:
    """Share of slack drawn from last round's drops: clamp(recent gain / early gain, 0, 1).

    Early gain is the mean of the first five per-round gains, recent gain the
    mean of the last five.
    """
    bench = float(np.mean(acc_gains[:5]))
    cur = float(np.mean(acc_gains[-5:]))
    if bench <= 0:
        # no measurable early progress to compare against
        return 1.0
    return min(max(cur / bench, 0.0), 1.0)


def _sample(pool, k: int, rng: np.random.Generator) -> list[int]:
    pool = sorted(pool)
    if k > len(pool):
        raise ValueError(f"cannot draw {k} neurons from {len(pool)}")
    if k == 0:
        return []
    return [pool[i] for i in rng.choice(len(pool), size=k, replace=False)]


def _layer_of(sizes: Sequence[int]) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def _keep_alive(drop: set[int], sizes: Sequence[int], prefer: set[int], rng: np.random.Generator) -> set[int]:
    """Swap picks out of any hidden layer that would lose every neuron."""
    layer_of = _layer_of(sizes)
    for l, n_l in enumerate(sizes):
        members = sorted(j for j in drop if layer_of[j] == l)
        if len(members) < n_l:
            continue
        drop.discard(members[int(rng.integers(len(members)))])
        free = [j for j in range(len(layer_of)) if j not in drop and layer_of[j] != l]
        preferred = [j for j in free if j in prefer]
        pool = preferred or free
        if not pool:
            raise ValueError("cannot drop this many neurons without emptying a layer")
        drop.add(pool[int(rng.integers(len(pool)))])
    return drop


def select_slack(
    state: InvarianceState,
    n_prunable: int,
    slack_count: int,
    seed,
    exclude: frozenset[int] = frozenset(),
) -> set[int]:
    """Pick ``slack_count`` neurons outside ``exclude``.

    Up to round 5 the pick is uniform. Afterwards ``deterministic_share`` of it
    is re-drawn from last round's drops (stability while accuracy still
    climbs fast) and the rest is uniform (exploration once gains flatten).
    """
    if slack_count < 0:
        raise ValueError("slack count must be nonnegative")
    rng = np.random.default_rng(seed)
    available = set(range(n_prunable)) - set(exclude)
    if slack_count > len(available):
        raise ValueError(f"{slack_count} slack neurons requested, {len(available)} available")
    if state.round <= 5:
        return set(_sample(available, slack_count, rng))
    share = deterministic_share(state.acc_gains)
    prev_pool = set(state.prev_drop) & available
    n_prev = min(round_half_up(slack_count * share), len(prev_pool))
    prev = _sample(prev_pool, n_prev, rng)
    rest = _sample(available - set(prev), slack_count - n_prev, rng)
    return set(prev) | set(rest)


def select_invariant(
    state: InvarianceState,
    cur: ModelWeights,
    submodel_fraction: float,
    seed,
    floor: float = 0.5,
) -> PruneDecision:
    """Drop invariant neurons first, topping up with slack when too few qualify."""
    if state.round <= 2 or state.threshold is None:
        raise ValueError("invariant selection starts after the round-2 threshold")
    if not floor <= submodel_fraction <= 1:
        raise ValueError(f"sub-model fraction {submodel_fraction} outside [{floor}, 1]")
    sizes = hidden_sizes(cur.shapes)
    n = sum(sizes)
    target = drop_count(n, submodel_fraction)
    inv = neuron_invariance(state, cur)
    candidates = set(np.flatnonzero(inv <= state.threshold).tolist())
    rng = np.random.default_rng(seed)
    if len(candidates) >= target:
        drop = set(_sample(candidates, target, rng))
    else:
        slack = select_slack(state, n, target - len(candidates), rng, frozenset(candidates))
        drop = candidates | slack
    drop = _keep_alive(drop, sizes, candidates, rng)
    to_drop = frozenset(drop)
    state.prev_drop = to_drop
    return PruneDecision(to_drop, submodel_fraction, len(to_drop - candidates), "clip")


def _sizes(n_or_sizes) -> list[int]:
    return [int(n_or_sizes)] if np.isscalar(n_or_sizes) else [int(s) for s in n_or_sizes]


def random_dropout(n_or_sizes, submodel_fraction: float, seed) -> PruneDecision:
    """Uniform sample of round(N(1-p)) hidden neurons."""
    sizes = _sizes(n_or_sizes)
    n = sum(sizes)
    rng = np.random.default_rng(seed)
    drop = set(_sample(range(n), drop_count(n, submodel_fraction), rng))
    if len(sizes) > 1:
        drop = _keep_alive(drop, sizes, set(), rng)
    return PruneDecision(frozenset(drop), submodel_fraction, 0, "random")


def ordered_dropout(n_or_sizes, submodel_fraction: float) -> PruneDecision:
    """Drop the highest-index neurons of every hidden layer.

    The total round(N(1-p)) is split across layers in proportion to their
    size, remainders going to the layers with the largest fractional parts.
    """
    sizes = _sizes(n_or_sizes)
    total = drop_count(sum(sizes), submodel_fraction)
    exact = [s * total / sum(sizes) for s in sizes]
    per_layer = [int(math.floor(e)) for e in exact]
    by_remainder = sorted(range(len(sizes)), key=lambda l: (-(exact[l] - per_layer[l]), l))
    for l in by_remainder[: total - sum(per_layer)]:
        per_layer[l] += 1
    # every layer keeps one neuron; overflow moves to layers with room
    overflow = sum(max(d - (s - 1), 0) for s, d in zip(sizes, per_layer))
    per_layer = [min(d, s - 1) for s, d in zip(sizes, per_layer)]
    for l in by_remainder:
        extra = min(overflow, sizes[l] - 1 - per_layer[l])
        per_layer[l] += extra
        overflow -= extra
    drop, offset = set(), 0
    for s, d in zip(sizes, per_layer):
        drop.update(range(offset + s - d, offset + s))
        offset += s
    return PruneDecision(frozenset(drop), submodel_fraction, 0, "ordered")
