"""Round loop of a simulated secure FL deployment.

Per round:

1. the server hands every client the global model and the accuracy history;
2. from round 2 on, clients exchange last round's fit times through the
   relay and each decides for itself whether it is a straggler;
3. stragglers size their sub-model and pick neurons (policy-dependent);
4. every client trains locally and zero-pads its delta;
5. deltas are quantized and masked; the server sees only masked frames;
6. the server unmasks the ring sum and applies the federated average;
7. the timing model charges the round's simulated duration.

Clients report fit time normalized to the full model (measured / fraction),
so a straggler that pruned last round still ranks as a straggler.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..model import DatasetShard, ModelWeights, active_fraction, evaluate, hidden_sizes, init_model, mlp_shapes, train_local
from ..pruning import (
    InvarianceState,
    PruneDecision,
    init_threshold,
    no_pruning,
    ordered_dropout,
    random_dropout,
    select_invariant,
)
from ..secagg import RingParams, SecAggSession, dequantize_sum, quantize
from ..secagg.messages import Relay
from ..straggler import (
    NetworkTimeReport,
    StragglerContext,
    broadcast_fit_times,
    self_identify,
    straggler_count,
    submodel_fraction_compute,
    submodel_fraction_network,
)
from ..timing import PHASES, ClientProfile, CostModel, RoundTimeline, fit_duration, phase_breakdown, simulate_round, update_nbytes
from .config import ExperimentConfig
from .data import generate_dataset
from .metrics import speedup_at_accuracy

log = logging.getLogger(__name__)

WARMUP_ROUNDS = 2


@dataclass
class RoundRecord:
    policy: str
    round: int
    simulated_time_s: float
    round_time_s: float
    global_accuracy: float
    phases: dict[str, float]
    fractions: tuple[float, ...]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[RoundRecord]
    timelines: list[RoundTimeline]
    decisions: list[list]
    update_lengths: list[list[int]]
    straggler_ids: frozenset[int]
    relay: Relay | None = None
    round1_model: ModelWeights | None = None
    final_model: ModelWeights | None = None
    summary: dict = field(default_factory=dict)

    @property
    def policy(self) -> str:
        return self.config.policy


class ExperimentFailed(RuntimeError):
    def __init__(self, round_id: int, cause: Exception):
        super().__init__(f"round {round_id}: {cause}")
        self.round_id = round_id


def subseed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


def cost_model(cfg: ExperimentConfig, total_len: int) -> CostModel:
    c = cfg.cost
    return CostModel(
        flops_full=c.flops_full,
        bytes_per_update=update_nbytes(total_len, wire_scale=c.wire_scale),
        cycles_per_flop=c.cycles_per_flop,
        setup_s=c.setup_s,
        mask_s=c.mask_s,
        unmask_s=c.unmask_s,
        mask_overlaps_fit=c.mask_overlaps_fit,
    )


def client_profiles(cfg: ExperimentConfig) -> tuple[list[ClientProfile], frozenset[int]]:
    """Randomly chosen ground-truth stragglers get the slow profile."""
    n = cfg.n_clients
    m = int(round(cfg.straggler_fraction * n))
    slow = frozenset(np.random.default_rng(subseed(cfg.seed, 101)).choice(n, size=m, replace=False).tolist())
    fast = ClientProfile(cfg.fast.cpu_hz, cfg.fast.up_bps, cfg.fast.down_bps, False)
    slow_p = ClientProfile(cfg.slow.cpu_hz, cfg.slow.up_bps, cfg.slow.down_bps, True)
    return [slow_p if c in slow else fast for c in range(n)], slow


@dataclass
class _Client:
    cid: int
    shard: DatasetShard
    state: InvarianceState = field(default_factory=InvarianceState)
    reported_fit: float | None = None

    def decide(self, cfg: ExperimentConfig, ctx: StragglerContext | None, cur: ModelWeights, round_id: int) -> PruneDecision:
        st = self.state
        if ctx is None or cfg.policy == "none" or not self_identify(ctx):
            return no_pruning()
        if cfg.fixed_submodel is not None:
            p = cfg.fixed_submodel
        elif cfg.policy == "clip":
            p = submodel_fraction_network(ctx.own_fit, ctx.own_upload, ctx.target_completion, cfg.submodel_floor)
        else:
            p = submodel_fraction_compute(ctx.own_fit, ctx.slowest_non_straggler_fit, cfg.submodel_floor)
        seed = subseed(cfg.seed, round_id, self.cid, 202)
        sizes = hidden_sizes(cur.shapes)
        if cfg.policy in ("clip", "clip-c"):
            if st.round <= WARMUP_ROUNDS:
                return no_pruning()
            d = select_invariant(st, cur, p, seed, floor=cfg.submodel_floor)
            return PruneDecision(d.to_drop, d.submodel_fraction, d.slack_count, cfg.policy)
        if cfg.policy == "random":
            return random_dropout(sizes, p, seed)
        return ordered_dropout(sizes, p)


def run_experiment(cfg: ExperimentConfig, keep_transcript: bool = False) -> ExperimentResult:
    cfg.validate()
    n = cfg.n_clients
    d = cfg.data
    shards, test = generate_dataset(
        d.n_samples, d.n_features, d.n_classes, n, subseed(cfg.seed, 11),
        d.center_spread, d.cluster_std, d.test_fraction,
    )
    shapes = mlp_shapes(d.n_features, cfg.model.hidden, d.n_classes)
    profiles, slow_ids = client_profiles(cfg)
    params = RingParams(cfg.ring.scale, cfg.ring.clip)
    relay = Relay()
    session = SecAggSession(n, min(cfg.graph_k, n - 1), subseed(cfg.seed, 303), params, relay=relay)
    secrets = session.pairwise_secrets()

    weights = init_model(shapes, subseed(cfg.seed, 404))
    cost = cost_model(cfg, weights.total_len)
    clients = [_Client(c, shards[c]) for c in range(n)]
    acc_prev = evaluate(weights, test)
    gains: list[float] = []
    network: NetworkTimeReport | None = None
    elapsed_ms = 0

    result = ExperimentResult(cfg, [], [], [], [], slow_ids)
    for r in range(1, cfg.rounds + 1):
        # (2) self-identification from last round's normalized fit times
        contexts: list[StragglerContext | None] = [None] * n
        if r > 1:
            times = [c.reported_fit for c in clients]
            contexts = broadcast_fit_times(times, secrets, r, relay, cfg.percentile, network)

        # (3) client-side pruning decisions; every client tracks invariance
        decisions = []
        for c in clients:
            st = c.state
            st.round = r
            st.acc_gains = list(gains)
            if r == WARMUP_ROUNDS and cfg.policy in ("clip", "clip-c"):
                init_threshold(st, weights)
            decisions.append(c.decide(cfg, contexts[c.cid], weights, r))
            st.prev_weights = weights

        # (4, 5) local training, zero-padded deltas, quantization
        quantized = {}
        for c, dec in zip(clients, decisions):
            delta = train_local(
                weights, dec.mask(shapes), c.shard, cfg.model.epochs, cfg.model.lr,
                subseed(cfg.seed, r, c.cid, 505), cfg.model.batch_size,
            )
            quantized[c.cid] = quantize(delta, params)

        # (6) server-side: masked frames in, ring sum out
        mark = len(relay.transcript)
        try:
            total = session.aggregate(r, quantized)
        except Exception as exc:
            raise ExperimentFailed(r, exc) from exc
        result.update_lengths.append(_masked_lengths(relay, mark))
        weights = weights.apply_delta(dequantize_sum(total, n, params))
        if r == 1:
            result.round1_model = weights.copy()

        # (7) timing
        fractions = [dec.submodel_fraction for dec in decisions]
        tl = simulate_round(profiles, fractions, cost)
        elapsed_ms += tl.round_ms
        for c, p, ct in zip(clients, fractions, tl.clients):
            c.reported_fit = ct.fit_ms / 1000.0 / p
        network = NetworkTimeReport(
            tuple(ct.upload_ms / 1000.0 for ct in tl.clients),
            tuple(ct.download_ms / 1000.0 for ct in tl.clients),
        )

        acc = evaluate(weights, test)
        gains.append(acc - acc_prev)
        acc_prev = acc
        pb = phase_breakdown(tl)
        result.records.append(RoundRecord(cfg.policy, r, elapsed_ms / 1000.0, tl.round_time, acc, pb.seconds(), tuple(fractions)))
        result.timelines.append(tl)
        result.decisions += [dec.csv_row(r, c) for c, dec in enumerate(decisions)]
        log.debug("%s round %d: acc=%.4f t=%.3fs", cfg.policy, r, acc, elapsed_ms / 1000.0)

    result.final_model = weights
    if keep_transcript:
        result.relay = relay
    result.summary = summarize(result)
    return result


def _masked_lengths(relay: Relay, start: int) -> list[int]:
    from ..secagg.messages import Kind, Message

    out = []
    for frame in relay.transcript[start:]:
        msg = Message.decode(frame)
        if msg.kind == Kind.MASKED_INPUT:
            out.append(len(msg.payload))
    return out


def summarize(res: ExperimentResult, baseline: ExperimentResult | None = None) -> dict:
    accs = [r.global_accuracy for r in res.records]
    out = {
        "policy": res.policy,
        "rounds": len(res.records),
        "final_accuracy": accs[-1],
        "max_accuracy": max(accs),
        "total_time_s": res.records[-1].simulated_time_s,
        "mean_round_time_s": res.records[-1].simulated_time_s / len(res.records),
        "speedup_vs_none": None,
    }
    if baseline is not None:
        out["speedup_vs_none"] = speedup_at_accuracy(baseline.records, res.records)
    return out


def run_policies(cfg: ExperimentConfig, policies) -> dict[str, ExperimentResult]:
    """Run several policies on one config; summaries carry speedups against ``none``."""
    policies = list(dict.fromkeys(policies))
    if "none" not in policies:
        policies.insert(0, "none")
    results = {p: run_experiment(cfg.replace(policy=p)) for p in policies}
    base = results["none"]
    for p, res in results.items():
        res.summary = summarize(res, base)
    return results
