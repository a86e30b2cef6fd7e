"""Round-time inflation from a single compute or network straggler."""

from __future__ import annotations

from dataclasses import dataclass

from ..model import init_model, mlp_shapes
from ..timing import ClientProfile, CostModel, fit_duration, simulate_round
from .config import ExperimentConfig
from .experiment import cost_model


@dataclass(frozen=True)
class Characterization:
    baseline_s: float
    compute_s: float
    network_s: float
    ideal_compute_s: float
    ideal_fraction: float

    @property
    def compute_inflation(self) -> float:
        return self.compute_s / self.baseline_s - 1.0

    @property
    def network_inflation(self) -> float:
        return self.network_s / self.baseline_s - 1.0

    @property
    def ideal_gap(self) -> float:
        return abs(self.ideal_compute_s / self.baseline_s - 1.0)


def default_cost(cfg: ExperimentConfig) -> CostModel:
    shapes = mlp_shapes(cfg.data.n_features, cfg.model.hidden, cfg.data.n_classes)
    return cost_model(cfg, init_model(shapes, 0).total_len)


def characterize(cfg: ExperimentConfig, cost: CostModel | None = None) -> Characterization:
    """Compare an all-fast round against one with a slow CPU or a slow link.

    The compute straggler keeps the fast link; the network straggler keeps the
    fast CPU. The ideal case prunes the compute straggler at the unclamped
    fraction that equalizes its fit time with its peers.
    """
    cost = cost or default_cost(cfg)
    n = cfg.n_clients
    fast = ClientProfile(cfg.fast.cpu_hz, cfg.fast.up_bps, cfg.fast.down_bps)
    slow_cpu = ClientProfile(cfg.slow.cpu_hz, cfg.fast.up_bps, cfg.fast.down_bps, True)
    slow_net = ClientProfile(cfg.fast.cpu_hz, cfg.slow.up_bps, cfg.slow.down_bps, True)
    full = [1.0] * n

    def run(last: ClientProfile, fractions) -> float:
        return simulate_round([fast] * (n - 1) + [last], fractions, cost).round_time

    p = fit_duration(fast, 1.0, cost) / fit_duration(slow_cpu, 1.0, cost)
    return Characterization(
        baseline_s=run(fast, full),
        compute_s=run(slow_cpu, full),
        network_s=run(slow_net, full),
        ideal_compute_s=run(slow_cpu, [1.0] * (n - 1) + [p]),
        ideal_fraction=p,
    )
