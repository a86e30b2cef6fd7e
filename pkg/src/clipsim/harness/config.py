"""Experiment configuration: nested dataclasses read from and echoed to YAML."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

POLICIES = ("none", "clip", "clip-c", "random", "ordered")


@dataclass
class DataConfig:
    n_samples: int = 5000
    n_features: int = 8
    n_classes: int = 4
    center_spread: float = 2.5
    cluster_std: float = 1.0
    test_fraction: float = 0.2


@dataclass
class ModelConfig:
    hidden: list[int] = field(default_factory=lambda: [64, 32])
    lr: float = 0.01
    epochs: int = 1
    batch_size: int = 32


@dataclass
class ProfileConfig:
    cpu_hz: float = 3e9
    up_bps: float = 17e6
    down_bps: float = 155e6


@dataclass
class CostConfig:
    flops_full: float = 6e9
    cycles_per_flop: float = 1.0
    setup_s: float = 0.05
    mask_s: float = 0.05
    unmask_s: float = 0.05
    wire_scale: float = 32.0
    mask_overlaps_fit: bool = False


@dataclass
class RingConfig:
    scale: int = 1 << 16
    clip: float = 8.0


@dataclass
class ExperimentConfig:
    n_clients: int = 10
    straggler_fraction: float = 0.2
    rounds: int = 60
    seed: int = 0
    policy: str = "clip"
    submodel_floor: float = 0.5
    percentile: float = 0.2
    graph_k: int = 4
    fixed_submodel: float | None = None
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    fast: ProfileConfig = field(default_factory=ProfileConfig)
    slow: ProfileConfig = field(default_factory=lambda: ProfileConfig(2e9, 7e6, 27e6))
    cost: CostConfig = field(default_factory=CostConfig)
    ring: RingConfig = field(default_factory=RingConfig)

    def validate(self) -> "ExperimentConfig":
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.n_clients < 3:
            raise ValueError("need at least 3 clients")
        if self.policy != "none" and round(self.straggler_fraction * self.n_clients) < 1:
            raise ValueError("straggler-dependent policy with no stragglers")
        if not 0 < self.submodel_floor <= 1:
            raise ValueError("submodel_floor must be in (0, 1]")
        if self.fixed_submodel is not None and not self.submodel_floor <= self.fixed_submodel <= 1:
            raise ValueError("fixed_submodel must lie in [submodel_floor, 1]")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.data.n_classes < 2:
            raise ValueError("need at least 2 classes")
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes).validate()

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


def _build(cls, values: dict[str, Any], where: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(values) - set(known)
    if unknown:
        raise ValueError(f"unknown keys in {where or 'config'}: {sorted(unknown)}")
    defaults = cls()
    kwargs = {}
    for name, value in values.items():
        current = getattr(defaults, name)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ValueError(f"{where}{name} must be a section")
            merged = {**dataclasses.asdict(current), **value}
            kwargs[name] = _build(type(current), merged, f"{where}{name}.")
        else:
            kwargs[name] = value
    return dataclasses.replace(defaults, **kwargs)


def config_from_dict(values: dict[str, Any] | None) -> ExperimentConfig:
    return _build(ExperimentConfig, values or {}, "").validate()


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a YAML config; the name ``default`` selects the built-in defaults."""
    if str(path) == "default":
        return ExperimentConfig().validate()
    with open(path) as fh:
        return config_from_dict(yaml.safe_load(fh))
