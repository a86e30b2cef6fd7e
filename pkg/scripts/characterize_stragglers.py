"""Round-time breakdown with no straggler, a compute straggler and a network straggler."""

import argparse

from clipsim.harness.characterize import characterize, default_cost
from clipsim.harness.config import load_config
from clipsim.timing import ClientProfile, phase_breakdown, simulate_round


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="default")
    args = ap.parse_args()
    cfg = load_config(args.config)
    cost = default_cost(cfg)
    res = characterize(cfg, cost)

    print(f"{'scenario':<18} {'round (s)':>9} {'inflation':>10}")
    print(f"{'no straggler':<18} {res.baseline_s:>9.3f} {'':>10}")
    print(f"{'compute straggler':<18} {res.compute_s:>9.3f} {res.compute_inflation:>10.1%}")
    print(f"{'network straggler':<18} {res.network_s:>9.3f} {res.network_inflation:>10.1%}")
    print(f"{'ideal dropout':<18} {res.ideal_compute_s:>9.3f} {res.ideal_compute_s / res.baseline_s - 1:>10.1%}"
          f"  (p = {res.ideal_fraction:.3f})")

    n = cfg.n_clients
    fast = ClientProfile(cfg.fast.cpu_hz, cfg.fast.up_bps, cfg.fast.down_bps)
    slow_cpu = ClientProfile(cfg.slow.cpu_hz, cfg.fast.up_bps, cfg.fast.down_bps, True)
    slow_net = ClientProfile(cfg.fast.cpu_hz, cfg.slow.up_bps, cfg.slow.down_bps, True)
    print("\ncritical-path phases (s)")
    for name, last in [("no straggler", fast), ("compute straggler", slow_cpu), ("network straggler", slow_net)]:
        pb = phase_breakdown(simulate_round([fast] * (n - 1) + [last], [1.0] * n, cost)).seconds()
        print(f"{name:<18} " + "  ".join(f"{k}={v:.3f}" for k, v in pb.items()))


if __name__ == "__main__":
    main()
