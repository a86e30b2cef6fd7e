"""Final accuracy when stragglers train a fixed sub-model fraction, per selection policy."""

import argparse

from clipsim.harness.config import load_config
from clipsim.harness.experiment import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="default")
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    ap.add_argument("--policies", nargs="+", default=["clip", "random", "ordered"])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = load_config(args.config).replace(seed=args.seed)

    print("fraction," + ",".join(args.policies))
    for p in args.fractions:
        floor = min(cfg.submodel_floor, p)
        accs = [
            run_experiment(cfg.replace(policy=pol, submodel_floor=floor, fixed_submodel=p)).summary["final_accuracy"]
            for pol in args.policies
        ]
        print(f"{p}," + ",".join(f"{a:.4f}" for a in accs))


if __name__ == "__main__":
    main()
