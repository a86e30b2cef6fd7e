"""Speedup of every policy against no pruning, over several seeds."""

import argparse

import numpy as np

from clipsim.harness.config import POLICIES, load_config
from clipsim.harness.experiment import run_policies


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="default")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    cfg = load_config(args.config)

    table = {p: [] for p in POLICIES}
    for s in args.seeds:
        results = run_policies(cfg.replace(seed=s), POLICIES)
        for p, res in results.items():
            table[p].append((res.summary["final_accuracy"], res.summary["speedup_vs_none"]))
        print(f"seed {s}: " + "  ".join(f"{p}={results[p].summary['speedup_vs_none']:.1%}" for p in POLICIES))

    print(f"\n{'policy':<8} {'final acc':>10} {'speedup':>8}")
    for p, rows in table.items():
        acc, sp = np.mean(rows, axis=0)
        print(f"{p:<8} {acc:>10.4f} {sp:>8.1%}")


if __name__ == "__main__":
    main()
