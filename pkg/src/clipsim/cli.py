"""Command line: ``run``, ``compare`` and ``protocol-test``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness.config import POLICIES, load_config
from .harness.experiment import run_experiment, run_policies, summarize
from .harness.outputs import emit_outputs
from .harness.protocol_check import run_protocol_checks


def _print_summary(results) -> None:
    print(f"{'policy':<8} {'final acc':>9} {'max acc':>8} {'time (s)':>9} {'speedup':>8}")
    for res in results:
        s = res.summary
        sp = "" if s["speedup_vs_none"] is None else f"{s['speedup_vs_none']:.1%}"
        print(f"{s['policy']:<8} {s['final_accuracy']:>9.4f} {s['max_accuracy']:>8.4f} {s['total_time_s']:>9.2f} {sp:>8}")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.policy is not None:
        changes["policy"] = args.policy
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.rounds is not None:
        changes["rounds"] = args.rounds
    cfg = cfg.replace(**changes)
    if cfg.policy == "none" or args.no_baseline:
        results = [run_experiment(cfg)]
    else:
        results = list(run_policies(cfg, [cfg.policy]).values())
    emit_outputs(results, args.out, cfg)
    _print_summary(results)
    return 0


def cmd_compare(args) -> int:
    for i, path in enumerate(args.configs):
        cfg = load_config(path)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        results = list(run_policies(cfg, args.policies).values())
        out = Path(args.out)
        if len(args.configs) > 1:
            out = out / (Path(path).stem if path != "default" else f"default_{i}")
        emit_outputs(results, out, cfg)
        print(f"== {path} -> {out}")
        _print_summary(results)
    return 0


def cmd_protocol_test(args) -> int:
    return 0 if run_protocol_checks() else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clipsim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one policy (plus the no-pruning baseline)")
    run.add_argument("--config", default="default", help="YAML config path, or 'default'")
    run.add_argument("--policy", choices=POLICIES)
    run.add_argument("--seed", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--out", default="out")
    run.add_argument("--no-baseline", action="store_true", help="skip the 'none' reference run")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="run every policy and emit the speedup table")
    cmp_.add_argument("--configs", nargs="+", default=["default"])
    cmp_.add_argument("--policies", nargs="+", choices=POLICIES, default=list(POLICIES))
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--out", default="out")
    cmp_.set_defaults(func=cmd_compare)

    pt = sub.add_parser("protocol-test", help="run the secure-aggregation checks")
    pt.set_defaults(func=cmd_protocol_test)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
