"""CSV/YAML outputs. Floats are written with ``repr`` so they re-parse exactly."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from ..pruning import DECISION_HEADER
from ..timing import PHASES
from .config import ExperimentConfig
from .experiment import ExperimentResult, RoundRecord

SUMMARY_HEADER = ["policy", "rounds", "final_accuracy", "max_accuracy", "total_time_s", "mean_round_time_s", "speedup_vs_none"]


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rounds_header(n_clients: int) -> list[str]:
    return (
        ["policy", "round", "simulated_time_s", "round_time_s", "global_accuracy"]
        + [f"{p}_s" for p in PHASES]
        + [f"fraction_{c}" for c in range(n_clients)]
    )


def record_row(rec: RoundRecord) -> list[str]:
    return [
        rec.policy,
        str(rec.round),
        _fmt(rec.simulated_time_s),
        _fmt(rec.round_time_s),
        _fmt(rec.global_accuracy),
        *(_fmt(rec.phases[p]) for p in PHASES),
        *(_fmt(f) for f in rec.fractions),
    ]


def read_rounds(path: str | Path) -> list[RoundRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        fr = [k for k in row if k.startswith("fraction_")]
        out.append(
            RoundRecord(
                policy=row["policy"],
                round=int(row["round"]),
                simulated_time_s=float(row["simulated_time_s"]),
                round_time_s=float(row["round_time_s"]),
                global_accuracy=float(row["global_accuracy"]),
                phases={p: float(row[f"{p}_s"]) for p in PHASES},
                fractions=tuple(float(row[k]) for k in sorted(fr, key=lambda k: int(k.split("_")[1]))),
            )
        )
    return out


def emit_outputs(results: Iterable[ExperimentResult], out_dir: str | Path, config: ExperimentConfig) -> Path:
    """Write rounds.csv, timeline.csv, decisions.csv, summary.csv and config.echo."""
    results = list(results)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = config.n_clients

    with open(out / "rounds.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(rounds_header(n))
        for res in results:
            for rec in res.records:
                w.writerow(record_row(rec))

    with open(out / "timeline.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["policy", "round", "client", "phase", "start_s", "end_s"])
        for res in results:
            for r, tl in enumerate(res.timelines, start=1):
                for client, phase, a, b in tl.rows():
                    w.writerow([res.policy, r, client, phase, f"{a / 1000:.3f}", f"{b / 1000:.3f}"])

    with open(out / "decisions.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(DECISION_HEADER)
        for res in results:
            w.writerows(res.decisions)

    with open(out / "summary.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_HEADER)
        for res in results:
            w.writerow([_fmt(res.summary.get(k)) for k in SUMMARY_HEADER])

    (out / "config.echo").write_text(config.dump())
    return out
