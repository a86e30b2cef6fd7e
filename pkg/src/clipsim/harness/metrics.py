from __future__ import annotations

from typing import Sequence

LEVEL_OFFSETS = (0.0, 0.025, 0.05)
_TOL = 1e-12


def time_to_accuracy(times: Sequence[float], accs: Sequence[float], level: float) -> float | None:
    """First simulated time at which accuracy reaches ``level`` (no interpolation)."""
    for t, a in zip(times, accs):
        if a >= level - _TOL:
            return t
    return None


def speedup_at_accuracy(base, treated) -> float:
    """Mean relative time saving at the treated run's best accuracy m, m-2.5pp and m-5pp.

    ``base`` and ``treated`` are sequences of records with ``simulated_time_s``
    and ``global_accuracy``. Levels the baseline never reaches are skipped.
    """
    bt = [r.simulated_time_s for r in base]
    ba = [r.global_accuracy for r in base]
    tt = [r.simulated_time_s for r in treated]
    ta = [r.global_accuracy for r in treated]
    if not ta or not ba:
        raise ValueError("both runs need at least one round")
    m = max(ta)
    gains = []
    for off in LEVEL_OFFSETS:
        t_base = time_to_accuracy(bt, ba, m - off)
        t_treated = time_to_accuracy(tt, ta, m - off)
        if t_base is None or t_treated is None:
            continue
        gains.append((t_base - t_treated) / t_base)
    if not gains:
        raise ValueError("no accuracy level reached by both runs")
    return sum(gains) / len(gains)
