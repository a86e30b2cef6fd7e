"""Self-contained checks of the masking protocol, runnable from the CLI."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from ..secagg import AbortedRound, RingParams, SecAggSession, build_k_regular, dequantize_sum, quantize, ring_sum
from ..secagg.shamir import ShareError, reconstruct_secret, share_secret


def exact_cancellation(n: int, k: int, rounds: int, length: int = 1000, seed: int = 0) -> bool:
    session = SecAggSession(n, k, seed)
    rng = np.random.default_rng(seed)
    for r in range(1, rounds + 1):
        inputs = {u: rng.integers(0, 2**64, size=length, dtype=np.uint64) for u in range(n)}
        if not np.array_equal(session.aggregate(r, inputs), ring_sum(inputs.values())):
            return False
    return True


def dropout_recovery(n: int = 5, k: int = 4, dropped: int = 1, seed: int = 0) -> bool:
    session = SecAggSession(n, k, seed)
    rng = np.random.default_rng(seed + 1)
    inputs = {u: rng.integers(0, 2**64, size=1000, dtype=np.uint64) for u in range(n)}
    got = session.aggregate(1, inputs, dropped={dropped})
    return bool(np.array_equal(got, ring_sum(inputs[u] for u in range(n) if u != dropped)))


def below_threshold_aborts(seed: int = 0) -> bool:
    # with k=2 both neighbors must answer; dropping two adjacent clients starves one survivor
    session = SecAggSession(6, 2, seed)
    u = 0
    a, b = sorted(session.graph.neighbors(u))
    inputs = {v: np.zeros(8, dtype=np.uint64) for v in range(6)}
    try:
        session.aggregate(1, inputs, dropped={a, b} - {u})
    except AbortedRound:
        return True
    return False


def quantization_bound(n_clients: int = 10, length: int = 10_000, seed: int = 0) -> bool:
    params = RingParams()
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-1, 1, size=(n_clients, length))
    avg = dequantize_sum(ring_sum(quantize(x, params) for x in xs), n_clients, params)
    return bool(np.max(np.abs(avg - xs.mean(axis=0))) <= 1.0 / params.scale)


def threshold_sharing(seed: int = 0) -> bool:
    shares = share_secret(42, 3, 2, seed)
    pairs_ok = all(reconstruct_secret([shares[i], shares[j]], 2) == 42 for i in range(3) for j in range(3) if i < j)
    try:
        reconstruct_secret(shares[:1], 2)
        return False
    except ShareError:
        return pairs_ok


def graph_regularity() -> bool:
    for n, k in [(4, 3), (6, 2), (10, 4), (20, 6), (20, 19), (9, 4)]:
        g = build_k_regular(n, k, seed=n * k)
        if any(len(g.neighbors(u)) != k or u in g.neighbors(u) for u in range(n)):
            return False
        if any(u not in g.neighbors(v) for u in range(n) for v in g.neighbors(u)):
            return False
    return True


CHECKS: dict[str, Callable[[], bool]] = {
    "exact cancellation, 20 clients, complete graph, 100 rounds": lambda: exact_cancellation(20, 19, 100),
    "exact cancellation, 20 clients, k=6, 100 rounds": lambda: exact_cancellation(20, 6, 100),
    "dropout recovery, 1 of 5 dropped": dropout_recovery,
    "too few shares aborts the round": below_threshold_aborts,
    "quantization error <= 1/scale": quantization_bound,
    "threshold sharing reconstructs, t-1 rejected": threshold_sharing,
    "k-regular graphs": graph_regularity,
}


def run_protocol_checks(echo=print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        t0 = time.perf_counter()
        passed = check()
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}  ({time.perf_counter() - t0:.2f}s)")
    return ok
