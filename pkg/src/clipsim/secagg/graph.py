from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CommGraph:
    n: int
    k: int
    adjacency: tuple[frozenset[int], ...]

    def neighbors(self, u: int) -> frozenset[int]:
        return self.adjacency[u]

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]


def build_k_regular(n: int, k: int, seed: int = 0) -> CommGraph:
    """Circulant k-regular graph under a seeded relabeling of the nodes.

    Each node links to ring offsets 1..k//2 on both sides, plus the antipode
    when k is odd. ``k = n - 1`` gives the complete graph.
    """
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got n={n}, k={k}")
    if (n * k) % 2:
        raise ValueError(f"no {k}-regular graph on {n} nodes: n*k is odd")
    label = np.random.default_rng(seed).permutation(n)
    adj: list[set[int]] = [set() for _ in range(n)]
    offsets = list(range(1, k // 2 + 1))
    if k % 2:
        offsets.append(n // 2)
    for pos in range(n):
        for off in offsets:
            a, b = int(label[pos]), int(label[(pos + off) % n])
            adj[a].add(b)
            adj[b].add(a)
    return CommGraph(n, k, tuple(frozenset(s) for s in adj))
