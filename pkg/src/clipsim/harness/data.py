from __future__ import annotations

import numpy as np

from ..model import DatasetShard


def generate_dataset(
    n_samples: int,
    n_features: int,
    n_classes: int,
    n_clients: int,
    seed: int,
    center_spread: float = 2.5,
    cluster_std: float = 1.0,
    test_fraction: float = 0.2,
) -> tuple[list[DatasetShard], DatasetShard]:
    """Gaussian blobs, one center per class.

    Centers are ``center_spread`` times orthonormal directions under a random
    rotation, so every pair of classes sits at the same distance and the
    task difficulty does not depend on the seed.

    A held-out test shard of ``test_fraction`` is taken first; the remainder
    is split into ``n_clients`` equal disjoint shards (leftovers dropped).
    """
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if n_clients < 1:
        raise ValueError("need at least one client")
    rng = np.random.default_rng(seed)
    if n_classes > n_features:
        raise ValueError("orthogonal class centers need n_classes <= n_features")
    rotation, _ = np.linalg.qr(rng.normal(size=(n_features, n_features)))
    centers = center_spread * rotation[:, :n_classes].T
    labels = rng.permutation(np.arange(n_samples) % n_classes)
    features = centers[labels] + rng.normal(scale=cluster_std, size=(n_samples, n_features))
    idx = np.arange(n_samples)

    n_test = int(round(test_fraction * n_samples))
    test = DatasetShard(features[:n_test], labels[:n_test], idx[:n_test])
    per = (n_samples - n_test) // n_clients
    if per < 1:
        raise ValueError("not enough samples for one per client")
    shards = []
    for c in range(n_clients):
        lo = n_test + c * per
        shards.append(DatasetShard(features[lo:lo + per], labels[lo:lo + per], idx[lo:lo + per]))
    return shards, test
