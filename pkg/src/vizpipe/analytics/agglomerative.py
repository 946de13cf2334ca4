"""Bottom-up agglomerative clustering via Lance-Williams updates.

Supports single, complete, average, and ward linkage over Euclidean
distances. O(n^3) but the dashboards this serves cluster at most a few
thousand rows. Ties on merge distance break toward the lowest index pair.
"""

from __future__ import annotations

import numpy as np

from ..errors import BothOrNeitherStopRule, EmptyMatrix
from .features import FeatureMatrix


def fit_agglomerative(
    X: FeatureMatrix | np.ndarray,
    linkage: str = "ward",
    n_clusters: int | None = None,
    distance_threshold: float | None = None,
) -> np.ndarray:
    """Cluster labels (int64), ids ordered by each cluster's first row."""
    if (n_clusters is None) == (distance_threshold is None):
        raise BothOrNeitherStopRule(
            "give exactly one of n_clusters / distance_threshold"
        )
    if linkage not in ("single", "complete", "average", "ward"):
        raise ValueError(f"unknown linkage {linkage!r}")
    V = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    n = V.shape[0]
    if n == 0:
        raise EmptyMatrix("agglomerative clustering needs at least one row")
    stop_at = max(1, int(n_clusters)) if n_clusters is not None else 1

    diff = V[:, None, :] - V[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)

    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    active = sorted(members)

    while len(active) > stop_at:
        flat = int(np.argmin(dist))  # row-major, so ties pick the lowest pair
        a, b = divmod(flat, n)
        d = float(dist[a, b])
        if a > b:
            a, b = b, a
        if distance_threshold is not None and d >= distance_threshold:
            break
        na, nb = len(members[a]), len(members[b])
        for c in active:
            if c in (a, b):
                continue
            nc = len(members[c])
            dac, dbc, dab = dist[a, c], dist[b, c], d
            if linkage == "single":
                new = min(dac, dbc)
            elif linkage == "complete":
                new = max(dac, dbc)
            elif linkage == "average":
                new = (na * dac + nb * dbc) / (na + nb)
            else:  # ward on Euclidean distances
                total = na + nb + nc
                new = np.sqrt(
                    ((na + nc) * dac ** 2 + (nb + nc) * dbc ** 2 - nc * dab ** 2) / total
                )
            dist[a, c] = dist[c, a] = new
        members[a] = members[a] + members[b]
        del members[b]
        active.remove(b)
        dist[b, :] = np.inf
        dist[:, b] = np.inf

    # label clusters by ascending first (lowest) member row index
    order = sorted(active, key=lambda c: min(members[c]))
    labels = np.empty(n, dtype=np.int64)
    for new_id, c in enumerate(order):
        labels[np.asarray(members[c])] = new_id
    return labels
