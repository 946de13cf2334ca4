"""K-Means: k-means++ seeding plus Lloyd iterations.

Deterministic for a fixed seed. Final cluster ids are relabeled so that
cluster 0 is the one whose lowest-index member comes first, which keeps
labels stable across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMatrix, KTooLarge
from .features import FeatureMatrix


@dataclass
class KMeansResult:
    labels: np.ndarray  # (n,) int64 in [0, k)
    centroids: np.ndarray  # (k, d)
    inertia: float
    n_iter: int
    inertia_history: list  # one entry per Lloyd iteration, non-increasing


def _plus_plus_init(V: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = V.shape[0]
    centers = np.empty((k, V.shape[1]))
    first = int(rng.integers(n))
    centers[0] = V[first]
    closest = ((V - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total == 0:
            # all points coincide with a chosen center; pick uniformly
            pick = int(rng.integers(n))
        else:
            r = rng.random() * total
            pick = int(np.searchsorted(np.cumsum(closest), r, side="right"))
            pick = min(pick, n - 1)
        centers[j] = V[pick]
        closest = np.minimum(closest, ((V - centers[j]) ** 2).sum(axis=1))
    return centers


def fit_kmeans(
    X: FeatureMatrix | np.ndarray,
    n_clusters: int,
    max_iter: int = 300,
    tol: float = 1e-4,
    seed: int = 0,
) -> KMeansResult:
    V = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    n = V.shape[0]
    if n == 0:
        raise EmptyMatrix("k-means needs at least one row")
    if not 1 <= n_clusters <= n:
        raise KTooLarge(f"n_clusters={n_clusters} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(V, n_clusters, rng)

    labels = np.zeros(n, dtype=np.int64)
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = ((V[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)  # ties go to the lowest centroid index
        history.append(float(d2[np.arange(n), labels].sum()))
        new_centroids = centroids.copy()
        for j in range(n_clusters):
            members = labels == j
            if members.any():
                new_centroids[j] = V[members].mean(axis=0)
            else:
                # deterministic revival: move to the point farthest from its centroid
                worst = int(d2[np.arange(n), labels].argmax())
                new_centroids[j] = V[worst]
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < tol:
            break

    d2 = ((V[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    history.append(inertia)

    # relabel by ascending first-occurrence row index
    order = []
    for lab in labels:
        if lab not in order:
            order.append(int(lab))
            if len(order) == n_clusters:
                break
    for j in range(n_clusters):  # clusters that ended empty keep tail positions
        if j not in order:
            order.append(j)
    remap = {old: new for new, old in enumerate(order)}
    labels = np.array([remap[int(v)] for v in labels], dtype=np.int64)
    centroids = centroids[np.asarray(order)]
    return KMeansResult(labels, centroids, inertia, n_iter, history)
