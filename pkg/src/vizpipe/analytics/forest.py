"""Random-forest regression: bagged CART trees, variance-reduction splits.

Each tree draws its own rng from (seed + tree_index), so a parallel runner
would produce the same forest as the sequential one. Split thresholds are
midpoints between consecutive distinct feature values; candidate features
per node are a sqrt(d)-sized random subset.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyMatrix
from .features import FeatureMatrix
from .metrics import r2
from .model_io import Model, predict


def _best_split(V, y, rows, feat_ids, min_leaf):
    """(gain, feature, threshold) maximizing SSE reduction, or None."""
    yv = y[rows]
    n = len(rows)
    parent_sse = float(((yv - yv.mean()) ** 2).sum())
    best = None
    if n < 2 * min_leaf:
        return None
    for f in feat_ids:
        order = np.argsort(V[rows, f], kind="stable")
        xs = V[rows, f][order]
        ys = yv[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys ** 2)
        total, total_sq = csum[-1], csq[-1]
        i = np.arange(min_leaf - 1, n - min_leaf)
        nl = i + 1
        nr = n - nl
        sse_l = csq[i] - csum[i] ** 2 / nl
        sse_r = (total_sq - csq[i]) - (total - csum[i]) ** 2 / nr
        gain = parent_sse - sse_l - sse_r
        gain[xs[i] == xs[i + 1]] = -np.inf  # no threshold between equal values
        at = int(np.argmax(gain))  # first maximum: lowest split index wins ties
        if gain[at] > 1e-12 and (best is None or gain[at] > best[0]):
            pos = int(i[at])
            best = (float(gain[at]), int(f), float((xs[pos] + xs[pos + 1]) / 2))
    return best


def _grow(V, y, rows, depth, max_depth, min_leaf, rng, mtry, importances):
    yv = y[rows]
    if (
        len(rows) < 2 * min_leaf
        or (max_depth is not None and depth >= max_depth)
        or np.all(yv == yv[0])
    ):
        return {"value": float(yv.mean())}
    feat_ids = np.sort(rng.choice(V.shape[1], size=mtry, replace=False))
    split = _best_split(V, y, rows, feat_ids, min_leaf)
    if split is None:
        return {"value": float(yv.mean())}
    gain, f, threshold = split
    importances[f] += gain
    go_left = V[rows, f] <= threshold
    left = _grow(V, y, rows[go_left], depth + 1, max_depth, min_leaf, rng, mtry, importances)
    right = _grow(V, y, rows[~go_left], depth + 1, max_depth, min_leaf, rng, mtry, importances)
    return {"feature": int(f), "threshold": threshold, "left": left, "right": right}


def fit_random_forest(
    X: FeatureMatrix | np.ndarray,
    y,
    n_estimators: int = 10,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    seed: int = 0,
) -> Model:
    if isinstance(X, FeatureMatrix):
        names = list(X.feature_names)
        V = X.values
    else:
        V = np.asarray(X, dtype=np.float64)
        if V.ndim == 1:
            V = V[:, None]
        names = [f"x{i}" for i in range(V.shape[1])]
    y = np.asarray(y, dtype=np.float64)
    n, d = V.shape
    if n == 0:
        raise EmptyMatrix("forest needs at least one row")
    mtry = max(1, math.isqrt(d))
    min_leaf = max(1, int(min_samples_leaf))
    importances = np.zeros(d)
    trees = []
    for t in range(int(n_estimators)):
        rng = np.random.default_rng(seed + t)
        sample = np.sort(rng.integers(0, n, size=n))
        trees.append(_grow(V, y, sample, 0, max_depth, min_leaf, rng, mtry, importances))
    total = importances.sum()
    if total > 0:
        importances = importances / total
    model = Model(
        method="RandomForestRegressor",
        feature_names=names,
        parameters={
            "n_estimators": int(n_estimators),
            "max_depth": max_depth,
            "min_samples_leaf": min_leaf,
            "seed": int(seed),
        },
        state={"trees": trees},
        attributes={"feature_importances": {nm: float(v) for nm, v in zip(names, importances)}},
    )
    model.training_score = r2(y, predict(model, V))
    return model
