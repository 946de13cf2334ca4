"""Exhaustive hyperparameter search with seeded k-fold cross-validation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import FoldTooSmall
from .features import FeatureMatrix
from .metrics import score
from .model_io import Model, fit_model, predict


@dataclass
class GridSearchResult:
    best_params: dict
    best_score: float
    best_model: Model
    candidates: list  # (params, mean_score) in enumeration order


def kfold_indices(n: int, cv_folds: int, seed: int) -> list[np.ndarray]:
    """Shuffled fold membership; same seed gives identical folds everywhere."""
    if cv_folds < 2 or cv_folds > n:
        raise FoldTooSmall(f"cv_folds={cv_folds} outside [2, {n}]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(perm, cv_folds)]


def grid_search(
    method: str,
    param_grid: dict,
    X: FeatureMatrix | np.ndarray,
    y,
    scoring: str = "r2",
    base_params: dict | None = None,
    cv_folds: int = 5,
    seed: int = 0,
) -> GridSearchResult:
    """Try every grid cell; folds are fixed up front and shared by all cells.

    Cells enumerate as the Cartesian product over sorted grid keys with
    values in their listed order; ties on mean score keep the earliest cell.
    The winner is refit on the full data.
    """
    if not param_grid or any(not vs for vs in param_grid.values()):
        raise ValueError("param_grid needs at least one non-empty value list")
    V = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    names = X.feature_names if isinstance(X, FeatureMatrix) else None
    y = np.asarray(y, dtype=np.float64)
    n = V.shape[0]
    folds = kfold_indices(n, cv_folds, seed)
    all_rows = np.arange(n)

    keys = sorted(param_grid)
    candidates = []
    best_idx = -1
    for params_tuple in itertools.product(*(param_grid[k] for k in keys)):
        params = dict(base_params or {})
        params.update(dict(zip(keys, params_tuple)))
        fold_scores = []
        for test_rows in folds:
            train = np.setdiff1d(all_rows, test_rows, assume_unique=True)
            m = fit_model(method, V[train], y[train], params, seed=seed)
            pred = predict(m, V[test_rows])
            fold_scores.append(score(y[test_rows], pred, scoring))
        mean_score = float(np.mean(fold_scores))
        candidates.append((params, mean_score))
        if best_idx < 0 or mean_score > candidates[best_idx][1]:
            best_idx = len(candidates) - 1

    best_params = candidates[best_idx][0]
    best_model = fit_model(method, _with_names(V, names), y, best_params, seed=seed)
    return GridSearchResult(best_params, candidates[best_idx][1], best_model, candidates)


def _with_names(V, names):
    if names is None:
        return V
    return FeatureMatrix(V, list(names))
