"""Ordinary least squares with an intercept column."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyMatrix
from .features import FeatureMatrix
from .metrics import r2
from .model_io import Model


def fit_linear_regression(X: FeatureMatrix | np.ndarray, y: np.ndarray,
                          feature_names: list[str] | None = None) -> Model:
    """Minimum-norm least squares of [X | 1]; coefficients keyed by feature."""
    if isinstance(X, FeatureMatrix):
        names = list(X.feature_names)
        V = X.values
    else:
        V = np.asarray(X, dtype=np.float64)
        if V.ndim == 1:
            V = V[:, None]
        names = list(feature_names) if feature_names else [f"x{i}" for i in range(V.shape[1])]
    y = np.asarray(y, dtype=np.float64)
    n = V.shape[0]
    if n == 0:
        raise EmptyMatrix("regression needs at least one row")
    design = np.column_stack([V, np.ones(n)])
    solution, *_ = np.linalg.lstsq(design, y, rcond=None)
    coef = solution[:-1]
    intercept = float(solution[-1])
    training_pred = design @ solution
    return Model(
        method="LinearRegression",
        feature_names=names,
        parameters={},
        state={"coefficients": [float(c) for c in coef], "intercept": intercept},
        attributes={"coefficients": {nm: float(c) for nm, c in zip(names, coef)}},
        training_score=r2(y, training_pred),
    )
