"""Principal component analysis by eigendecomposition of the covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMatrix, TooManyComponents
from .features import FeatureMatrix


@dataclass
class PCAResult:
    projected: np.ndarray  # (n, c)
    components: np.ndarray  # (c, d), orthonormal rows
    explained_variance: np.ndarray  # (c,), non-increasing
    mean: np.ndarray  # (d,) feature means used for centering


def fit_pca(X: FeatureMatrix | np.ndarray, n_components: int) -> PCAResult:
    V = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    n, d = V.shape
    if n == 0 or d == 0:
        raise EmptyMatrix("PCA needs a non-empty matrix")
    limit = min(n - 1, d)
    if not 1 <= n_components <= limit:
        raise TooManyComponents(f"n_components={n_components} outside [1, {limit}]")
    mean = V.mean(axis=0)
    centered = V - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(eigvals)[::-1][:n_components]
    values = np.maximum(eigvals[order], 0.0)  # clamp -1e-17 style noise
    components = eigvecs[:, order].T
    for i in range(n_components):
        # sign convention: largest-|entry| coordinate made positive
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    projected = centered @ components.T
    return PCAResult(projected, components, values, mean)
