"""Feature-matrix extraction and scaling.

Rows with a null in any selected feature are dropped before fitting; the
matrix remembers which original rows survived so per-row outputs (cluster
labels, projections, predictions) can be written back null-aligned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyMatrix, TypeMismatch, UnknownColumn
from ..frame import CATEGORICAL, DataFrame


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (n, d) float64
    feature_names: list[str]
    scaling_applied: str = "none"
    kept_rows: np.ndarray = field(default=None)  # original row indices, ascending
    source_rows: int = 0  # row count of the originating frame

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            self.values = self.values.reshape(len(self.values), -1)
        if self.kept_rows is None:
            self.kept_rows = np.arange(self.values.shape[0])
        if not self.source_rows:
            self.source_rows = self.values.shape[0]

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])

    def dropped_rows(self) -> np.ndarray:
        mask = np.ones(self.source_rows, dtype=bool)
        mask[self.kept_rows] = False
        return np.flatnonzero(mask)

    def expand(self, per_row: np.ndarray, fill=np.nan) -> tuple[np.ndarray, np.ndarray]:
        """Scatter per-kept-row values back to source length.

        Returns (values, valid_mask); dropped rows get `fill` and valid=False.
        """
        out = np.full(self.source_rows, fill, dtype=np.asarray(per_row).dtype
                      if not np.isnan(fill) else np.float64)
        out[self.kept_rows] = per_row
        valid = np.zeros(self.source_rows, dtype=bool)
        valid[self.kept_rows] = True
        return out, valid


def feature_matrix(frame: DataFrame, features: list[str] | None = None) -> FeatureMatrix:
    """Numeric matrix over the named columns (default: every numeric column)."""
    names = list(features) if features else frame.numeric_names()
    cols = []
    for name in names:
        col = frame.column(name)
        if col.dtype == CATEGORICAL:
            raise TypeMismatch(
                f"feature {name!r} is categorical; encode it during preprocessing"
            )
        cols.append(col)
    if not names:
        raise EmptyMatrix("no numeric feature columns available")
    keep = np.ones(frame.row_count, dtype=bool)
    for col in cols:
        keep &= col.valid_mask()
    kept = np.flatnonzero(keep)
    values = np.column_stack([c.values[kept].astype(np.float64) for c in cols]) \
        if len(kept) else np.empty((0, len(cols)))
    return FeatureMatrix(values, names, "none", kept, frame.row_count)


def scale_features(X: FeatureMatrix, method: str, lo: float = 0.0, hi: float = 1.0) -> FeatureMatrix:
    """Scale a feature matrix.

    none: identity. normalize: each row to unit L2 (zero rows stay zero).
    standardize: per-feature mean 0 and population std 1 (constant feature
    becomes all zeros). minmax(lo, hi): per-feature affine map of [min, max]
    onto [lo, hi] (constant feature becomes all lo).
    """
    if X.n == 0 or X.d == 0:
        raise EmptyMatrix("cannot scale an empty feature matrix")
    V = X.values
    if method == "none":
        return X
    if method == "normalize":
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        out = V / norms
    elif method == "standardize":
        mean = V.mean(axis=0)
        std = V.std(axis=0)  # population std, divisor n
        safe = np.where(std == 0, 1.0, std)
        out = (V - mean) / safe
        out[:, std == 0] = 0.0
    elif method == "minmax":
        mn = V.min(axis=0)
        mx = V.max(axis=0)
        span = mx - mn
        safe = np.where(span == 0, 1.0, span)
        out = lo + (V - mn) / safe * (hi - lo)
        out[:, span == 0] = lo
    else:
        raise ValueError(f"unknown scaling method {method!r}")
    return FeatureMatrix(out, list(X.feature_names), method, X.kept_rows, X.source_rows)
