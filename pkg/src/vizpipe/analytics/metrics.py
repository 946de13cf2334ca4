"""Scoring metrics: r2, accuracy, macro-averaged F1."""

from __future__ import annotations

import numpy as np

from ..errors import LengthMismatch


def _check(y_true, y_pred):
    a = np.asarray(y_true)
    b = np.asarray(y_pred)
    if a.shape != b.shape:
        raise LengthMismatch(f"length {a.shape} vs {b.shape}")
    return a, b


def r2(y_true, y_pred) -> float:
    """1 - SS_res/SS_tot; a constant target scores 0 unless matched exactly."""
    a, b = _check(y_true, y_pred)
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    ss_res = float(((a - b) ** 2).sum())
    ss_tot = float(((a - a.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def accuracy(y_true, y_pred) -> float:
    a, b = _check(y_true, y_pred)
    if a.size == 0:
        return 0.0
    return float(np.mean(a == b))


def macro_f1(y_true, y_pred) -> float:
    """Unweighted mean of per-label F1 over every label seen in either vector."""
    a, b = _check(y_true, y_pred)
    labels = sorted(set(a.tolist()) | set(b.tolist()))
    if not labels:
        return 0.0
    scores = []
    for lab in labels:
        tp = int(np.sum((a == lab) & (b == lab)))
        fp = int(np.sum((a != lab) & (b == lab)))
        fn = int(np.sum((a == lab) & (b != lab)))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def score(y_true, y_pred, metric: str) -> float:
    if metric == "r2":
        return r2(y_true, y_pred)
    if metric == "accuracy":
        return accuracy(y_true, y_pred)
    if metric == "f1":
        return macro_f1(y_true, y_pred)
    raise ValueError(f"unknown metric {metric!r}")
