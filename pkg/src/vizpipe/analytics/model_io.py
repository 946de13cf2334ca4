"""Model container, prediction dispatch, persistence, attribute ranking.

Model files are versioned JSON documents (key "p6model_version") so saved
models keep loading across releases and other tooling can read them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    CorruptModel,
    FeatureMismatch,
    UnknownModelAttribute,
    VersionMismatch,
)

MODEL_FORMAT_VERSION = 1


@dataclass
class Model:
    method: str  # LinearRegression | RandomForestRegressor
    feature_names: list[str]
    parameters: dict
    state: dict  # linreg: coefficients+intercept; forest: trees
    attributes: dict[str, dict[str, float]] = field(default_factory=dict)
    training_score: float | None = None


def _tree_predict(node: dict, row: np.ndarray) -> float:
    while "value" not in node:
        node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
    return node["value"]


def predict(model: Model, X, feature_names: list[str] | None = None) -> np.ndarray:
    """Predictions for rows of X; feature names and order must match the fit."""
    from .features import FeatureMatrix

    if isinstance(X, FeatureMatrix):
        names = list(X.feature_names)
        V = X.values
    else:
        V = np.asarray(X, dtype=np.float64)
        if V.ndim == 1:
            V = V[:, None]
        names = list(feature_names) if feature_names is not None else None
    if names is not None and names != list(model.feature_names):
        raise FeatureMismatch(
            f"model expects {model.feature_names}, got {names}"
        )
    if V.shape[1] != len(model.feature_names):
        raise FeatureMismatch(
            f"model expects {len(model.feature_names)} features, got {V.shape[1]}"
        )
    if model.method == "LinearRegression":
        coef = np.asarray(model.state["coefficients"], dtype=np.float64)
        return V @ coef + model.state["intercept"]
    if model.method == "RandomForestRegressor":
        trees = model.state["trees"]
        out = np.zeros(V.shape[0])
        for tree in trees:
            out += np.array([_tree_predict(tree, row) for row in V])
        return out / max(len(trees), 1)
    raise ValueError(f"unknown model method {model.method!r}")


def save_model(model: Model, path) -> None:
    doc = {
        "p6model_version": MODEL_FORMAT_VERSION,
        "method": model.method,
        "feature_names": model.feature_names,
        "parameters": model.parameters,
        "state": model.state,
        "attributes": model.attributes,
        "training_score": model.training_score,
    }
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=True))


def load_model(path) -> Model:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "p6model_version" not in doc:
        raise CorruptModel("missing p6model_version")
    if doc["p6model_version"] != MODEL_FORMAT_VERSION:
        raise VersionMismatch(f"model file version {doc['p6model_version']}")
    try:
        return Model(
            method=doc["method"],
            feature_names=list(doc["feature_names"]),
            parameters=dict(doc["parameters"]),
            state=dict(doc["state"]),
            attributes={k: dict(v) for k, v in doc.get("attributes", {}).items()},
            training_score=doc.get("training_score"),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise CorruptModel(f"missing field: {exc}") from exc


def rank_model_attributes(model: Model, attribute: str, top_k: int | None = None):
    """(feature, value) pairs sorted by |value| descending, names break ties."""
    if attribute not in model.attributes:
        raise UnknownModelAttribute(
            f"{attribute!r} not in {sorted(model.attributes)}"
        )
    pairs = sorted(
        model.attributes[attribute].items(),
        key=lambda kv: (-abs(kv[1]) if not math.isnan(kv[1]) else 0.0, kv[0]),
    )
    if top_k is not None:
        pairs = pairs[: int(top_k)]
    return pairs


def fit_model(method: str, X, y, parameters: dict | None = None, seed: int = 0) -> Model:
    """Uniform fitting entry point used by grid search and the engine."""
    from .forest import fit_random_forest
    from .linreg import fit_linear_regression

    parameters = dict(parameters or {})
    if method == "LinearRegression":
        return fit_linear_regression(X, y)
    if method == "RandomForestRegressor":
        return fit_random_forest(
            X,
            y,
            n_estimators=int(parameters.get("n_estimators", 10)),
            max_depth=parameters.get("max_depth"),
            min_samples_leaf=int(parameters.get("min_samples_leaf", 1)),
            seed=int(parameters.get("seed", seed)),
        )
    raise ValueError(f"unknown model method {method!r}")
