"""Registry of analysis algorithms, model methods, and their parameters.

The registry is what makes the pipeline language extensible: new analysis
algorithms (for example an alternative dimensionality reduction) register
a key, a parameter schema, and a fit function, and immediately become legal
`algorithm` values, patchable at runtime and listed in the service's
parameter catalog for auto-generated controls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytics import (
    detect_changepoints,
    fit_agglomerative,
    fit_kmeans,
    fit_pca,
)
from .analytics.features import FeatureMatrix
from .errors import DuplicatePlugin


@dataclass(frozen=True)
class ParamInfo:
    name: str
    kind: str  # int | float | str | bool
    default: object = None
    choices: tuple | None = None
    lo: float | None = None
    hi: float | None = None

    def coerce(self, value):
        """Cast a JSON-decoded value to the declared kind; raises TypeError."""
        if value is None:
            return None
        try:
            if self.kind == "int":
                if isinstance(value, float) and not value.is_integer():
                    raise TypeError
                out = int(value)
            elif self.kind == "float":
                out = float(value)
            elif self.kind == "bool":
                if not isinstance(value, bool):
                    raise TypeError
                out = value
            else:
                out = str(value)
        except (TypeError, ValueError):
            raise TypeError(
                f"parameter {self.name!r} expects {self.kind}, got {value!r}"
            ) from None
        if self.choices is not None and out not in self.choices:
            raise TypeError(f"parameter {self.name!r} must be one of {self.choices}")
        return out


@dataclass
class AnalysisOutput:
    """Per-row columns an analysis appends, plus side results for annotations."""

    values: np.ndarray  # (n,) or (n, c) aligned with the kept rows
    dtype: str  # int64 | float64 for the appended column(s)
    extras: dict = field(default_factory=dict)


@dataclass
class AlgorithmEntry:
    key: str
    params: dict[str, ParamInfo]
    fit: Callable[[FeatureMatrix, dict], AnalysisOutput]
    n_output_columns: Callable[[dict], int]
    description: str = ""


def _fit_kmeans_entry(X: FeatureMatrix, params: dict) -> AnalysisOutput:
    res = fit_kmeans(
        X,
        n_clusters=params.get("n_clusters", 2),
        max_iter=params.get("max_iter", 300),
        tol=params.get("tol", 1e-4),
        seed=params.get("seed", 0),
    )
    return AnalysisOutput(res.labels, "int64", {
        "centroids": res.centroids.tolist(),
        "inertia": res.inertia,
        "n_iter": res.n_iter,
    })


def _fit_agg_entry(X: FeatureMatrix, params: dict) -> AnalysisOutput:
    labels = fit_agglomerative(
        X,
        linkage=params.get("linkage", "ward"),
        n_clusters=params.get("n_clusters"),
        distance_threshold=params.get("distance_threshold"),
    )
    return AnalysisOutput(labels, "int64", {"n_clusters": int(labels.max()) + 1})


def _fit_pca_entry(X: FeatureMatrix, params: dict) -> AnalysisOutput:
    res = fit_pca(X, n_components=params.get("n_components", 2))
    return AnalysisOutput(res.projected, "float64", {
        "explained_variance": res.explained_variance.tolist(),
        "components": res.components.tolist(),
    })


def _fit_changepoint_entry(X: FeatureMatrix, params: dict) -> AnalysisOutput:
    if X.d != 1:
        raise ValueError("change-point detection takes exactly one feature")
    res = detect_changepoints(
        X.values[:, 0],
        n_bkps=params.get("n_bkps"),
        penalty=params.get("penalty"),
    )
    return AnalysisOutput(res.indicator, "int64", {
        "breakpoints": list(res.breakpoints),
        "costs": list(res.costs),
    })


class Catalog:
    """Mutable registry; the module-level default carries the builtins."""

    def __init__(self):
        self.algorithms: dict[str, AlgorithmEntry] = {}
        self.model_methods: dict[str, dict[str, ParamInfo]] = {}
        self.scaling_methods = ("none", "normalize", "standardize", "minmax")
        self.scoring_metrics = ("r2", "accuracy", "f1")

    def register_algorithm(
        self,
        key: str,
        fit: Callable[[FeatureMatrix, dict], AnalysisOutput],
        params: list[ParamInfo] = (),
        n_output_columns: Callable[[dict], int] | int = 1,
        description: str = "",
    ) -> AlgorithmEntry:
        if key in self.algorithms:
            raise DuplicatePlugin(f"algorithm {key!r} already registered")
        count = n_output_columns if callable(n_output_columns) else (lambda p, c=n_output_columns: c)
        entry = AlgorithmEntry(key, {p.name: p for p in params}, fit, count, description)
        self.algorithms[key] = entry
        return entry

    def algorithm(self, key: str) -> AlgorithmEntry | None:
        return self.algorithms.get(key)

    def describe(self) -> dict:
        """JSON-safe dump used by the service's parameter-catalog endpoint."""
        def params_doc(params):
            return [
                {
                    "name": p.name, "kind": p.kind, "default": p.default,
                    **({"choices": list(p.choices)} if p.choices else {}),
                    **({"lo": p.lo} if p.lo is not None else {}),
                    **({"hi": p.hi} if p.hi is not None else {}),
                }
                for p in params.values()
            ]

        return {
            "algorithms": {
                k: {"params": params_doc(e.params), "description": e.description}
                for k, e in sorted(self.algorithms.items())
            },
            "model_methods": {
                k: {"params": params_doc(v)} for k, v in sorted(self.model_methods.items())
            },
            "scaling_methods": list(self.scaling_methods),
            "scoring_metrics": list(self.scoring_metrics),
        }


def _builtin_catalog() -> Catalog:
    cat = Catalog()
    cat.register_algorithm(
        "KMeans",
        _fit_kmeans_entry,
        [
            ParamInfo("n_clusters", "int", 2, lo=1),
            ParamInfo("max_iter", "int", 300, lo=1),
            ParamInfo("tol", "float", 1e-4, lo=0.0),
            ParamInfo("seed", "int", 0),
        ],
        description="Lloyd k-means with seeded k-means++ initialization",
    )
    cat.register_algorithm(
        "AgglomerativeClustering",
        _fit_agg_entry,
        [
            ParamInfo("linkage", "str", "ward", choices=("single", "complete", "average", "ward")),
            ParamInfo("n_clusters", "int", None, lo=1),
            ParamInfo("distance_threshold", "float", None, lo=0.0),
        ],
        description="bottom-up hierarchical clustering",
    )
    cat.register_algorithm(
        "PCA",
        _fit_pca_entry,
        [ParamInfo("n_components", "int", 2, lo=1)],
        n_output_columns=lambda p: int(p.get("n_components", 2)),
        description="principal component projection",
    )
    cat.register_algorithm(
        "ChangePoint",
        _fit_changepoint_entry,
        [
            ParamInfo("n_bkps", "int", None, lo=0),
            ParamInfo("penalty", "float", None, lo=0.0),
        ],
        description="binary-segmentation change-point indicator",
    )
    cat.register_algorithm(
        "ModelApply",
        None,  # engine dispatches this one itself: it needs the trained model
        [ParamInfo("model", "str"), ParamInfo("output", "str", None)],
        description="apply a declared or loaded model's predictions",
    )
    forest_params = {
        "n_estimators": ParamInfo("n_estimators", "int", 10, lo=1),
        "max_depth": ParamInfo("max_depth", "int", None, lo=1),
        "min_samples_leaf": ParamInfo("min_samples_leaf", "int", 1, lo=1),
        "seed": ParamInfo("seed", "int", 0),
    }
    cat.model_methods["LinearRegression"] = {}
    cat.model_methods["RandomForestRegressor"] = forest_params
    return cat


DEFAULT_CATALOG = _builtin_catalog()


def register_algorithm(key, fit, params=(), n_output_columns=1, description=""):
    """Register into the process-wide default catalog."""
    return DEFAULT_CATALOG.register_algorithm(
        key, fit, params, n_output_columns, description
    )
