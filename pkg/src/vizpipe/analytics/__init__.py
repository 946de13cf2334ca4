"""From-scratch analytics kernels: scaling, clustering, decomposition,
regression, forests, metrics, grid search, change points, model files.

Everything here is deterministic given its inputs and an explicit seed, so
the pipeline engine can cache and re-run nodes freely.
"""

from .features import FeatureMatrix, feature_matrix, scale_features
from .kmeans import KMeansResult, fit_kmeans
from .agglomerative import fit_agglomerative
from .pca import PCAResult, fit_pca
from .linreg import fit_linear_regression
from .forest import fit_random_forest
from .metrics import accuracy, macro_f1, r2, score
from .gridsearch import GridSearchResult, grid_search
from .changepoint import ChangePointResult, detect_changepoints
from .model_io import (
    Model,
    fit_model,
    load_model,
    predict,
    rank_model_attributes,
    save_model,
)

__all__ = [
    "FeatureMatrix", "feature_matrix", "scale_features",
    "KMeansResult", "fit_kmeans",
    "fit_agglomerative",
    "PCAResult", "fit_pca",
    "fit_linear_regression",
    "fit_random_forest",
    "accuracy", "macro_f1", "r2", "score",
    "GridSearchResult", "grid_search",
    "ChangePointResult", "detect_changepoints",
    "Model", "fit_model", "load_model", "predict",
    "rank_model_attributes", "save_model",
]
