"""Scaling, k-means, agglomerative clustering, PCA.

Oracles: brute-force partition enumeration for small k-means instances,
scipy.cluster.hierarchy for agglomerative linkage, and direct SVD for PCA.
"""

import itertools

import numpy as np
import pytest
from scipy.cluster.hierarchy import fcluster, linkage as scipy_linkage

from vizpipe.analytics import (
    FeatureMatrix,
    feature_matrix,
    fit_agglomerative,
    fit_kmeans,
    fit_pca,
    scale_features,
)
from vizpipe.errors import (
    BothOrNeitherStopRule,
    EmptyMatrix,
    KTooLarge,
    TooManyComponents,
    TypeMismatch,
)
from vizpipe.frame import DataFrame, categorical_column, float_column, int_column


class TestFeatureMatrix:
    def test_selects_numeric_defaults(self):
        f = DataFrame([
            float_column("a", [1.0, 2.0]),
            categorical_column("c", ["x", "y"]),
            int_column("b", [3, 4]),
        ])
        X = feature_matrix(f)
        assert X.feature_names == ["a", "b"]
        np.testing.assert_array_equal(X.values, [[1.0, 3.0], [2.0, 4.0]])

    def test_null_rows_dropped_and_recorded(self):
        f = DataFrame([
            float_column("a", [1.0, np.nan, 3.0], [True, False, True]),
            float_column("b", [4.0, 5.0, 6.0]),
        ])
        X = feature_matrix(f, ["a", "b"])
        assert X.n == 2
        assert X.kept_rows.tolist() == [0, 2]
        assert X.dropped_rows().tolist() == [1]
        vals, valid = X.expand(np.array([10.0, 30.0]))
        assert np.isnan(vals[1]) and valid.tolist() == [True, False, True]

    def test_categorical_feature_rejected(self):
        f = DataFrame([categorical_column("c", ["x", "y"])])
        with pytest.raises(TypeMismatch):
            feature_matrix(f, ["c"])
        with pytest.raises(EmptyMatrix):
            feature_matrix(f)


class TestScaling:
    def test_standardize_uses_population_std(self):
        X = FeatureMatrix(np.array([[1.0], [2.0], [3.0]]), ["v"])
        out = scale_features(X, "standardize")
        np.testing.assert_allclose(out.values[:, 0], [-1.22474, 0.0, 1.22474], atol=1e-5)

    def test_minmax(self):
        X = FeatureMatrix(np.array([[5.0], [10.0], [15.0]]), ["v"])
        out = scale_features(X, "minmax", 0.0, 1.0)
        np.testing.assert_allclose(out.values[:, 0], [0.0, 0.5, 1.0])

    def test_constant_feature_conventions(self):
        X = FeatureMatrix(np.array([[4.0], [4.0], [4.0]]), ["v"])
        assert scale_features(X, "standardize").values.tolist() == [[0.0], [0.0], [0.0]]
        assert scale_features(X, "minmax", 2.0, 9.0).values.tolist() == [[2.0], [2.0], [2.0]]

    def test_normalize_rows_unit_l2(self):
        X = FeatureMatrix(np.array([[3.0, 4.0], [0.0, 0.0]]), ["a", "b"])
        out = scale_features(X, "normalize")
        np.testing.assert_allclose(out.values[0], [0.6, 0.8])
        assert out.values[1].tolist() == [0.0, 0.0]

    def test_none_is_identity(self):
        X = FeatureMatrix(np.array([[1.0, 2.0]]), ["a", "b"])
        assert scale_features(X, "none") is X

    def test_empty_rejected(self):
        with pytest.raises(EmptyMatrix):
            scale_features(FeatureMatrix(np.empty((0, 2)), ["a", "b"]), "standardize")


def exhaustive_min_sse(V: np.ndarray, k: int) -> float:
    """Minimum SSE over every assignment of n points to at most k clusters."""
    best = np.inf
    n = len(V)
    for assign in itertools.product(range(k), repeat=n):
        sse = 0.0
        for j in range(k):
            members = V[[i for i in range(n) if assign[i] == j]]
            if len(members):
                sse += float(((members - members.mean(axis=0)) ** 2).sum())
        best = min(best, sse)
    return best


class TestKMeans:
    def test_two_obvious_groups(self):
        V = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]])
        res = fit_kmeans(V, 2, seed=0)
        assert res.labels.tolist() == [0, 0, 1, 1]
        assert res.inertia == pytest.approx(1.0, abs=1e-12)

    def test_k1_contract(self):
        V = np.array([[1.0], [3.0], [5.0]])
        res = fit_kmeans(V, 1)
        assert res.labels.tolist() == [0, 0, 0]
        np.testing.assert_allclose(res.centroids, [[3.0]])

    def test_k_equals_n(self):
        V = np.array([[0.0], [5.0], [9.0]])
        res = fit_kmeans(V, 3, seed=1)
        assert res.inertia == pytest.approx(0.0, abs=1e-12)
        assert sorted(res.labels.tolist()) == [0, 1, 2]

    def test_first_occurrence_relabeling(self):
        rng = np.random.default_rng(5)
        V = rng.normal(size=(30, 2))
        V[10:20] += 8
        V[20:] -= 8
        res = fit_kmeans(V, 3, seed=9)
        seen = []
        for lab in res.labels.tolist():
            if lab not in seen:
                seen.append(lab)
        assert seen == [0, 1, 2]

    def test_inertia_history_non_increasing(self):
        rng = np.random.default_rng(2)
        V = rng.normal(size=(60, 3))
        res = fit_kmeans(V, 4, seed=3)
        hist = res.inertia_history
        assert all(hist[i + 1] <= hist[i] + 1e-9 for i in range(len(hist) - 1))

    def test_seed_determinism(self):
        rng = np.random.default_rng(4)
        V = rng.normal(size=(40, 2))
        a = fit_kmeans(V, 3, seed=7)
        b = fit_kmeans(V, 3, seed=7)
        assert a.labels.tolist() == b.labels.tolist()
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_labels_match_nearest_centroid(self):
        rng = np.random.default_rng(6)
        V = rng.normal(size=(50, 2))
        res = fit_kmeans(V, 4, seed=0)
        d2 = ((V[:, None, :] - res.centroids[None]) ** 2).sum(axis=2)
        np.testing.assert_array_equal(res.labels, d2.argmin(axis=1))

    def test_multi_restart_reaches_partition_optimum(self):
        rng = np.random.default_rng(8)
        hits = 0
        for trial in range(20):
            V = rng.uniform(0, 1, size=(6, 2))
            k = 2 + trial % 2
            best = min(fit_kmeans(V, k, seed=s).inertia for s in range(20))
            if abs(best - exhaustive_min_sse(V, k)) <= 1e-9:
                hits += 1
        assert hits >= 19

    def test_errors(self):
        with pytest.raises(KTooLarge):
            fit_kmeans(np.array([[1.0], [2.0]]), 3)
        with pytest.raises(EmptyMatrix):
            fit_kmeans(np.empty((0, 2)), 1)

    def test_standardize_then_cluster_matches_prescaled(self):
        rng = np.random.default_rng(12)
        V = rng.normal(size=(40, 3)) * np.array([100.0, 1.0, 0.01])
        X = FeatureMatrix(V, ["a", "b", "c"])
        scaled = scale_features(X, "standardize")
        inside = fit_kmeans(scaled, 3, seed=5)
        outside = fit_kmeans(FeatureMatrix(scaled.values.copy(), X.feature_names), 3, seed=5)
        assert inside.labels.tolist() == outside.labels.tolist()


class TestAgglomerative:
    def test_two_pairs_single_linkage_threshold(self):
        V = np.array([[0.0], [1.0], [10.0], [11.0]])
        labels = fit_agglomerative(V, "single", distance_threshold=5.0)
        assert labels.tolist() == [0, 0, 1, 1]

    def test_infinite_threshold_single_cluster(self):
        V = np.array([[0.0], [3.0], [50.0]])
        labels = fit_agglomerative(V, "average", distance_threshold=np.inf)
        assert labels.tolist() == [0, 0, 0]

    def test_n_clusters_n_singletons(self):
        V = np.array([[0.0], [2.0], [9.0]])
        labels = fit_agglomerative(V, "complete", n_clusters=3)
        assert labels.tolist() == [0, 1, 2]

    def test_stop_rule_required(self):
        V = np.array([[0.0], [1.0]])
        with pytest.raises(BothOrNeitherStopRule):
            fit_agglomerative(V, "single")
        with pytest.raises(BothOrNeitherStopRule):
            fit_agglomerative(V, "single", n_clusters=1, distance_threshold=1.0)

    @pytest.mark.parametrize("method", ["single", "complete", "average", "ward"])
    def test_matches_scipy_partitions(self, method):
        rng = np.random.default_rng(hash(method) % 2**32)
        for trial in range(8):
            V = rng.normal(size=(rng.integers(5, 25), rng.integers(1, 4)))
            k = int(rng.integers(2, min(5, len(V))))
            ours = fit_agglomerative(V, method, n_clusters=k)
            Z = scipy_linkage(V, method=method)
            ref = fcluster(Z, t=k, criterion="maxclust")
            # same partition up to label renaming
            pairing = {}
            ok = True
            for mine, theirs in zip(ours.tolist(), ref.tolist()):
                if pairing.setdefault(mine, theirs) != theirs:
                    ok = False
                    break
            assert ok and len(set(pairing.values())) == len(pairing), (
                f"{method} trial {trial}: partition mismatch"
            )

    def test_threshold_never_merges_far_groups(self):
        rng = np.random.default_rng(17)
        left = rng.normal(0, 0.5, size=(10, 2))
        right = rng.normal(0, 0.5, size=(10, 2)) + 100
        V = np.vstack([left, right])
        labels = fit_agglomerative(V, "complete", distance_threshold=50.0)
        assert len(set(labels[:10].tolist())) >= 1
        assert set(labels[:10].tolist()).isdisjoint(set(labels[10:].tolist()))


class TestPCA:
    def test_perfect_line(self):
        V = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        res = fit_pca(V, 2)
        np.testing.assert_allclose(res.components[0], [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-9)
        assert res.explained_variance[1] == pytest.approx(0.0, abs=1e-12)

    def test_single_varying_feature(self):
        V = np.array([[0.0, 5.0, 1.0], [1.0, 5.0, 1.0], [2.0, 5.0, 1.0]])
        res = fit_pca(V, 1)
        np.testing.assert_allclose(res.components[0], [1.0, 0.0, 0.0], atol=1e-9)

    def test_total_variance_identity(self):
        rng = np.random.default_rng(3)
        V = rng.normal(size=(30, 4))
        res = fit_pca(V, 4)
        total = ((V - V.mean(axis=0)) ** 2).sum() / (len(V) - 1)
        assert res.explained_variance.sum() == pytest.approx(total, rel=1e-9)

    def test_orthonormal_and_descending(self):
        rng = np.random.default_rng(9)
        V = rng.normal(size=(40, 5)) @ np.diag([3.0, 2.0, 1.0, 0.5, 0.1])
        res = fit_pca(V, 5)
        np.testing.assert_allclose(res.components @ res.components.T, np.eye(5), atol=1e-9)
        ev = res.explained_variance
        assert all(ev[i + 1] <= ev[i] + 1e-12 for i in range(4))

    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(21)
        V = rng.normal(size=(25, 3))
        res = fit_pca(V, 3)
        centered = V - V.mean(axis=0)
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        np.testing.assert_allclose(res.explained_variance, s ** 2 / (len(V) - 1), rtol=1e-9)
        for i in range(3):
            dot = abs(float(res.components[i] @ vt[i]))
            assert dot == pytest.approx(1.0, abs=1e-9)

    def test_projection_reconstructs(self):
        rng = np.random.default_rng(30)
        V = rng.normal(size=(20, 4))
        res = fit_pca(V, 4)
        centered = V - V.mean(axis=0)
        recon = res.projected @ res.components
        err = np.linalg.norm(centered - recon) / np.linalg.norm(centered)
        assert err <= 1e-8

    def test_sign_convention(self):
        rng = np.random.default_rng(31)
        V = rng.normal(size=(15, 3))
        res = fit_pca(V, 3)
        for comp in res.components:
            assert comp[int(np.argmax(np.abs(comp)))] > 0

    def test_component_limit(self):
        V = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]])
        with pytest.raises(TooManyComponents):
            fit_pca(V, 3)  # capped by min(n-1, d) = 2
        with pytest.raises(TooManyComponents):
            fit_pca(np.array([[1.0, 2.0], [3.0, 4.0]]), 2)  # n-1 = 1
