"""Learner families, metrics, and cross-validation."""

import math

import numpy as np
import pytest

from mlhive.datasets import generate_dataset
from mlhive.learners import (
    FAMILY_TASKS,
    MEASURE_TASKS,
    LearnerError,
    LearnerSpec,
    LossSpec,
    cross_val_loss,
    evaluate_metric,
    family_task,
    fit_kmeans,
    oriented_loss,
    resolve_hyperparams,
    train_evaluate,
)
from mlhive.params import ParamSet


def spec(family: str, **params) -> LearnerSpec:
    return LearnerSpec(family, ParamSet.from_mapping({k: str(v) for k, v in params.items()}))


class TestHyperparams:
    def test_defaults_fill_missing_names(self):
        assert resolve_hyperparams("knn", ParamSet()) == {"k": 5}
        assert resolve_hyperparams("ridge", ParamSet()) == {"alpha": 1.0}
        assert resolve_hyperparams("dbscan", ParamSet()) == {"eps": 0.5, "metric": "euclidean"}

    def test_values_override_defaults(self):
        assert resolve_hyperparams("knn", ParamSet([("k", "3")])) == {"k": 3}
        got = resolve_hyperparams("dbscan", ParamSet([("metric", "manhattan")]))
        assert got == {"eps": 0.5, "metric": "manhattan"}

    def test_unknown_family_and_name(self):
        with pytest.raises(LearnerError, match="unknown learner family"):
            resolve_hyperparams("svm", ParamSet())
        with pytest.raises(LearnerError, match="unknown hyperparameter"):
            resolve_hyperparams("knn", ParamSet([("kk", "3")]))

    def test_markers_rejected(self):
        with pytest.raises(LearnerError, match="concrete"):
            resolve_hyperparams("knn", ParamSet([("k", "?")]))
        with pytest.raises(LearnerError, match="concrete"):
            resolve_hyperparams("knn", ParamSet([("k", "*")]))

    @pytest.mark.parametrize(
        "family,params,message",
        [
            ("knn", {"k": "0"}, "k must be >= 1"),
            ("knn", {"k": "abc"}, "must be an integer"),
            ("ridge", {"alpha": "-1"}, "alpha must be >= 0"),
            ("ridge", {"alpha": "x"}, "must be a number"),
            ("kmeans", {"n_clusters": "0"}, "n_clusters must be >= 1"),
            ("dbscan", {"eps": "0"}, "eps must be > 0"),
            ("dbscan", {"metric": "cosine"}, "metric must be one of"),
            ("ncc", {"metric": "cosine"}, "metric must be one of"),
        ],
    )
    def test_bounds(self, family, params, message):
        with pytest.raises(LearnerError, match=message):
            resolve_hyperparams(family, ParamSet.from_mapping(params))

    def test_spec_fails_fast(self):
        with pytest.raises(LearnerError):
            LearnerSpec("knn", ParamSet([("k", "-2")]))
        with pytest.raises(LearnerError):
            LossSpec("f1", "max")
        with pytest.raises(LearnerError):
            LossSpec("acc", "sideways")

    def test_family_task_table(self):
        assert family_task("knn") == "classification"
        assert set(FAMILY_TASKS.values()) == set(MEASURE_TASKS.values())
        with pytest.raises(LearnerError):
            family_task("mystery")


class TestClassification:
    def test_ncc_separates_two_centroids(self):
        X_tr = np.array([[0.0, 0.0], [0.2, 0.0], [10.0, 10.0], [10.2, 10.0]])
        y_tr = np.array([0.0, 0.0, 1.0, 1.0])
        X_va = np.array([[0.5, 0.5], [9.5, 9.5]])
        pred = train_evaluate(spec("ncc"), X_tr, y_tr, X_va)
        np.testing.assert_array_equal(pred, [0.0, 1.0])
        pred_m = train_evaluate(spec("ncc", metric="manhattan"), X_tr, y_tr, X_va)
        np.testing.assert_array_equal(pred_m, [0.0, 1.0])

    def test_ncc_tie_takes_first_class(self):
        X_tr = np.array([[0.0], [2.0]])
        y_tr = np.array([3.0, 7.0])
        pred = train_evaluate(spec("ncc"), X_tr, y_tr, np.array([[1.0]]))
        assert pred[0] == 3.0

    def test_knn_memorizes_with_k1(self):
        ds = generate_dataset("blobs", n=20, seed=3, noise=0.5)
        pred = train_evaluate(spec("knn", k=1), ds.X, ds.y, ds.X)
        np.testing.assert_array_equal(pred, ds.y)

    def test_knn_vote_tie_takes_smallest_label(self):
        X_tr = np.array([[0.0], [2.0]])
        y_tr = np.array([4.0, 1.0])
        pred = train_evaluate(spec("knn", k=2), X_tr, y_tr, np.array([[1.0]]))
        assert pred[0] == 1.0

    def test_knn_k_exceeding_train_size(self):
        X = np.zeros((3, 2))
        with pytest.raises(LearnerError, match="exceeds training size"):
            train_evaluate(spec("knn", k=4), X, np.zeros(3), X)


class TestRidge:
    def test_alpha_zero_matches_least_squares(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(40, 3))
        y = X @ np.array([1.5, -2.0, 0.5]) + 0.7 + rng.normal(size=40) * 0.1
        pred = train_evaluate(spec("ridge", alpha=0), X, y, X)
        A = np.column_stack([X, np.ones(40)])
        w, *_ = np.linalg.lstsq(A, y, rcond=None)
        np.testing.assert_allclose(pred, A @ w, atol=1e-8)

    def test_intercept_is_not_penalized(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(30, 2))
        y = np.full(30, 3.0)
        pred = train_evaluate(spec("ridge", alpha=1e6), X, y, X)
        np.testing.assert_allclose(pred, 3.0, atol=1e-3)

    def test_singular_system_reported(self):
        X = np.zeros((5, 2))
        X[:, 0] = np.arange(5.0)
        with pytest.raises(LearnerError, match="singular"):
            train_evaluate(spec("ridge", alpha=0), X, np.arange(5.0), X)

    def test_large_alpha_shrinks_slope(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(50, 1))
        y = 4.0 * X[:, 0]
        small = train_evaluate(spec("ridge", alpha=0.001), X, y, np.array([[1.0], [-1.0]]))
        large = train_evaluate(spec("ridge", alpha=1000.0), X, y, np.array([[1.0], [-1.0]]))
        assert abs(large[0] - large[1]) < abs(small[0] - small[1])


class TestClustering:
    def test_kmeans_objective_never_increases(self):
        ds = generate_dataset("blobs", n=60, seed=9, noise=1.5, centers=3, task="clustering")
        _, trace = fit_kmeans(3, ds.X, seed=0)
        assert len(trace) >= 1
        assert all(a >= b - 1e-9 for a, b in zip(trace, trace[1:]))

    def test_kmeans_recovers_separated_blobs(self):
        ds = generate_dataset("blobs", n=40, seed=10, noise=0.3, centers=2, task="clustering")
        pred = train_evaluate(spec("kmeans", n_clusters=2), ds.X, ds.y, ds.X, seed=5)
        assert evaluate_metric("fms", ds.y, pred) == pytest.approx(1.0)

    def test_kmeans_k_exceeding_n(self):
        with pytest.raises(LearnerError, match="exceeds sample count"):
            fit_kmeans(5, np.zeros((3, 2)), seed=0)

    def test_kmeans_deterministic_given_seed(self):
        ds = generate_dataset("blobs", n=30, seed=11, noise=2.0, centers=3, task="clustering")
        a = train_evaluate(spec("kmeans", n_clusters=3), ds.X, ds.y, ds.X, seed=4)
        b = train_evaluate(spec("kmeans", n_clusters=3), ds.X, ds.y, ds.X, seed=4)
        np.testing.assert_array_equal(a, b)

    def _two_tight_groups(self):
        angles = np.linspace(0, 2 * np.pi, 6, endpoint=False)
        ring = 0.05 * np.column_stack([np.cos(angles), np.sin(angles)])
        return np.concatenate([ring, ring + np.array([10.0, 10.0])])

    def test_dbscan_finds_two_clusters_and_isolates_strays(self):
        X_tr = self._two_tight_groups()
        X_va = np.array([[0.0, 0.1], [10.0, 10.1], [50.0, 50.0], [60.0, 60.0]])
        pred = train_evaluate(spec("dbscan", eps=0.5), X_tr, np.zeros(12), X_va)
        assert pred[0] == 0.0 and pred[1] == 1.0
        # unreachable points get fresh ids, distinct from clusters and each other
        assert pred[2] == 2.0 and pred[3] == 3.0

    def test_dbscan_core_threshold_boundary(self):
        # neighbor counts include the point itself; five coincident points are
        # exactly at the core threshold, four fall below it
        at_core = np.zeros((5, 2))
        below = np.zeros((4, 2))
        probe = np.zeros((2, 2))
        clustered = train_evaluate(spec("dbscan", eps=0.5), at_core, np.zeros(5), probe)
        np.testing.assert_array_equal(clustered, [0.0, 0.0])
        isolated = train_evaluate(spec("dbscan", eps=0.5), below, np.zeros(4), probe)
        np.testing.assert_array_equal(isolated, [0.0, 1.0])

    def test_dbscan_manhattan_metric_changes_reach(self):
        # (1,1) is at L2 distance ~1.41 but L1 distance 2 from the origin
        X_tr = np.concatenate([np.zeros((5, 2)), np.full((5, 2), 1.0)])
        pred_l2 = train_evaluate(spec("dbscan", eps=1.5), X_tr, np.zeros(10), np.zeros((1, 2)))
        pred_l1 = train_evaluate(
            spec("dbscan", eps=1.5, metric="manhattan"), X_tr, np.zeros(10), np.zeros((1, 2))
        )
        assert pred_l2[0] == 0.0 and pred_l1[0] == 0.0
        # under L2 the two heaps merge into one cluster; under L1 they split
        far = train_evaluate(
            spec("dbscan", eps=1.5, metric="manhattan"), X_tr, np.zeros(10), np.full((1, 2), 1.0)
        )
        assert far[0] == 1.0


class TestMetrics:
    def test_accuracy(self):
        assert evaluate_metric("acc", np.array([1.0, 0, 1]), np.array([1.0, 1, 1])) == pytest.approx(
            2 / 3
        )

    def test_mse(self):
        assert evaluate_metric("mse", np.array([1.0, 2.0]), np.array([2.0, 4.0])) == pytest.approx(
            2.5
        )

    def test_fms_known_value(self):
        truth = np.array([0.0, 0.0, 1.0, 1.0])
        pred = np.zeros(4)
        assert evaluate_metric("fms", truth, pred) == pytest.approx(2 / math.sqrt(12), abs=1e-12)

    def test_fms_perfect_and_permuted(self):
        truth = np.array([0.0, 0.0, 1.0, 1.0, 2.0])
        assert evaluate_metric("fms", truth, truth) == pytest.approx(1.0)
        permuted = np.array([5.0, 5.0, 9.0, 9.0, 7.0])
        assert evaluate_metric("fms", truth, permuted) == pytest.approx(1.0)

    def test_fms_degenerate_is_zero(self):
        truth = np.array([0.0, 1.0, 2.0])
        assert evaluate_metric("fms", truth, np.zeros(3)) == 0.0

    def test_input_validation(self):
        with pytest.raises(LearnerError, match="equal-length"):
            evaluate_metric("acc", np.zeros(3), np.zeros(4))
        with pytest.raises(LearnerError, match="equal-length"):
            evaluate_metric("acc", np.zeros(0), np.zeros(0))
        with pytest.raises(LearnerError, match="unknown measure"):
            evaluate_metric("auc", np.zeros(3), np.zeros(3))

    def test_oriented_loss(self):
        assert oriented_loss(0.9, LossSpec("acc", "max")) == -0.9
        assert oriented_loss(0.9, LossSpec("mse", "min")) == 0.9


class TestCrossVal:
    def test_noise_free_linear_data_fits_exactly(self):
        ds = generate_dataset("linreg", n=50, seed=12, noise=0.0, dims=3)
        loss = cross_val_loss(spec("ridge", alpha=0), ds, k=5, seed=0, loss=LossSpec("mse", "min"))
        assert loss <= 1e-8

    def test_separated_blobs_classify_perfectly(self):
        ds = generate_dataset("blobs", n=40, seed=13, noise=0.3)
        loss = cross_val_loss(spec("knn", k=1), ds, k=5, seed=0, loss=LossSpec("acc", "max"))
        assert loss == pytest.approx(-1.0)

    def test_deterministic(self):
        ds = generate_dataset("blobs", n=36, seed=14, noise=1.5, centers=3, task="clustering")
        kw = dict(dataset=ds, k=3, seed=7, loss=LossSpec("fms", "max"))
        assert cross_val_loss(spec("kmeans", n_clusters=3), **kw) == cross_val_loss(
            spec("kmeans", n_clusters=3), **kw
        )

    def test_task_mismatch(self):
        ds = generate_dataset("blobs", n=20, seed=15)
        with pytest.raises(LearnerError, match="handles regression"):
            cross_val_loss(spec("ridge"), ds, k=2, seed=0, loss=LossSpec("mse", "min"))

    def test_measure_mismatch(self):
        ds = generate_dataset("blobs", n=20, seed=16)
        with pytest.raises(LearnerError, match="does not apply"):
            cross_val_loss(spec("knn"), ds, k=2, seed=0, loss=LossSpec("mse", "min"))

    def test_too_few_rows_for_folds(self):
        ds = generate_dataset("blobs", n=8, seed=17)
        with pytest.raises(LearnerError, match="needs >= 10"):
            cross_val_loss(spec("knn", k=1), ds, k=5, seed=0, loss=LossSpec("acc", "max"))
