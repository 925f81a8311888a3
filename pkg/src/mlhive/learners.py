"""Native learners, evaluation metrics and k-fold cross-validation.

Five families: ncc and knn (classification), ridge (regression), kmeans and
dbscan (clustering). Hyperparameters arrive as canonical text values; missing
ones fall back to family defaults. Everything is deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .datasets import Dataset, kfold_split
from .params import ParamSet
from .seeds import stable_hash

__all__ = [
    "LearnerError",
    "LearnerSpec",
    "LossSpec",
    "FAMILY_TASKS",
    "MEASURE_TASKS",
    "family_task",
    "resolve_hyperparams",
    "train_evaluate",
    "fit_kmeans",
    "evaluate_metric",
    "oriented_loss",
    "cross_val_loss",
]


class LearnerError(ValueError):
    """Raised for invalid learner specifications or unusable inputs."""


FAMILY_TASKS = {
    "ncc": "classification",
    "knn": "classification",
    "ridge": "regression",
    "kmeans": "clustering",
    "dbscan": "clustering",
}

MEASURE_TASKS = {"acc": "classification", "mse": "regression", "fms": "clustering"}

_METRICS = ("euclidean", "manhattan")
_DBSCAN_MIN_SAMPLES = 5

_DEFAULTS = {
    "ncc": {"metric": "euclidean"},
    "knn": {"k": "5"},
    "ridge": {"alpha": "1"},
    "kmeans": {"n_clusters": "8"},
    "dbscan": {"eps": "0.5", "metric": "euclidean"},
}


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    params: ParamSet

    def __post_init__(self) -> None:
        resolve_hyperparams(self.family, self.params)  # fail fast on bad specs


@dataclass(frozen=True)
class LossSpec:
    measure: str
    direction: str

    def __post_init__(self) -> None:
        if self.measure not in MEASURE_TASKS:
            raise LearnerError(f"unknown measure {self.measure!r}")
        if self.direction not in ("max", "min"):
            raise LearnerError(f"unknown direction {self.direction!r}")


def family_task(family: str) -> str:
    try:
        return FAMILY_TASKS[family]
    except KeyError:
        raise LearnerError(f"unknown learner family {family!r}") from None


def _as_int(family: str, name: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise LearnerError(f"{family}: {name} must be an integer, got {text!r}") from None


def _as_float(family: str, name: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise LearnerError(f"{family}: {name} must be a number, got {text!r}") from None


def resolve_hyperparams(family: str, params: ParamSet) -> dict:
    """Apply defaults and validate; returns typed hyperparameters."""
    if family not in FAMILY_TASKS:
        raise LearnerError(f"unknown learner family {family!r}")
    if not params.is_concrete():
        raise LearnerError(f"{family}: hyperparameters must be concrete, got {params.key()}")
    merged = dict(_DEFAULTS[family])
    for name, value in params:
        if name not in merged:
            raise LearnerError(f"{family}: unknown hyperparameter {name!r}")
        merged[name] = value

    out: dict = {}
    if family == "ncc":
        out["metric"] = merged["metric"]
    elif family == "knn":
        out["k"] = _as_int(family, "k", merged["k"])
        if out["k"] < 1:
            raise LearnerError(f"knn: k must be >= 1, got {out['k']}")
    elif family == "ridge":
        out["alpha"] = _as_float(family, "alpha", merged["alpha"])
        if out["alpha"] < 0:
            raise LearnerError(f"ridge: alpha must be >= 0, got {out['alpha']}")
    elif family == "kmeans":
        out["n_clusters"] = _as_int(family, "n_clusters", merged["n_clusters"])
        if out["n_clusters"] < 1:
            raise LearnerError(f"kmeans: n_clusters must be >= 1, got {out['n_clusters']}")
    else:  # dbscan
        out["eps"] = _as_float(family, "eps", merged["eps"])
        if out["eps"] <= 0:
            raise LearnerError(f"dbscan: eps must be > 0, got {out['eps']}")
        out["metric"] = merged["metric"]
    if "metric" in out and out["metric"] not in _METRICS:
        raise LearnerError(f"{family}: metric must be one of {_METRICS}, got {out['metric']!r}")
    return out


def _pairwise(metric: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if metric == "euclidean":
        return kernels.pairwise_sq_euclidean(a, b)
    return kernels.pairwise_manhattan(a, b)


def _predict_ncc(hp: dict, X_tr, y_tr, X_va) -> np.ndarray:
    classes = np.unique(y_tr)
    centroids = np.stack([X_tr[y_tr == c].mean(axis=0) for c in classes])
    dist = _pairwise(hp["metric"], X_va, centroids)
    return classes[np.argmin(dist, axis=1)]


def _predict_knn(hp: dict, X_tr, y_tr, X_va) -> np.ndarray:
    k = hp["k"]
    if k > X_tr.shape[0]:
        raise LearnerError(f"knn: k={k} exceeds training size {X_tr.shape[0]}")
    dist = kernels.pairwise_sq_euclidean(X_va, X_tr)
    # stable sort keeps the lower index on equal distances
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    labels = np.unique(y_tr)
    votes = y_tr[nearest]
    counts = np.stack([(votes == c).sum(axis=1) for c in labels], axis=1)
    return labels[np.argmax(counts, axis=1)]  # argmax tie -> smallest label


def _predict_ridge(hp: dict, X_tr, y_tr, X_va) -> np.ndarray:
    n, d = X_tr.shape
    A = np.column_stack([X_tr, np.ones(n)])
    penalty = np.diag(np.concatenate([np.full(d, hp["alpha"]), [0.0]]))  # free intercept
    try:
        w = np.linalg.solve(A.T @ A + penalty, A.T @ y_tr)
    except np.linalg.LinAlgError as exc:
        raise LearnerError(f"ridge: singular system ({exc})") from None
    return np.column_stack([X_va, np.ones(X_va.shape[0])]) @ w


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[int(rng.integers(n))]
    closest = kernels.pairwise_sq_euclidean(X, centroids[:1])[:, 0]
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all points coincide with a centroid
        else:
            idx = int(rng.choice(n, p=closest / total))
        centroids[i] = X[idx]
        d_new = kernels.pairwise_sq_euclidean(X, centroids[i : i + 1])[:, 0]
        closest = np.minimum(closest, d_new)
    return centroids


def fit_kmeans(n_clusters: int, X: np.ndarray, seed: int, tol: float = 1e-8, max_iter: int = 300):
    """Seeded k-means++ init plus Lloyd iterations; returns (centroids, objective trace)."""
    k = n_clusters
    n = X.shape[0]
    if k > n:
        raise LearnerError(f"kmeans: n_clusters={k} exceeds sample count {n}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng)
    prev_obj = math.inf
    objective_trace: list[float] = []
    for _ in range(max_iter):
        dist = kernels.pairwise_sq_euclidean(X, centroids)
        labels = np.argmin(dist, axis=1)
        for c in range(k):  # reseed empty clusters at the farthest point
            if not (labels == c).any():
                far = int(np.argmax(dist[np.arange(n), labels]))
                centroids[c] = X[far]
                dist[:, c] = kernels.pairwise_sq_euclidean(X, centroids[c : c + 1])[:, 0]
                labels = np.argmin(dist, axis=1)
        objective = float(dist[np.arange(n), labels].sum())
        objective_trace.append(objective)
        new_centroids = np.stack(
            [X[labels == c].mean(axis=0) if (labels == c).any() else centroids[c] for c in range(k)]
        )
        shift = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        if prev_obj - objective <= tol and shift <= tol:
            break
        prev_obj = objective
    return centroids, objective_trace


def _predict_kmeans(hp: dict, X_tr, y_tr, X_va, seed: int) -> np.ndarray:
    centroids, _ = fit_kmeans(hp["n_clusters"], X_tr, seed)
    dist = kernels.pairwise_sq_euclidean(X_va, centroids)
    return np.argmin(dist, axis=1).astype(np.float64)


def _fit_dbscan(hp: dict, X: np.ndarray):
    """Returns (labels, core_mask); noise labeled -1."""
    n = X.shape[0]
    if hp["metric"] == "euclidean":
        within = _pairwise("euclidean", X, X) <= hp["eps"] ** 2
    else:
        within = _pairwise("manhattan", X, X) <= hp["eps"]
    core = within.sum(axis=1) >= _DBSCAN_MIN_SAMPLES  # neighbor count includes self
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for start in range(n):
        if not core[start] or labels[start] != -1:
            continue
        frontier = [start]
        labels[start] = cluster
        while frontier:
            point = frontier.pop()
            if not core[point]:
                continue
            for nb in np.flatnonzero(within[point]):
                if labels[nb] == -1:
                    labels[nb] = cluster
                    if core[nb]:
                        frontier.append(int(nb))
        cluster += 1
    return labels, core


def _predict_dbscan(hp: dict, X_tr, y_tr, X_va) -> np.ndarray:
    labels, core = _fit_dbscan(hp, X_tr)
    out = np.empty(X_va.shape[0], dtype=np.float64)
    core_idx = np.flatnonzero(core)
    next_noise = int(labels.max()) + 1 if labels.size else 0
    if core_idx.size:
        if hp["metric"] == "euclidean":
            dist = _pairwise("euclidean", X_va, X_tr[core_idx])
            threshold = hp["eps"] ** 2
        else:
            dist = _pairwise("manhattan", X_va, X_tr[core_idx])
            threshold = hp["eps"]
    for i in range(X_va.shape[0]):
        if core_idx.size:
            j = int(np.argmin(dist[i]))
            if dist[i, j] <= threshold:
                out[i] = labels[core_idx[j]]
                continue
        out[i] = next_noise  # unreachable point: its own singleton cluster
        next_noise += 1
    return out


def train_evaluate(
    spec: LearnerSpec, X_tr: np.ndarray, y_tr: np.ndarray, X_va: np.ndarray, seed: int = 0
) -> np.ndarray:
    """Fit on the training split and return predictions for the validation rows."""
    if X_tr.shape[0] != y_tr.shape[0]:
        raise LearnerError("training features/targets length mismatch")
    if X_tr.shape[0] == 0 or X_va.shape[0] == 0:
        raise LearnerError("empty split")
    hp = resolve_hyperparams(spec.family, spec.params)
    if spec.family == "ncc":
        return _predict_ncc(hp, X_tr, y_tr, X_va)
    if spec.family == "knn":
        return _predict_knn(hp, X_tr, y_tr, X_va)
    if spec.family == "ridge":
        return _predict_ridge(hp, X_tr, y_tr, X_va)
    if spec.family == "kmeans":
        return _predict_kmeans(hp, X_tr, y_tr, X_va, seed)
    return _predict_dbscan(hp, X_tr, y_tr, X_va)


def _pair_count(counts: np.ndarray) -> int:
    return int(sum(int(c) * (int(c) - 1) // 2 for c in counts))


def evaluate_metric(measure: str, truth: np.ndarray, pred: np.ndarray) -> float:
    """acc / mse / fms. fms counts co-clustered pairs and is 0 when degenerate."""
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape or truth.ndim != 1 or truth.size == 0:
        raise LearnerError(
            f"metric inputs must be equal-length non-empty vectors, got {truth.shape} and {pred.shape}"
        )
    if measure == "acc":
        return float(np.mean(truth == pred))
    if measure == "mse":
        return float(np.mean((truth - pred) ** 2))
    if measure != "fms":
        raise LearnerError(f"unknown measure {measure!r}")
    _, t_idx = np.unique(truth, return_inverse=True)
    _, p_idx = np.unique(pred, return_inverse=True)
    table = np.zeros((t_idx.max() + 1, p_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (t_idx, p_idx), 1)
    tp = _pair_count(table.ravel())
    together_truth = _pair_count(table.sum(axis=1))
    together_pred = _pair_count(table.sum(axis=0))
    if together_truth == 0 or together_pred == 0:
        return 0.0
    return tp / math.sqrt(together_truth) / math.sqrt(together_pred)


def oriented_loss(metric_value: float, loss: LossSpec) -> float:
    """Internal losses always minimize: maximize-measures are negated."""
    return -metric_value if loss.direction == "max" else metric_value


def cross_val_loss(spec: LearnerSpec, dataset: Dataset, k: int, seed: int, loss: LossSpec) -> float:
    """Mean oriented loss over deterministic k folds."""
    task = family_task(spec.family)
    if task != dataset.task:
        raise LearnerError(
            f"{spec.family} handles {task}, but dataset {dataset.name!r} is {dataset.task}"
        )
    if MEASURE_TASKS[loss.measure] != dataset.task:
        raise LearnerError(
            f"measure {loss.measure!r} does not apply to a {dataset.task} dataset"
        )
    if dataset.n < 2 * k:
        raise LearnerError(
            f"dataset {dataset.name!r} has {dataset.n} rows; needs >= {2 * k} for {k} folds"
        )
    splits = kfold_split(dataset.n, k, seed)
    total = 0.0
    for fold_idx, (tr, va) in enumerate(splits):
        pred = train_evaluate(
            spec, dataset.X[tr], dataset.y[tr], dataset.X[va], seed=stable_hash("fit", seed, fold_idx)
        )
        metric = evaluate_metric(loss.measure, dataset.y[va], pred)
        total += oriented_loss(metric, loss)
    return total / k
