"""Synthetic datasets, their JSON form, and deterministic k-fold splitting."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DatasetError",
    "Dataset",
    "generate_dataset",
    "dataset_to_json",
    "dataset_from_json",
    "load_dataset_file",
    "save_dataset_file",
    "kfold_split",
    "GENERATOR_KINDS",
]

TASKS = ("classification", "regression", "clustering")
GENERATOR_KINDS = ("blobs", "moons", "linreg", "quad")


class DatasetError(ValueError):
    """Raised for malformed datasets or generator arguments."""


@dataclass(frozen=True)
class Dataset:
    name: str
    task: str
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise DatasetError(f"unknown task {self.task!r}")
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DatasetError(
                f"features must be (n, d) and targets (n,), got {X.shape} and {y.shape}"
            )
        if X.shape[0] < 2:
            raise DatasetError("dataset needs at least two rows")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DatasetError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])


_BLOB_CENTERS = np.array(
    [[0.0, 0.0], [6.0, 6.0], [0.0, 6.0], [6.0, 0.0], [-6.0, 3.0], [3.0, -6.0]]
)


def generate_dataset(
    kind: str,
    n: int,
    seed: int,
    noise: float = 0.5,
    centers: int = 2,
    dims: int = 3,
    task: str | None = None,
    name: str | None = None,
) -> Dataset:
    """Build one of the synthetic datasets.

    blobs: ``centers`` isotropic gaussians in 2-D, balanced labels.
    moons: two interleaved half-circles, balanced labels.
    linreg: noisy linear map from ``dims`` gaussian features.
    quad: noisy 1-D quadratic.
    """
    if kind not in GENERATOR_KINDS:
        raise DatasetError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")
    if n < 2:
        raise DatasetError(f"n must be >= 2, got {n}")
    if noise < 0:
        raise DatasetError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)

    if kind == "blobs":
        if not (2 <= centers <= len(_BLOB_CENTERS)):
            raise DatasetError(f"blobs supports 2..{len(_BLOB_CENTERS)} centers, got {centers}")
        labels = np.arange(n) % centers  # balanced by construction
        X = _BLOB_CENTERS[labels] + noise * rng.standard_normal((n, 2))
        default_task = "classification"
        y = labels.astype(np.float64)
    elif kind == "moons":
        n_outer = n // 2
        n_inner = n - n_outer
        t_outer = np.linspace(0.0, np.pi, n_outer)
        t_inner = np.linspace(0.0, np.pi, n_inner)
        X = np.concatenate(
            [
                np.column_stack([np.cos(t_outer), np.sin(t_outer)]),
                np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)]),
            ]
        )
        X = X + noise * rng.standard_normal(X.shape)
        y = np.concatenate([np.zeros(n_outer), np.ones(n_inner)])
        default_task = "classification"
    elif kind == "linreg":
        if dims < 1:
            raise DatasetError(f"dims must be >= 1, got {dims}")
        X = rng.standard_normal((n, dims))
        w = rng.uniform(-2.0, 2.0, size=dims)
        b = rng.uniform(-1.0, 1.0)
        y = X @ w + b + noise * rng.standard_normal(n)
        default_task = "regression"
    else:  # quad
        x = rng.uniform(-2.0, 2.0, size=n)
        y = 0.5 * x * x - x + 2.0 + noise * rng.standard_normal(n)
        X = x[:, None]
        default_task = "regression"

    task = task or default_task
    if task not in TASKS:
        raise DatasetError(f"unknown task {task!r}")
    if task == "clustering" and kind not in ("blobs", "moons"):
        raise DatasetError(f"{kind} cannot serve a clustering task")
    if task == "regression" and kind in ("blobs", "moons"):
        raise DatasetError(f"{kind} cannot serve a regression task")
    if task == "classification" and kind in ("linreg", "quad"):
        raise DatasetError(f"{kind} cannot serve a classification task")
    return Dataset(name=name or kind, task=task, X=X, y=y)


def dataset_to_json(dataset: Dataset) -> dict:
    return {
        "name": dataset.name,
        "task": dataset.task,
        "features": dataset.X.tolist(),
        "targets": dataset.y.tolist(),
    }


def dataset_from_json(doc: object) -> Dataset:
    if not isinstance(doc, dict):
        raise DatasetError("dataset document must be a JSON object")
    missing = {"name", "task", "features", "targets"} - set(doc)
    if missing:
        raise DatasetError(f"dataset document missing field(s) {sorted(missing)}")
    try:
        X = np.asarray(doc["features"], dtype=np.float64)
        y = np.asarray(doc["targets"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"dataset arrays malformed: {exc}") from None
    return Dataset(name=doc["name"], task=doc["task"], X=X, y=y)


def load_dataset_file(path: str) -> Dataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DatasetError(f"cannot read dataset file {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"dataset file {path!r} is not valid JSON: {exc}") from None
    return dataset_from_json(doc)


def save_dataset_file(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_json(dataset), fh)
        fh.write("\n")


def kfold_split(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic shuffled k-fold: returns (train_idx, valid_idx) per fold.

    Fold sizes differ by at most one.
    """
    if not (2 <= k <= n):
        raise DatasetError(f"fold count must satisfy 2 <= k <= n, got k={k}, n={n}")
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, k)
    splits = []
    for i, valid in enumerate(folds):
        train = np.concatenate([folds[j] for j in range(k) if j != i])
        splits.append((train, valid))
    return splits
