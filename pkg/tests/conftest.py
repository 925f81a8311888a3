"""Shared fixtures and random-corpus generators for the test suite."""

from __future__ import annotations

import json
import random
import time
from pathlib import Path

import pytest

from mlhive import Hierarchy, build_hierarchy, parse_catalog, parse_query
from mlhive.query import Query

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

SUITE_START = time.monotonic()


def pytest_collection_modifyitems(config, items):
    # run the acceptance gate last so its whole-suite timing check is meaningful
    gate = [item for item in items if "test_acceptance" in item.nodeid]
    items[:] = [item for item in items if item not in gate] + gate


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def standard_hierarchy() -> Hierarchy:
    return build_hierarchy(parse_catalog(json.loads((FIXTURES / "catalog.json").read_text())))


def load_fixture_query(name: str) -> Query:
    return parse_query((FIXTURES / name).read_text())


def query_from_dict(doc: dict) -> Query:
    return parse_query(json.dumps(doc))


# --- random structure corpus (no learners involved; match-pass tests) ---------

_FAMILY_POOL = ["alpha", "bravo", "carol", "delta", "echo", "fox"]
_PARAM_POOL = ["p", "q", "r", "s"]
_VALUE_POOL = ["1", "2", "3", "red", "blue", "tiny", "10", "0.5"]


def random_structure_catalog(rng: random.Random, max_terminals: int = 64) -> dict:
    """A catalog of abstract configurations with nested groups and one dataset."""
    n_families = rng.randint(1, 4)
    families = rng.sample(_FAMILY_POOL, n_families)
    algorithms = []
    seen = set()
    budget = rng.randint(1, max_terminals)
    attempts = 0
    while len(algorithms) < budget and attempts < 20 * max_terminals:
        attempts += 1
        family = rng.choice(families)
        names = rng.sample(_PARAM_POOL, rng.randint(1, 3))
        params = {name: rng.choice(_VALUE_POOL) for name in sorted(names)}
        key = (family, tuple(sorted(params.items())))
        if key in seen:
            continue
        seen.add(key)
        depth = rng.choice([0, 0, 1, 1, 2, 3])
        group = [f"g{rng.randint(0, 2)}{level}" for level in range(depth)]
        algorithms.append({"family": family, "params": params, "group": group})
    return {
        "algorithms": algorithms,
        "datasets": [
            {
                "name": "probe",
                "params": {"kind": "blobs"},
                "generator": {
                    "kind": "blobs",
                    "n": 12,
                    "seed": 5,
                    "noise": 0.5,
                    "centers": 2,
                    "task": "classification",
                },
            }
        ],
    }


def random_structure_subquery(rng: random.Random, catalog: dict, tuning: bool) -> dict:
    """A sub-query aimed at the given catalog, usually overlapping its configs."""
    algorithms = catalog["algorithms"]
    base = rng.choice(algorithms)
    name = base["family"] if rng.random() < 0.85 else "*"
    params = {}
    domains = {}
    for pname, pvalue in base["params"].items():
        roll = rng.random()
        if roll < 0.45:
            params[pname] = pvalue
        elif roll < 0.65:
            params[pname] = "*"
        else:
            params[pname] = "?"
            domains[pname] = {"kind": "choice", "values": list(_VALUE_POOL)}
    if not params:
        params[next(iter(base["params"]))] = "?"
        domains[next(iter(base["params"]))] = {"kind": "choice", "values": list(_VALUE_POOL)}
    if tuning and "?" not in params.values():
        pname = rng.choice(sorted(params))
        params[pname] = "?"
        domains[pname] = {"kind": "choice", "values": list(_VALUE_POOL)}
    if not tuning:
        for pname in list(params):
            if params[pname] == "?":
                params[pname] = "*"
                domains.pop(pname, None)
    doc = {"name": name, "params": params}
    if domains:
        doc["domains"] = domains
    return doc


def random_structure_query(rng: random.Random, catalog: dict, tuning: bool) -> dict:
    task = "tune" if tuning else "select"
    return {
        "algorithms": [random_structure_subquery(rng, catalog, tuning)],
        "data": {"name": "probe", "params": {}},
        "output": {"task": task, "measure": "acc", "direction": "max", "folds": 3},
    }


# --- runnable ML scenarios (equivalence / order-independence tests) -----------

_SCENARIO_DATASETS = [
    ("blobs2", {"kind": "blobs", "centers": 2, "noise": 2.2, "task": "classification"}, "classification"),
    ("moons", {"kind": "moons", "noise": 0.3, "task": "classification"}, "classification"),
    ("blobs3", {"kind": "blobs", "centers": 3, "noise": 1.4, "task": "clustering"}, "clustering"),
    ("lin", {"kind": "linreg", "noise": 0.6, "dims": 3}, "regression"),
    ("quad", {"kind": "quad", "noise": 0.4}, "regression"),
]

_TASK_FAMILIES = {
    "classification": [
        ("knn", "k", [1, 3, 5, 7], {"kind": "intrange", "lo": 1, "hi": 8}),
        ("ncc", "metric", ["euclidean", "manhattan"], {"kind": "choice", "values": ["euclidean", "manhattan"]}),
    ],
    "regression": [
        ("ridge", "alpha", [0.1, 1.0, 10.0], {"kind": "loguniform", "lo": 0.001, "hi": 100.0}),
    ],
    "clustering": [
        ("kmeans", "n_clusters", [2, 3, 4], {"kind": "intrange", "lo": 2, "hi": 5}),
        ("dbscan", "eps", [0.6, 0.9, 1.3], {"kind": "uniform", "lo": 0.3, "hi": 1.5}),
    ],
}

_MEASURES = {"classification": "acc", "regression": "mse", "clustering": "fms"}
_DIRECTIONS = {"acc": "max", "mse": "min", "fms": "max"}


def random_scenario(rng: random.Random) -> tuple[dict, dict]:
    """A small runnable catalog plus a query in one of four shapes."""
    ds_name, gen, task = rng.choice(_SCENARIO_DATASETS)
    gen = dict(gen, n=rng.choice([36, 48, 60]), seed=rng.randint(0, 10_000))
    # include every family for the dataset's task, sometimes an off-task one too
    algorithms = []
    for family, pname, values, _dom in _TASK_FAMILIES[task]:
        for value in values:
            group = ["deep"] if rng.random() < 0.3 else []
            algorithms.append({"family": family, "params": {pname: value}, "group": group})
    if rng.random() < 0.25:
        other_task = rng.choice([t for t in _TASK_FAMILIES if t != task])
        family, pname, values, _dom = rng.choice(_TASK_FAMILIES[other_task])
        algorithms.append({"family": family, "params": {pname: values[0]}})
    catalog = {
        "algorithms": algorithms,
        "datasets": [{"name": ds_name, "params": {"task": task}, "generator": gen}],
    }

    measure = _MEASURES[task]
    shape = rng.choice(["fixed", "tune", "select_all", "hybrid"])
    family, pname, values, dom = rng.choice(_TASK_FAMILIES[task])
    if shape == "fixed":
        algs = [{"name": family, "params": {pname: rng.choice(values)}}]
        out_task = "select"
    elif shape == "tune":
        algs = [{"name": family, "params": {pname: "?"}, "domains": {pname: dom}}]
        out_task = "tune"
    elif shape == "select_all":
        algs = [{"name": "*", "params": "*"}]
        out_task = "select"
    else:  # hybrid: family-wide selection plus one tunable clause
        algs = [
            {"name": "*", "params": "*"},
            {"name": family, "params": {pname: "?"}, "domains": {pname: dom}},
        ]
        out_task = "select"
    query = {
        "algorithms": algs,
        "data": {"name": ds_name, "params": {}},
        "output": {
            "task": out_task,
            "measure": measure,
            "direction": _DIRECTIONS[measure],
            "folds": 3,
        },
    }
    return catalog, query
