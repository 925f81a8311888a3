"""Budgeted hyperparameter search over a fixed configuration skeleton.

A tune task fixes some parameters, samples others from declared domains, and
enumerates the rest from value pools gathered across the hierarchy. Suggested
values are tried first (their cross product, in sorted-name order); the
remaining budget goes to random draws. Each draw samples parameters in sorted
name order from a single seeded stream, so evaluating with a larger budget
replays the smaller run exactly and then extends it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .learners import LearnerError
from .params import ParamSet
from .query import Choice, IntRange, TuneDomain

__all__ = [
    "TuningError",
    "TuneTask",
    "Trial",
    "TuneResult",
    "tune",
    "merge_value_pools",
]


class TuningError(ValueError):
    """Raised for malformed tune tasks."""


def _sorted_pairs(pairs: Iterable[tuple[str, object]], what: str) -> tuple:
    out = tuple(sorted(pairs, key=lambda p: p[0]))
    names = [name for name, _ in out]
    if len(set(names)) != len(names):
        raise TuningError(f"duplicate name in {what}")
    return out


@dataclass(frozen=True)
class TuneTask:
    """Everything a tuner needs to search one algorithm family.

    fixed:       concrete parameters, copied into every candidate unchanged.
    tunables:    (name, domain) pairs sampled per draw.
    enumerables: (name, pool) pairs chosen uniformly from pooled catalog values.
    seed_values: (name, values) suggestion pools for tunables, tried before
                 random draws; values outside the declared domain are dropped
                 at construction.
    """

    family: str
    fixed: ParamSet
    tunables: tuple[tuple[str, TuneDomain], ...]
    enumerables: tuple[tuple[str, tuple[str, ...]], ...]
    seed_values: tuple[tuple[str, tuple[str, ...]], ...]
    budget: int
    seed: int

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise TuningError(f"budget must be at least 1, got {self.budget}")
        tunables = _sorted_pairs(self.tunables, "tunables")
        enumerables = _sorted_pairs(
            ((n, tuple(sorted(set(vs)))) for n, vs in self.enumerables), "enumerables"
        )
        tunable_names = {n for n, _ in tunables}
        enum_names = {n for n, _ in enumerables}
        overlap = (tunable_names | enum_names) & set(self.fixed.names())
        if tunable_names & enum_names or overlap:
            raise TuningError("a parameter may appear in only one of fixed/tunables/enumerables")
        if not tunable_names and not enum_names:
            raise TuningError("nothing to search: no tunable or enumerable parameters")
        for name, pool in enumerables:
            if not pool:
                raise TuningError(f"enumerable parameter {name!r} has an empty value pool")
        seeds = []
        for name, values in _sorted_pairs(self.seed_values, "seed_values"):
            if name not in tunable_names:
                raise TuningError(f"seed values given for non-tunable parameter {name!r}")
            domain = dict(tunables)[name]
            kept = tuple(v for v in dict.fromkeys(values) if domain.contains(v))
            if kept:
                seeds.append((name, kept))
        object.__setattr__(self, "tunables", tunables)
        object.__setattr__(self, "enumerables", enumerables)
        object.__setattr__(self, "seed_values", tuple(seeds))

    def searched_names(self) -> tuple[str, ...]:
        return tuple(sorted([n for n, _ in self.tunables] + [n for n, _ in self.enumerables]))


@dataclass(frozen=True)
class Trial:
    params: ParamSet
    loss: float
    origin: str  # "seed" or "draw"
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class TuneResult:
    best_params: ParamSet | None
    best_loss: float
    trials: tuple[Trial, ...]
    n_seed_trials: int
    truncated: bool  # budget cut the planned candidate list short


def _seed_candidates(task: TuneTask) -> list[ParamSet]:
    """Cross product of suggestion pools and enumerable pools, sorted-name order.

    Empty when any tunable lacks usable suggestions: a candidate must assign
    every searched parameter, and suggestions cannot be invented.
    """
    seeded = dict(task.seed_values)
    axes: list[tuple[str, tuple[str, ...]]] = []
    for name, _ in task.tunables:
        pool = seeded.get(name, ())
        if not pool:
            return []
        axes.append((name, pool))
    for name, pool in task.enumerables:
        axes.append((name, pool))
    axes.sort(key=lambda a: a[0])
    names = [n for n, _ in axes]
    return [
        task.fixed.merged(ParamSet(zip(names, combo)))
        for combo in itertools.product(*(pool for _, pool in axes))
    ]


def _grid_candidates(task: TuneTask) -> list[ParamSet]:
    axes: list[tuple[str, tuple[str, ...]]] = []
    for name, domain in task.tunables:
        if isinstance(domain, Choice):
            axes.append((name, domain.values))
        elif isinstance(domain, IntRange):
            axes.append((name, tuple(str(v) for v in range(domain.lo, domain.hi + 1))))
        else:
            raise TuningError(
                f"grid search needs finite domains; {name!r} has {type(domain).__name__}"
            )
    axes.extend(task.enumerables)
    axes.sort(key=lambda a: a[0])
    names = [n for n, _ in axes]
    return [
        task.fixed.merged(ParamSet(zip(names, combo)))
        for combo in itertools.product(*(pool for _, pool in axes))
    ]


def _random_draw(task: TuneTask, rng: np.random.Generator) -> ParamSet:
    # one draw consumes a fixed number of variates in sorted-name order, so a
    # longer run replays a shorter one exactly before extending it
    domains = dict(task.tunables)
    pools = dict(task.enumerables)
    chosen = []
    for name in task.searched_names():
        if name in domains:
            chosen.append((name, domains[name].sample(rng)))
        else:
            pool = pools[name]
            chosen.append((name, pool[int(rng.integers(len(pool)))]))
    return task.fixed.merged(ParamSet(chosen))


def tune(
    task: TuneTask,
    evaluator: Callable[[ParamSet], float],
    strategy: str = "random",
) -> TuneResult:
    """Evaluate up to ``task.budget`` candidates and return the best by loss.

    Ties break lexicographically on the candidate's canonical key. Evaluator
    failures mark the trial instead of aborting the search; repeat candidates
    reuse the cached loss but still occupy a budget slot.
    """
    if strategy == "random":
        planned = _seed_candidates(task)
        n_seeds = min(len(planned), task.budget)
        n_draws = max(0, task.budget - len(planned))
        truncated = len(planned) > task.budget
    elif strategy == "grid":
        planned = _grid_candidates(task)
        n_seeds = min(len(planned), task.budget)
        n_draws = 0
        truncated = len(planned) > task.budget
    else:
        raise TuningError(f"unknown strategy {strategy!r}")

    rng = np.random.default_rng(task.seed)
    cache: dict[ParamSet, tuple[float, str | None]] = {}
    trials: list[Trial] = []

    def run(params: ParamSet, origin: str) -> None:
        if params in cache:
            loss, error = cache[params]
        else:
            try:
                loss, error = float(evaluator(params)), None
            except LearnerError as exc:
                loss, error = math.inf, str(exc)
            cache[params] = (loss, error)
        trials.append(Trial(params=params, loss=loss, origin=origin, error=error))

    planned_origin = "seed" if strategy == "random" else "grid"
    for params in planned[:n_seeds]:
        run(params, planned_origin)
    for _ in range(n_draws):
        run(_random_draw(task, rng), "draw")

    best_params, best_loss = None, math.inf
    for trial in trials:
        if trial.failed:
            continue
        if best_params is None or (trial.loss, trial.params.key()) < (best_loss, best_params.key()):
            best_params, best_loss = trial.params, trial.loss
    return TuneResult(
        best_params=best_params,
        best_loss=best_loss if best_params is not None else math.nan,
        trials=tuple(trials),
        n_seed_trials=sum(1 for t in trials if t.origin != "draw"),
        truncated=truncated,
    )


def merge_value_pools(
    pools: Iterable[Mapping[str, Iterable[str]]],
) -> dict[str, tuple[str, ...]]:
    """Union per-name value pools from several responders, deduped and sorted."""
    merged: dict[str, set[str]] = {}
    for pool in pools:
        for name, values in pool.items():
            merged.setdefault(name, set()).update(values)
    return {name: tuple(sorted(values)) for name, values in sorted(merged.items())}
