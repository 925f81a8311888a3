"""Budgeted search: seed candidates, random draws, grids, caching, tie-breaks."""

import math

import pytest

from mlhive.learners import LearnerError
from mlhive.params import ParamSet
from mlhive.query import Choice, IntRange, LogUniform, Uniform
from mlhive.tuning import TuneResult, TuneTask, TuningError, merge_value_pools, tune


def make_task(**overrides) -> TuneTask:
    base = dict(
        family="knn",
        fixed=ParamSet(),
        tunables=(("k", IntRange(1, 9)),),
        enumerables=(),
        seed_values=(("k", ("3", "5")),),
        budget=6,
        seed=0,
    )
    base.update(overrides)
    return TuneTask(**base)


class TestTaskValidation:
    def test_budget_floor(self):
        with pytest.raises(TuningError, match="budget"):
            make_task(budget=0)

    def test_name_may_appear_once(self):
        with pytest.raises(TuningError, match="only one of"):
            make_task(enumerables=(("k", ("1", "2")),))
        with pytest.raises(TuningError, match="only one of"):
            make_task(fixed=ParamSet([("k", "3")]))

    def test_needs_something_to_search(self):
        with pytest.raises(TuningError, match="nothing to search"):
            make_task(tunables=(), seed_values=())

    def test_enumerable_pool_must_be_nonempty(self):
        with pytest.raises(TuningError, match="empty value pool"):
            make_task(enumerables=(("metric", ()),))

    def test_seed_values_must_target_a_tunable(self):
        with pytest.raises(TuningError, match="non-tunable"):
            make_task(seed_values=(("metric", ("a",)),))

    def test_duplicate_names_rejected(self):
        with pytest.raises(TuningError, match="duplicate"):
            make_task(tunables=(("k", IntRange(1, 3)), ("k", IntRange(1, 5))))

    def test_out_of_domain_seed_values_dropped(self):
        task = make_task(seed_values=(("k", ("0", "3", "12", "5", "3")),))
        assert task.seed_values == (("k", ("3", "5")),)

    def test_all_seed_values_out_of_domain_means_no_pool(self):
        task = make_task(seed_values=(("k", ("0", "99")),))
        assert task.seed_values == ()

    def test_enumerable_pools_deduped_and_sorted(self):
        task = make_task(
            tunables=(),
            seed_values=(),
            enumerables=(("metric", ("m", "e", "m")),),
        )
        assert task.enumerables == (("metric", ("e", "m")),)

    def test_searched_names_sorted(self):
        task = make_task(enumerables=(("a_pool", ("x",)),))
        assert task.searched_names() == ("a_pool", "k")


def record_evaluator(log: list):
    def evaluate(params: ParamSet) -> float:
        log.append(params)
        return float(len(log))  # strictly increasing: first candidate wins

    return evaluate


class TestSeedsFirst:
    def test_cross_product_in_sorted_name_order(self):
        task = make_task(
            enumerables=(("metric", ("a", "b")),),
            seed_values=(("k", ("1", "3")),),
            budget=10,
        )
        log: list[ParamSet] = []
        result = tune(task, record_evaluator(log))
        seeded = [t.params.to_dict() for t in result.trials if t.origin == "seed"]
        assert seeded == [
            {"k": "1", "metric": "a"},
            {"k": "1", "metric": "b"},
            {"k": "3", "metric": "a"},
            {"k": "3", "metric": "b"},
        ]
        assert result.n_seed_trials == 4
        assert sum(1 for t in result.trials if t.origin == "draw") == 6
        assert not result.truncated

    def test_no_seeds_when_a_tunable_has_no_suggestions(self):
        task = make_task(
            tunables=(("k", IntRange(1, 9)), ("w", IntRange(1, 4))),
            seed_values=(("k", ("3",)),),  # nothing for w
            budget=5,
        )
        result = tune(task, lambda p: 1.0)
        assert result.n_seed_trials == 0
        assert all(t.origin == "draw" for t in result.trials)

    def test_seed_list_truncated_by_budget(self):
        task = make_task(seed_values=(("k", ("1", "2", "3", "4", "5")),), budget=3)
        result = tune(task, lambda p: 1.0)
        assert len(result.trials) == 3
        assert result.truncated
        assert [t.params.get("k") for t in result.trials] == ["1", "2", "3"]

    def test_fixed_parameters_ride_along(self):
        task = make_task(fixed=ParamSet([("metric", "euclidean")]), budget=4)
        result = tune(task, lambda p: 1.0)
        assert all(t.params.get("metric") == "euclidean" for t in result.trials)


class TestRandomDraws:
    def test_draws_stay_inside_domains_and_pools(self):
        task = make_task(
            tunables=(("alpha", LogUniform(0.01, 100.0)), ("k", IntRange(1, 9))),
            enumerables=(("metric", ("e", "m")),),
            seed_values=(),
            budget=40,
        )
        result = tune(task, lambda p: 1.0)
        for trial in result.trials:
            assert 0.01 <= float(trial.params.get("alpha")) <= 100.0
            assert 1 <= int(trial.params.get("k")) <= 9
            assert trial.params.get("metric") in ("e", "m")

    def test_same_seed_same_sequence(self):
        a = tune(make_task(seed_values=(), budget=12), lambda p: 1.0)
        b = tune(make_task(seed_values=(), budget=12), lambda p: 1.0)
        assert [t.params for t in a.trials] == [t.params for t in b.trials]

    def test_different_seed_different_sequence(self):
        a = tune(make_task(seed_values=(), budget=12, seed=1), lambda p: 1.0)
        b = tune(make_task(seed_values=(), budget=12, seed=2), lambda p: 1.0)
        assert [t.params for t in a.trials] != [t.params for t in b.trials]

    def test_larger_budget_extends_smaller_run(self):
        small = tune(make_task(budget=5), lambda p: 1.0)
        large = tune(make_task(budget=9), lambda p: 1.0)
        assert [t.params for t in large.trials][:5] == [t.params for t in small.trials]


class TestCachingAndBest:
    def test_repeat_candidates_reuse_loss_but_occupy_budget(self):
        task = make_task(
            tunables=(("k", Choice(("3",))),),
            seed_values=(("k", ("3",)),),
            budget=4,
        )
        calls: list[ParamSet] = []
        result = tune(task, record_evaluator(calls))
        assert len(result.trials) == 4
        assert len(calls) == 1
        assert {t.loss for t in result.trials} == {1.0}

    def test_best_is_minimum_loss(self):
        task = make_task(seed_values=(("k", ("1", "2", "3")),), budget=3)
        result = tune(task, lambda p: abs(int(p.get("k")) - 2.0))
        assert result.best_params.get("k") == "2"
        assert result.best_loss == 0.0

    def test_loss_tie_breaks_on_canonical_key(self):
        task = make_task(
            tunables=(("x", Choice(("b", "a"))),),
            seed_values=(("x", ("b", "a")),),
            budget=2,
        )
        result = tune(task, lambda p: 7.0)
        assert result.best_params.get("x") == "a"

    def test_failed_trials_are_recorded_and_excluded(self):
        def evaluate(params: ParamSet) -> float:
            if params.get("k") == "3":
                raise LearnerError("synthetic failure")
            return 0.5

        result = tune(make_task(seed_values=(("k", ("3", "5")),), budget=2), evaluate)
        by_k = {t.params.get("k"): t for t in result.trials}
        assert by_k["3"].failed and by_k["3"].loss == math.inf
        assert "synthetic failure" in by_k["3"].error
        assert not by_k["5"].failed
        assert result.best_params.get("k") == "5"

    def test_all_failures_leave_no_best(self):
        def evaluate(params: ParamSet) -> float:
            raise LearnerError("nope")

        result = tune(make_task(budget=3), evaluate)
        assert result.best_params is None
        assert math.isnan(result.best_loss)
        assert len(result.trials) == 3

    def test_unexpected_errors_propagate(self):
        def evaluate(params: ParamSet) -> float:
            raise RuntimeError("bug")

        with pytest.raises(RuntimeError):
            tune(make_task(budget=2), evaluate)


class TestGridStrategy:
    def test_exhaustive_product(self):
        task = make_task(
            tunables=(("k", IntRange(1, 3)), ("m", Choice(("a", "b")))),
            seed_values=(),
            budget=10,
        )
        result = tune(task, lambda p: 1.0, strategy="grid")
        assert len(result.trials) == 6
        assert result.n_seed_trials == 6
        assert not result.truncated
        assert all(t.origin == "grid" for t in result.trials)
        combos = {(t.params.get("k"), t.params.get("m")) for t in result.trials}
        assert combos == {(str(k), m) for k in (1, 2, 3) for m in ("a", "b")}

    def test_grid_truncated_by_budget(self):
        task = make_task(tunables=(("k", IntRange(1, 9)),), seed_values=(), budget=4)
        result = tune(task, lambda p: 1.0, strategy="grid")
        assert len(result.trials) == 4
        assert result.truncated

    def test_grid_rejects_continuous_domains(self):
        task = make_task(tunables=(("a", Uniform(0.0, 1.0)),), seed_values=())
        with pytest.raises(TuningError, match="finite domains"):
            tune(task, lambda p: 1.0, strategy="grid")

    def test_unknown_strategy(self):
        with pytest.raises(TuningError, match="unknown strategy"):
            tune(make_task(), lambda p: 1.0, strategy="anneal")


class TestMergeValuePools:
    def test_union_dedup_sort(self):
        merged = merge_value_pools(
            [
                {"k": ("3", "1"), "metric": ("m",)},
                {"k": ("3", "5")},
                {"metric": ("e",), "w": ()},
            ]
        )
        assert merged == {"k": ("1", "3", "5"), "metric": ("e", "m"), "w": ()}

    def test_empty_input(self):
        assert merge_value_pools([]) == {}

    def test_result_type(self):
        result = tune(make_task(budget=1), lambda p: 2.0)
        assert isinstance(result, TuneResult)
