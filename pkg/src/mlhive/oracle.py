"""Centralized re-execution of a query, bypassing all message passing.

Walks the hierarchy directly: finds matching terminals by scan, derives the
manager as the deepest common node of their root paths, rebuilds the same tune
tasks from the same pools and seeds, and validates the same configurations.
Used to check that the message protocol neither changes results nor depends on
delivery order. Reports carry the same schema with engine="centralized".
"""

from __future__ import annotations

from .hierarchy import AgentKind, Hierarchy, ROOT_ID
from .learners import (
    FAMILY_TASKS,
    MEASURE_TASKS,
    LearnerError,
    LearnerSpec,
    LossSpec,
    cross_val_loss,
)
from .params import ANY, DEFAULT_CONSTANTS, TUNE, ParamSet, SimilarityConstants, set_similarity
from .query import Query, SubQuery
from .seeds import stable_hash
from .tuning import TuneTask, TuningError, merge_value_pools, tune

__all__ = ["lca_by_paths", "run_query_centralized"]


def lca_by_paths(hierarchy: Hierarchy, agent_ids: list[str]) -> str:
    """Deepest node shared by every root path; written as a path intersection."""
    if not agent_ids:
        raise ValueError("no agents given")
    paths = []
    for aid in agent_ids:
        path = []
        cur: str | None = aid
        while cur is not None:
            path.append(cur)
            cur = hierarchy.node(cur).parent
        paths.append(list(reversed(path)))
    deepest = paths[0][0]
    for depth in range(min(len(p) for p in paths)):
        step = {p[depth] for p in paths}
        if len(step) == 1:
            deepest = step.pop()
        else:
            break
    return deepest


def _params_key(params: dict | None) -> str:
    if not params:
        return ""
    return ",".join(f"{k}={v}" for k, v in sorted(params.items()))


class _Centralized:
    def __init__(
        self,
        hierarchy: Hierarchy,
        query: Query,
        *,
        global_seed: int,
        constants: SimilarityConstants,
        budget: int,
        folds_default: int,
    ):
        self.h = hierarchy
        self.q = query
        self.global_seed = global_seed
        self.constants = constants
        self.budget = budget
        self.folds = query.output.folds or folds_default
        self.data_terminal = hierarchy.locate_data(query.data)
        self.dataset = hierarchy.node(self.data_terminal).dataset
        self._cv_seed = stable_hash("cv", global_seed)

    def _incompatibility(self, family: str) -> str | None:
        task = self.dataset.task
        if FAMILY_TASKS.get(family) is not None and FAMILY_TASKS[family] != task:
            return "family does not handle this dataset's task"
        if MEASURE_TASKS[self.q.output.measure] != task:
            return "measure does not apply to this dataset's task"
        return None

    def _evaluate(self, family: str, params: ParamSet) -> float:
        return cross_val_loss(
            LearnerSpec(family, params),
            self.dataset,
            k=self.folds,
            seed=self._cv_seed,
            loss=LossSpec(self.q.output.measure, self.q.output.direction),
        )

    def _family_pools(self, manager_id: str) -> dict[str, dict[str, tuple[str, ...]]]:
        per_terminal: dict[str, list[dict]] = {}
        for tid in self.h.subtree_terminals(manager_id):
            node = self.h.node(tid)
            per_terminal.setdefault(node.name, []).append(
                {name: [value] for name, value in node.config}
            )
        return {fam: merge_value_pools(entries) for fam, entries in per_terminal.items()}

    def _tune_rows(self, sq: SubQuery, manager_id: str, matched: list[str]) -> tuple[list, bool]:
        pools = self._family_pools(manager_id)
        matched_families = sorted({self.h.node(t).name for t in matched})
        rows: list[dict] = []
        truncated = False
        domains = sq.domain_map()
        for family in matched_families:
            reason = self._incompatibility(family)
            if reason is not None:
                rows.append(
                    {
                        "family": family,
                        "params": None,
                        "loss": None,
                        "origin": "manager",
                        "status": "skipped_incompatible",
                        "error": reason,
                    }
                )
                continue
            pool = pools.get(family, {})
            fixed, tunables, enumerables = [], [], []
            for name, value in sq.params:
                if value == TUNE:
                    tunables.append((name, domains[name]))
                elif value == ANY:
                    if name in domains:
                        tunables.append((name, domains[name]))
                    else:
                        enumerables.append((name, tuple(pool.get(name, ()))))
                else:
                    fixed.append((name, value))
            try:
                task = TuneTask(
                    family=family,
                    fixed=ParamSet(fixed),
                    tunables=tuple(tunables),
                    enumerables=tuple(enumerables),
                    seed_values=tuple(
                        (name, tuple(pool.get(name, ()))) for name, _ in tunables
                    ),
                    budget=self.budget,
                    seed=stable_hash("tune", self.global_seed, sq.key(), family),
                )
            except TuningError as exc:
                rows.append(
                    {
                        "family": family,
                        "params": None,
                        "loss": None,
                        "origin": "manager",
                        "status": "failed",
                        "error": str(exc),
                    }
                )
                continue
            result = tune(task, lambda ps, fam=family: self._evaluate(fam, ps))
            truncated = truncated or result.truncated
            for trial in result.trials:
                rows.append(
                    {
                        "family": family,
                        "params": trial.params.to_dict(),
                        "loss": None if trial.failed else trial.loss,
                        "origin": trial.origin,
                        "status": "failed" if trial.failed else "ok",
                        "error": trial.error,
                    }
                )
        return rows, truncated

    def _select_rows(self, matched: list[str]) -> list[dict]:
        rows = []
        for tid in matched:
            node = self.h.node(tid)
            family = node.name
            reason = self._incompatibility(family)
            if reason is not None:
                rows.append(
                    {
                        "family": family,
                        "params": node.config.to_dict(),
                        "loss": None,
                        "origin": "validate",
                        "status": "skipped_incompatible",
                        "error": reason,
                    }
                )
                continue
            try:
                loss = self._evaluate(family, node.config)
                rows.append(
                    {
                        "family": family,
                        "params": node.config.to_dict(),
                        "loss": loss,
                        "origin": "validate",
                        "status": "ok",
                        "error": None,
                    }
                )
            except LearnerError as exc:
                rows.append(
                    {
                        "family": family,
                        "params": node.config.to_dict(),
                        "loss": None,
                        "origin": "validate",
                        "status": "failed",
                        "error": str(exc),
                    }
                )
        return sorted(rows, key=lambda row: (row["family"], _params_key(row["params"])))

    def run(self) -> dict:
        sub_reports = []
        winner = None
        any_matched = False
        for i, sq in enumerate(self.q.algorithms):
            matched = self.h.matching_terminals(sq)
            rows: list[dict] = []
            truncated = False
            manager = None
            if not matched:
                status = "unmatched"
                score = -1.0
            else:
                any_matched = True
                status = "matched"
                first = self.h.node(matched[0])
                score = (
                    self.constants.alpha
                    if sq.all_params
                    else set_similarity(sq.params, first.config, self.constants)
                )
                if self.q.output.task == "tune" and not sq.z:
                    status = "skipped_training"
                    manager = None
                elif sq.z:
                    manager = lca_by_paths(self.h, matched)
                    rows, truncated = self._tune_rows(sq, manager, matched)
                else:
                    manager = lca_by_paths(self.h, matched)
                    rows = self._select_rows(matched)
            best_row = None
            for row in rows:
                if row["status"] != "ok":
                    continue
                key = (row["loss"], row["family"], _params_key(row["params"]))
                if best_row is None or key < (
                    best_row["loss"],
                    best_row["family"],
                    _params_key(best_row["params"]),
                ):
                    best_row = row
            sub_reports.append(
                {
                    "key": sq.key(),
                    "name": sq.algo_name,
                    "status": status,
                    "score": score if status != "unmatched" else -1.0,
                    "manager": manager if status != "unmatched" else None,
                    "matched_terminals": matched,
                    "rows": rows,
                    "best": None
                    if best_row is None
                    else {
                        "family": best_row["family"],
                        "params": best_row["params"],
                        "loss": best_row["loss"],
                    },
                    "truncated": truncated,
                }
            )
            if best_row is not None:
                cand = (best_row["loss"], best_row["family"], _params_key(best_row["params"]))
                if winner is None or cand < winner[0]:
                    winner = (cand, i, best_row)
        if winner is not None:
            outcome = "ok"
        elif not any_matched:
            outcome = "unmatched"
        else:
            outcome = "empty_selection"
        return {
            "schema_version": 1,
            "engine": "centralized",
            "outcome": outcome,
            "seed": self.global_seed,
            "constants": {
                "beta": self.constants.beta,
                "alpha": self.constants.alpha,
                "tau": self.constants.tau,
            },
            "budget": self.budget,
            "folds": self.folds,
            "dataset": {
                "name": self.dataset.name,
                "task": self.dataset.task,
                "n": self.dataset.n,
                "d": self.dataset.d,
            },
            "data_terminal": self.data_terminal,
            "query": self.q.to_json(),
            "sub_queries": sub_reports,
            "winner": None
            if winner is None
            else {
                "sub_query": self.q.algorithms[winner[1]].key(),
                "family": winner[2]["family"],
                "params": winner[2]["params"],
                "loss": winner[2]["loss"],
            },
            "message_stats": {"total": 0, "by_kind": {}, "by_phase": {}},
            "structure_dot": self.h.to_dot(),
        }


def run_query_centralized(
    hierarchy: Hierarchy,
    query: Query,
    *,
    global_seed: int = 0,
    constants: SimilarityConstants = DEFAULT_CONSTANTS,
    budget: int = 64,
    folds_default: int = 5,
) -> dict:
    return _Centralized(
        hierarchy,
        query,
        global_seed=global_seed,
        constants=constants,
        budget=budget,
        folds_default=folds_default,
    ).run()
