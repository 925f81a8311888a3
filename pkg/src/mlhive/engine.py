"""Message-driven query execution over the agent hierarchy.

A query runs in passes. A locate pass finds the one dataset agent satisfying
the data clause. A match pass floods a call-for-proposals down the algorithm
subtree; every agent receiving one answers with exactly one proposal, and
non-terminals aggregate child proposals into a score, a best-child set, and a
tie flag. A work pass then routes each sub-query to the agent that won the
match pass: tuning sub-queries descend to a manager that gathers value
suggestions one hop deep, spawns one short-lived tuner per matched family, and
reports results back up; selection sub-queries fan out along recorded best
children and every reached terminal validates its own configuration.

All messages flow through a single FIFO scheduler, so a run is a deterministic
function of the hierarchy, the query, and the seed.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable

from .hierarchy import AgentKind, Hierarchy
from .learners import (
    FAMILY_TASKS,
    MEASURE_TASKS,
    LearnerError,
    LearnerSpec,
    LossSpec,
    cross_val_loss,
)
from .params import DEFAULT_CONSTANTS, ANY, TUNE, SimilarityConstants, set_similarity
from .query import Query, SubQuery
from .seeds import stable_hash
from .tuning import TuneTask, TuningError, merge_value_pools, tune

__all__ = [
    "MessageKind",
    "Message",
    "Scheduler",
    "aggregate_proposals",
    "Engine",
    "run_query",
    "bench_messages",
]

NO_BID = -1.0


class MessageKind:
    CFP = "cfp"
    PROPOSE = "propose"
    INFORM = "inform"
    ASK_SUGGEST = "ask_suggest"
    ASK_TUNE = "ask_tune"
    ASK_SELECT = "ask_select"
    ASK_VALIDATE = "ask_validate"


@dataclass(frozen=True)
class Message:
    seq: int
    phase: str  # "locate" | "first" | "second"
    kind: str
    sender: str
    recipient: str
    payload: dict


class Scheduler:
    """Single FIFO queue: strict arrival-order processing, full send accounting."""

    def __init__(self, keep_trace: bool = False):
        self.queue: deque[Message] = deque()
        self.seq = 0
        self.counts: Counter[tuple[str, str]] = Counter()
        self.trace: list[dict] | None = [] if keep_trace else None

    def send(self, *, phase: str, kind: str, sender: str, recipient: str, payload: dict) -> None:
        msg = Message(self.seq, phase, kind, sender, recipient, payload)
        self.seq += 1
        self.counts[(phase, kind)] += 1
        if self.trace is not None:
            self.trace.append(
                {
                    "seq": msg.seq,
                    "phase": phase,
                    "kind": kind,
                    "from": sender,
                    "to": recipient,
                    "sub_query": payload.get("sq"),
                    "note": payload.get("type", ""),
                }
            )
        self.queue.append(msg)

    def pump(self, dispatch) -> None:
        while self.queue:
            dispatch(self.queue.popleft())

    def total(self) -> int:
        return sum(self.counts.values())

    def stats(self) -> dict:
        by_kind: Counter[str] = Counter()
        by_phase: Counter[str] = Counter()
        for (phase, kind), n in self.counts.items():
            by_kind[kind] += n
            by_phase[phase] += n
        return {
            "total": self.total(),
            "by_kind": dict(sorted(by_kind.items())),
            "by_phase": dict(sorted(by_phase.items())),
        }


def aggregate_proposals(
    self_id: str,
    proposals: Iterable[tuple[str, float]],
    tuning: bool,
    generic: bool,
) -> tuple[float, tuple[str, ...], bool]:
    """Fold child proposals into (score, best set, tie flag).

    The outcome is order-independent: a strict improvement claims the best set
    and clears the tie flag; an equal bid at the current maximum either turns
    the aggregator itself into the best (tuning, so one manager owns the tie)
    or widens the best set (selection keeps every co-winner). No-bids are
    skipped. A generic non-tuning aggregate whose maximum is exactly zero
    carries no usable signal and collapses to a no-bid.
    """
    score = NO_BID
    best: tuple[str, ...] = ()
    tie = False
    for child, r in proposals:
        if r == NO_BID:
            continue
        if r > score:
            score = r
            best = (child,)
            tie = False
        elif r == score:
            if tuning or (score == 0.0 and not generic):
                best = (self_id,)
                tie = True
            elif score > 0.0:
                if child not in best:
                    best = tuple(list(best) + [child])
            # equal zero-score bids under a generic query: nothing to keep
    if generic and not tuning and score == 0.0:
        return NO_BID, (), False
    return score, best, tie


@dataclass
class SubQueryState:
    """Per-agent match-pass results for one sub-query."""

    r: dict[str, float] = field(default_factory=dict)
    b: dict[str, tuple[str, ...]] = field(default_factory=dict)
    f: dict[str, bool] = field(default_factory=dict)
    status: str = "pending"  # matched | unmatched | skipped_training
    manager: str | None = None
    rows: list[dict] = field(default_factory=list)
    truncated: bool = False

    def matched_terminals_seen(self, hierarchy: Hierarchy) -> list[str]:
        return sorted(
            aid
            for aid, score in self.r.items()
            if score > 0.0 and hierarchy.node(aid).kind == AgentKind.TERMINAL
        )


class Engine:
    """One query execution. Build, call run(), then read .report."""

    def __init__(
        self,
        hierarchy: Hierarchy,
        query: Query,
        *,
        global_seed: int = 0,
        constants: SimilarityConstants = DEFAULT_CONSTANTS,
        budget: int = 64,
        folds_default: int = 5,
        keep_trace: bool = False,
    ):
        self.h = hierarchy
        self.q = query
        self.global_seed = global_seed
        self.constants = constants
        self.budget = budget
        self.folds = query.output.folds or folds_default
        self.sched = Scheduler(keep_trace=keep_trace)
        self.states = [SubQueryState() for _ in query.algorithms]
        self.data_terminal: str | None = None
        self.report: dict | None = None
        self._data_pending: dict | None = None
        self._pending: dict[tuple[int, str], dict] = {}
        self._pending_suggest: dict[tuple[int, str], dict] = {}
        self._pending_tuners: dict[tuple[int, str], dict] = {}
        self._pending_select: dict[tuple[int, str], dict] = {}
        self._tuner_tasks: dict[str, tuple[TuneTask, str]] = {}
        self._cv_seed = stable_hash("cv", global_seed)

    # -- plumbing ---------------------------------------------------------

    def _send(self, phase, kind, sender, recipient, payload=None) -> None:
        self.sched.send(
            phase=phase, kind=kind, sender=sender, recipient=recipient, payload=payload or {}
        )

    def _dataset(self):
        return self.h.node(self.data_terminal).dataset

    def _loss_spec(self) -> LossSpec:
        return LossSpec(self.q.output.measure, self.q.output.direction)

    def _incompatibility(self, family: str) -> str | None:
        task = self._dataset().task
        if FAMILY_TASKS.get(family) is not None and FAMILY_TASKS[family] != task:
            return "family does not handle this dataset's task"
        if MEASURE_TASKS[self.q.output.measure] != task:
            return "measure does not apply to this dataset's task"
        return None

    def _evaluate(self, family: str, params) -> float:
        return cross_val_loss(
            LearnerSpec(family, params),
            self._dataset(),
            k=self.folds,
            seed=self._cv_seed,
            loss=self._loss_spec(),
        )

    # -- run --------------------------------------------------------------

    def run(self) -> dict:
        self._run_locate()
        for i in range(len(self.q.algorithms)):
            self._run_first(i)
        for i in range(len(self.q.algorithms)):
            self._run_second(i)
        self.report = self._finalize()
        return self.report

    def _run_locate(self) -> None:
        from .hierarchy import ALG_ROOT_ID, DATA_ROOT_ID, ROOT_ID  # noqa: F401

        self._send("locate", MessageKind.CFP, ROOT_ID, DATA_ROOT_ID, {"type": "locate"})
        self.sched.pump(self._dispatch)
        matches = self._data_pending["matches"] if self._data_pending else []
        if not matches:
            from .hierarchy import NoDataError

            raise NoDataError(
                f"no dataset matches {self.q.data.name!r} {self.q.data.params.key()!r}"
            )
        if len(matches) > 1:
            from .hierarchy import AmbiguousDataError

            raise AmbiguousDataError(f"data spec is ambiguous: {sorted(matches)}")
        self.data_terminal = matches[0]

    def _run_first(self, i: int) -> None:
        from .hierarchy import ALG_ROOT_ID, ROOT_ID

        self._pending[(i, ROOT_ID)] = {"expect": 1, "got": [], "parent": None}
        self._send("first", MessageKind.CFP, ROOT_ID, ALG_ROOT_ID, {"sq": i})
        self.sched.pump(self._dispatch)
        state = self.states[i]
        root_r = state.r.get(ROOT_ID, NO_BID)
        if root_r <= 0.0:
            # a non-positive aggregate means no terminal actually matched
            state.r[ROOT_ID] = NO_BID
            state.b[ROOT_ID] = ()
            state.status = "unmatched"
        else:
            state.status = "matched"

    def _run_second(self, i: int) -> None:
        from .hierarchy import ROOT_ID

        sq = self.q.algorithms[i]
        state = self.states[i]
        if state.status != "matched":
            return
        if self.q.output.task == "tune" and not sq.z:
            # nothing marked tunable in this sub-query, so there is nothing to train
            state.status = "skipped_training"
            return
        kind = MessageKind.ASK_TUNE if sq.z else MessageKind.ASK_SELECT
        target = state.b[ROOT_ID][0]
        if kind == MessageKind.ASK_SELECT:
            self._pending_select[(i, ROOT_ID)] = {"expect": 1, "rows": [], "parent": None}
        self._send("second", kind, ROOT_ID, target, {"sq": i})
        self.sched.pump(self._dispatch)

    # -- dispatch -----------------------------------------------------------

    def _dispatch(self, msg: Message) -> None:
        if msg.phase == "locate":
            self._on_locate(msg)
        elif msg.kind == MessageKind.CFP:
            self._on_cfp(msg)
        elif msg.kind == MessageKind.PROPOSE:
            self._on_propose(msg)
        elif msg.kind == MessageKind.ASK_TUNE:
            self._on_ask_tune(msg)
        elif msg.kind == MessageKind.ASK_SUGGEST:
            self._on_ask_suggest(msg)
        elif msg.kind == MessageKind.ASK_SELECT:
            self._on_ask_select(msg)
        elif msg.kind == MessageKind.ASK_VALIDATE:
            self._on_ask_validate(msg)
        elif msg.kind == MessageKind.INFORM:
            self._on_inform(msg)
        else:
            raise RuntimeError(f"unroutable message {msg}")

    # -- locate pass ---------------------------------------------------------

    def _on_locate(self, msg: Message) -> None:
        from .hierarchy import DATA_ROOT_ID, ROOT_ID

        node = self.h.node(msg.recipient)
        if msg.kind == MessageKind.CFP and node.kind == AgentKind.DATA_ROOT:
            children = node.children
            self._data_pending = {"expect": len(children), "matches": [], "done": False}
            if not children:
                self._send(
                    "locate",
                    MessageKind.INFORM,
                    DATA_ROOT_ID,
                    ROOT_ID,
                    {"type": "locate", "matches": []},
                )
                return
            for child in children:
                self._send("locate", MessageKind.CFP, DATA_ROOT_ID, child, {"type": "locate"})
        elif msg.kind == MessageKind.CFP and node.kind == AgentKind.DATA_TERMINAL:
            spec = self.q.data
            from .params import name_covers

            ok = name_covers(node.name, spec.name) and node.capability.covers(spec.params)
            self._send(
                "locate",
                MessageKind.PROPOSE,
                node.id,
                msg.sender,
                {"type": "locate", "r": 1.0 if ok else NO_BID},
            )
        elif msg.kind == MessageKind.PROPOSE:
            pending = self._data_pending
            if msg.payload["r"] > 0.0:
                pending["matches"].append(msg.sender)
            pending["expect"] -= 1
            if pending["expect"] == 0:
                self._send(
                    "locate",
                    MessageKind.INFORM,
                    DATA_ROOT_ID,
                    ROOT_ID,
                    {"type": "locate", "matches": sorted(pending["matches"])},
                )
        elif msg.kind == MessageKind.INFORM:
            self._data_pending["matches"] = msg.payload["matches"]
            self._data_pending["done"] = True
        else:
            raise RuntimeError(f"unexpected locate message {msg}")

    # -- match pass ------------------------------------------------------------

    def _participates(self, node, sq: SubQuery) -> bool:
        from .params import name_covers

        if node.level == 1:
            return True
        if not name_covers(node.name, sq.algo_name):
            return False
        if sq.all_params:
            return True
        return node.capability.covers(sq.params)

    def _on_cfp(self, msg: Message) -> None:
        i = msg.payload["sq"]
        sq = self.q.algorithms[i]
        node = self.h.node(msg.recipient)
        state = self.states[i]
        if node.kind == AgentKind.TERMINAL:
            matched = self.h.terminal_matches(node.id, sq)
            if not matched:
                r = NO_BID
            elif sq.all_params:
                # a bare-wildcard clause carries no pairs to score, so every
                # name-covered configuration bids the single-wildcard weight
                r = self.constants.alpha
            else:
                r = set_similarity(sq.params, node.config, self.constants)
            state.r[node.id] = r
            state.b[node.id] = (node.id,) if matched else ()
            state.f[node.id] = False
            self._send(
                "first",
                MessageKind.PROPOSE,
                node.id,
                msg.sender,
                {"sq": i, "r": r},
            )
            return
        if not self._participates(node, sq):
            state.r[node.id] = NO_BID
            state.b[node.id] = ()
            state.f[node.id] = False
            self._send("first", MessageKind.PROPOSE, node.id, msg.sender, {"sq": i, "r": NO_BID})
            return
        self._pending[(i, node.id)] = {
            "expect": len(node.children),
            "got": [],
            "parent": msg.sender,
        }
        if not node.children:
            self._complete_aggregation(i, node.id)
            return
        for child in node.children:
            self._send("first", MessageKind.CFP, node.id, child, {"sq": i})

    def _on_propose(self, msg: Message) -> None:
        i = msg.payload["sq"]
        pending = self._pending[(i, msg.recipient)]
        pending["got"].append((msg.sender, msg.payload["r"]))
        if len(pending["got"]) == pending["expect"]:
            self._complete_aggregation(i, msg.recipient)

    def _complete_aggregation(self, i: int, agent_id: str) -> None:
        sq = self.q.algorithms[i]
        state = self.states[i]
        pending = self._pending.pop((i, agent_id))
        score, best, tie = aggregate_proposals(
            agent_id, pending["got"], tuning=sq.z, generic=sq.l
        )
        state.r[agent_id] = score
        state.b[agent_id] = best
        state.f[agent_id] = tie
        if pending["parent"] is not None:
            self._send(
                "first",
                MessageKind.PROPOSE,
                agent_id,
                pending["parent"],
                {"sq": i, "r": score},
            )

    # -- work pass: tuning -------------------------------------------------------

    def _on_ask_tune(self, msg: Message) -> None:
        i = msg.payload["sq"]
        node = self.h.node(msg.recipient)
        if node.kind == AgentKind.TUNER:
            self._run_tuner(i, node.id, msg.sender)
            return
        state = self.states[i]
        best = state.b[node.id]
        if node.kind == AgentKind.TERMINAL or best == (node.id,) or len(best) != 1:
            self._start_manager(i, node.id)
        else:
            self._send("second", MessageKind.ASK_TUNE, node.id, best[0], {"sq": i})

    def _start_manager(self, i: int, manager_id: str) -> None:
        state = self.states[i]
        state.manager = manager_id
        node = self.h.node(manager_id)
        if node.kind == AgentKind.TERMINAL:
            pools = {node.name: {name: (value,) for name, value in node.config}}
            self._spawn_tuners(i, manager_id, pools, [node.name])
            return
        children = node.children
        self._pending_suggest[(i, manager_id)] = {"expect": len(children), "answers": []}
        for child in children:
            self._send("second", MessageKind.ASK_SUGGEST, manager_id, child, {"sq": i})

    def _survey_subtree(self, agent_id: str, sq: SubQuery) -> dict:
        """What one child can answer about its whole subtree in a single reply."""
        pools: dict[str, dict[str, set[str]]] = {}
        matched: set[str] = set()
        for nid in self.h.subtree_ids(agent_id):
            node = self.h.node(nid)
            if node.kind != AgentKind.TERMINAL:
                continue
            fam_pool = pools.setdefault(node.name, {})
            for name, value in node.config:
                fam_pool.setdefault(name, set()).add(value)
            if self.h.terminal_matches(nid, sq):
                matched.add(node.name)
        return {
            "pools": {
                fam: {name: sorted(vals) for name, vals in sorted(entries.items())}
                for fam, entries in sorted(pools.items())
            },
            "matched": sorted(matched),
        }

    def _on_ask_suggest(self, msg: Message) -> None:
        i = msg.payload["sq"]
        answer = self._survey_subtree(msg.recipient, self.q.algorithms[i])
        self._send(
            "second",
            MessageKind.INFORM,
            msg.recipient,
            msg.sender,
            {"sq": i, "type": "suggest_answer", "answer": answer},
        )

    def _build_tune_task(self, sq: SubQuery, family: str, pool: dict) -> TuneTask:
        domains = dict(sq.domains)
        fixed = []
        tunables = []
        enumerables = []
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
        seed_values = tuple((name, tuple(pool.get(name, ()))) for name, _ in tunables)
        from .params import ParamSet

        return TuneTask(
            family=family,
            fixed=ParamSet(fixed),
            tunables=tuple(tunables),
            enumerables=tuple(enumerables),
            seed_values=seed_values,
            budget=self.budget,
            seed=stable_hash("tune", self.global_seed, sq.key(), family),
        )

    def _spawn_tuners(self, i: int, manager_id: str, pools: dict, matched_families: list) -> None:
        sq = self.q.algorithms[i]
        node = self.h.node(manager_id)
        rows: list[dict] = []
        tuners: list[str] = []
        for family in sorted(matched_families):
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
            try:
                task = self._build_tune_task(sq, family, pools.get(family, {}))
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
            host = node.parent if node.kind == AgentKind.TERMINAL else manager_id
            tuner_id = self.h.add_tuner(host, label=f"q{i}:{family}")
            self._tuner_tasks[tuner_id] = (task, family)
            tuners.append(tuner_id)
        self._pending_tuners[(i, manager_id)] = {
            "expect": len(tuners),
            "rows": rows,
            "tuners": tuners,
        }
        if not tuners:
            self._finish_manager(i, manager_id)
            return
        for tuner_id in tuners:
            self._send("second", MessageKind.ASK_TUNE, manager_id, tuner_id, {"sq": i})

    def _run_tuner(self, i: int, tuner_id: str, manager_id: str) -> None:
        task, family = self._tuner_tasks.pop(tuner_id)
        result = tune(task, lambda ps: self._evaluate(family, ps))
        rows = [
            {
                "family": family,
                "params": trial.params.to_dict(),
                "loss": None if trial.failed else trial.loss,
                "origin": trial.origin,
                "status": "failed" if trial.failed else "ok",
                "error": trial.error,
            }
            for trial in result.trials
        ]
        self._send(
            "second",
            MessageKind.INFORM,
            tuner_id,
            manager_id,
            {"sq": i, "type": "tuner_result", "rows": rows, "truncated": result.truncated},
        )

    def _finish_manager(self, i: int, manager_id: str) -> None:
        from .hierarchy import ROOT_ID

        pending = self._pending_tuners.pop((i, manager_id))
        for tuner_id in pending["tuners"]:
            self.h.remove_node(tuner_id)
        state = self.states[i]
        state.rows = pending["rows"]
        if manager_id == ROOT_ID:
            return
        self._send(
            "second",
            MessageKind.INFORM,
            manager_id,
            self.h.node(manager_id).parent,
            {"sq": i, "type": "subquery_done"},
        )

    # -- work pass: selection ---------------------------------------------------

    def _on_ask_select(self, msg: Message) -> None:
        i = msg.payload["sq"]
        node = self.h.node(msg.recipient)
        state = self.states[i]
        if node.kind == AgentKind.TERMINAL:
            self._send("second", MessageKind.ASK_VALIDATE, node.id, node.id, {"sq": i})
            return
        best = state.b[node.id]
        if not best or best == (node.id,):
            # nothing actionable below this agent; answer so the asker can finish
            self._send(
                "second",
                MessageKind.INFORM,
                node.id,
                msg.sender,
                {"sq": i, "type": "select_rows", "rows": []},
            )
            return
        self._pending_select[(i, node.id)] = {
            "expect": len(best),
            "rows": [],
            "parent": msg.sender,
        }
        for child in best:
            self._send("second", MessageKind.ASK_SELECT, node.id, child, {"sq": i})

    def _on_ask_validate(self, msg: Message) -> None:
        i = msg.payload["sq"]
        node = self.h.node(msg.recipient)
        row = self._validate_terminal(node)
        self._send(
            "second",
            MessageKind.INFORM,
            node.id,
            node.parent,
            {"sq": i, "type": "select_rows", "rows": [row]},
        )

    def _validate_terminal(self, node) -> dict:
        family = node.name
        reason = self._incompatibility(family)
        if reason is not None:
            return {
                "family": family,
                "params": node.config.to_dict(),
                "loss": None,
                "origin": "validate",
                "status": "skipped_incompatible",
                "error": reason,
            }
        try:
            loss = self._evaluate(family, node.config)
            return {
                "family": family,
                "params": node.config.to_dict(),
                "loss": loss,
                "origin": "validate",
                "status": "ok",
                "error": None,
            }
        except LearnerError as exc:
            return {
                "family": family,
                "params": node.config.to_dict(),
                "loss": None,
                "origin": "validate",
                "status": "failed",
                "error": str(exc),
            }

    # -- inform routing -----------------------------------------------------------

    def _on_inform(self, msg: Message) -> None:
        from .hierarchy import ROOT_ID

        i = msg.payload["sq"]
        kind = msg.payload["type"]
        node = self.h.node(msg.recipient)
        if kind == "suggest_answer":
            pending = self._pending_suggest[(i, node.id)]
            pending["answers"].append(msg.payload["answer"])
            if len(pending["answers"]) == pending["expect"]:
                self._pending_suggest.pop((i, node.id))
                self._integrate_and_spawn(i, node.id, pending["answers"])
        elif kind == "tuner_result":
            pending = self._pending_tuners[(i, node.id)]
            pending["rows"].extend(msg.payload["rows"])
            if msg.payload["truncated"]:
                self.states[i].truncated = True
            pending["expect"] -= 1
            if pending["expect"] == 0:
                self._finish_manager(i, node.id)
        elif kind == "subquery_done":
            if node.id != ROOT_ID:
                self._send("second", MessageKind.INFORM, node.id, node.parent, msg.payload)
        elif kind == "select_rows":
            pending = self._pending_select[(i, node.id)]
            pending["rows"].extend(msg.payload["rows"])
            pending["expect"] -= 1
            if pending["expect"] == 0:
                self._pending_select.pop((i, node.id))
                if node.id == ROOT_ID:
                    self.states[i].rows = sorted(
                        pending["rows"],
                        key=lambda row: (row["family"], _params_key(row["params"])),
                    )
                else:
                    self._send(
                        "second",
                        MessageKind.INFORM,
                        node.id,
                        pending["parent"],
                        {"sq": i, "type": "select_rows", "rows": pending["rows"]},
                    )
        else:
            raise RuntimeError(f"unroutable inform {msg}")

    def _integrate_and_spawn(self, i: int, manager_id: str, answers: list[dict]) -> None:
        families: dict[str, list[dict]] = {}
        matched: set[str] = set()
        for answer in answers:
            for family, pool in answer["pools"].items():
                families.setdefault(family, []).append(pool)
            matched.update(answer["matched"])
        pools = {family: merge_value_pools(entries) for family, entries in families.items()}
        self._spawn_tuners(i, manager_id, pools, sorted(matched))

    # -- reporting -----------------------------------------------------------------

    def descend_manager(self, i: int) -> str | None:
        """Follow singleton best links from the root; the stop is the manager."""
        from .hierarchy import ROOT_ID

        state = self.states[i]
        if state.b.get(ROOT_ID, ()) == ():
            return None
        current = ROOT_ID
        while True:
            best = state.b[current]
            if best == (current,) or len(best) != 1:
                return current
            nxt = best[0]
            if self.h.node(nxt).kind == AgentKind.TERMINAL:
                return nxt
            current = nxt

    def _finalize(self) -> dict:
        from .hierarchy import ROOT_ID

        ds = self._dataset()
        sub_reports = []
        winner = None
        any_matched = False
        for i, sq in enumerate(self.q.algorithms):
            state = self.states[i]
            best_row = None
            for row in state.rows:
                if row["status"] != "ok":
                    continue
                key = (row["loss"], row["family"], _params_key(row["params"]))
                if best_row is None or key < (
                    best_row["loss"],
                    best_row["family"],
                    _params_key(best_row["params"]),
                ):
                    best_row = row
            if state.status == "matched":
                any_matched = True
            if state.status in ("matched",) and state.manager is None and not sq.z:
                state.manager = self.descend_manager(i)
            sub_reports.append(
                {
                    "key": sq.key(),
                    "name": sq.algo_name,
                    "status": state.status,
                    "score": state.r.get(ROOT_ID, NO_BID),
                    "manager": state.manager,
                    "matched_terminals": state.matched_terminals_seen(self.h),
                    "rows": state.rows,
                    "best": None
                    if best_row is None
                    else {
                        "family": best_row["family"],
                        "params": best_row["params"],
                        "loss": best_row["loss"],
                    },
                    "truncated": state.truncated,
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
        report = {
            "schema_version": 1,
            "engine": "distributed",
            "outcome": outcome,
            "seed": self.global_seed,
            "constants": {
                "beta": self.constants.beta,
                "alpha": self.constants.alpha,
                "tau": self.constants.tau,
            },
            "budget": self.budget,
            "folds": self.folds,
            "dataset": {"name": ds.name, "task": ds.task, "n": ds.n, "d": ds.d},
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
            "message_stats": self.sched.stats(),
            "structure_dot": self.h.to_dot(),
        }
        if self.sched.trace is not None:
            report["trace"] = self.sched.trace
        return report


def _params_key(params: dict | None) -> str:
    if not params:
        return ""
    return ",".join(f"{k}={v}" for k, v in sorted(params.items()))


def run_query(
    hierarchy: Hierarchy,
    query: Query,
    *,
    global_seed: int = 0,
    constants: SimilarityConstants = DEFAULT_CONSTANTS,
    budget: int = 64,
    folds_default: int = 5,
    keep_trace: bool = False,
) -> dict:
    engine = Engine(
        hierarchy,
        query,
        global_seed=global_seed,
        constants=constants,
        budget=budget,
        folds_default=folds_default,
        keep_trace=keep_trace,
    )
    return engine.run()


def bench_messages(
    sizes: Iterable[int] = (15, 31, 63, 127),
    *,
    budget: int = 8,
    global_seed: int = 0,
) -> list[dict]:
    """Total message counts for the worst-case chain hierarchy at each size."""
    from .hierarchy import WORST_CASE_QUERY, build_hierarchy, worst_case_catalog
    from .query import parse_query

    out = []
    previous: int | None = None
    for size in sizes:
        hierarchy = build_hierarchy(worst_case_catalog(size))
        query = parse_query(json.dumps(WORST_CASE_QUERY))
        report = run_query(hierarchy, query, global_seed=global_seed, budget=budget)
        total = report["message_stats"]["total"]
        out.append(
            {
                "agents": hierarchy.agent_count(),
                "messages": total,
                "bound": 4 * hierarchy.agent_count(),
                "ratio_to_previous": None if previous is None else total / previous,
                "winner_loss": None if report["winner"] is None else report["winner"]["loss"],
            }
        )
        previous = total
    return out
