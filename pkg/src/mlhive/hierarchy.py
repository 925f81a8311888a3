"""The resource hierarchy: a tree of agents over algorithm configurations and datasets.

Level 0 holds the root; level 1 the algorithm-subtree root and the data-subtree
root. Each algorithm family gets a name agent whose subtree holds one terminal
per catalog configuration, optionally nested under composite group agents. The
data subtree is flat. Every non-terminal carries the union of its descendant
terminals' capabilities, so pruning on it never loses a real match.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .datasets import Dataset, DatasetError, generate_dataset, load_dataset_file
from .params import ANY, TUNE, ParamError, ParamSet, covers_any, name_covers, pair_covers
from .query import DataSpec, SubQuery

__all__ = [
    "HierarchyError",
    "NoDataError",
    "AmbiguousDataError",
    "AgentKind",
    "Capability",
    "AgentNode",
    "CatalogAlgorithm",
    "CatalogDataset",
    "Catalog",
    "load_catalog_file",
    "parse_catalog",
    "build_hierarchy",
    "Hierarchy",
    "worst_case_catalog",
    "WORST_CASE_QUERY",
]


class HierarchyError(ValueError):
    """Raised for malformed catalogs or impossible hierarchy operations."""


class NoDataError(LookupError):
    """No dataset satisfies the query's data specification."""


class AmbiguousDataError(LookupError):
    """More than one dataset satisfies the query's data specification."""


class AgentKind:
    ROOT = "root"
    ALG_ROOT = "alg_root"
    DATA_ROOT = "data_root"
    NAME = "name"
    COMPOSITE = "composite"
    TERMINAL = "terminal"
    DATA_TERMINAL = "data_terminal"
    TUNER = "tuner"


ALG_ROOT_ID = "ALG"
DATA_ROOT_ID = "DATA"
ROOT_ID = "root"


class Capability:
    """A multi-valued parametric set: each name maps to the values seen below."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[str, Iterable[str]] | None = None):
        data = {}
        for name, values in (entries or {}).items():
            data[name] = tuple(sorted(set(values)))
        object.__setattr__(self, "_entries", dict(sorted(data.items())))

    @classmethod
    def from_paramset(cls, params: ParamSet) -> "Capability":
        return cls({name: (value,) for name, value in params})

    @classmethod
    def union(cls, caps: Iterable["Capability"]) -> "Capability":
        merged: dict[str, set[str]] = {}
        for cap in caps:
            for name, values in cap._entries.items():
                merged.setdefault(name, set()).update(values)
        return cls(merged)

    def get(self, name: str) -> tuple[str, ...]:
        return self._entries.get(name, ())

    def names(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def covers(self, query: ParamSet) -> bool:
        """Every requested pair must be satisfiable by some same-named value."""
        for name, value in query:
            if not covers_any(value, self._entries.get(name, ())):
                return False
        return True

    def to_dict(self) -> dict[str, list[str]]:
        return {name: list(values) for name, values in self._entries.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Capability):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self) -> str:
        return f"Capability({self._entries!r})"

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Capability is immutable")


@dataclass
class AgentNode:
    id: str
    kind: str
    level: int
    parent: str | None
    children: tuple[str, ...] = ()
    name: str | None = None  # family (algorithm side) or dataset name
    config: ParamSet | None = None  # terminals only
    capability: Capability = field(default_factory=Capability)
    dataset: Dataset | None = None  # data terminals only

    @property
    def is_terminal(self) -> bool:
        return self.kind in (AgentKind.TERMINAL, AgentKind.DATA_TERMINAL)


@dataclass(frozen=True)
class CatalogAlgorithm:
    family: str
    params: ParamSet
    group: tuple[str, ...] = ()


@dataclass(frozen=True)
class CatalogDataset:
    name: str
    params: ParamSet
    dataset: Dataset


@dataclass(frozen=True)
class Catalog:
    algorithms: tuple[CatalogAlgorithm, ...]
    datasets: tuple[CatalogDataset, ...]


def _check_label(label: str, what: str) -> str:
    if not isinstance(label, str) or not label:
        raise HierarchyError(f"{what} must be a non-empty string, got {label!r}")
    if "/" in label or label in (ANY, TUNE):
        raise HierarchyError(f"{what} {label!r} contains reserved characters")
    if label.startswith("cfg("):
        raise HierarchyError(f"{what} {label!r} collides with terminal naming")
    return label


def _concrete_paramset(raw: object, where: str) -> ParamSet:
    if not isinstance(raw, dict):
        raise HierarchyError(f"{where}: params must be an object")
    try:
        ps = ParamSet((name, value) for name, value in raw.items())
    except ParamError as exc:
        raise HierarchyError(f"{where}: {exc}") from None
    if not ps.is_concrete():
        raise HierarchyError(f"{where}: capability values must be concrete, got {ps.key()}")
    return ps


def parse_catalog(doc: object, base_dir: str = ".") -> Catalog:
    """Validate a catalog document and materialize its datasets."""
    import os

    if not isinstance(doc, dict):
        raise HierarchyError("catalog document must be a JSON object")
    unknown = set(doc) - {"algorithms", "datasets"}
    if unknown:
        raise HierarchyError(f"catalog: unknown field(s) {sorted(unknown)}")

    algorithms = []
    seen_cfg: set[tuple[str, str]] = set()
    for i, entry in enumerate(doc.get("algorithms", [])):
        where = f"algorithms[{i}]"
        if not isinstance(entry, dict):
            raise HierarchyError(f"{where}: must be an object")
        unknown = set(entry) - {"family", "params", "group"}
        if unknown:
            raise HierarchyError(f"{where}: unknown field(s) {sorted(unknown)}")
        family = _check_label(entry.get("family"), f"{where}.family")
        params = _concrete_paramset(entry.get("params", {}), f"{where}.params")
        group_raw = entry.get("group", [])
        if not isinstance(group_raw, list):
            raise HierarchyError(f"{where}.group: must be a list of labels")
        group = tuple(_check_label(g, f"{where}.group[{j}]") for j, g in enumerate(group_raw))
        cfg_key = (family, params.key())
        if cfg_key in seen_cfg:
            raise HierarchyError(f"{where}: duplicate configuration {family}({params.key()})")
        seen_cfg.add(cfg_key)
        algorithms.append(CatalogAlgorithm(family=family, params=params, group=group))

    datasets = []
    seen_names: set[str] = set()
    for i, entry in enumerate(doc.get("datasets", [])):
        where = f"datasets[{i}]"
        if not isinstance(entry, dict):
            raise HierarchyError(f"{where}: must be an object")
        unknown = set(entry) - {"name", "params", "generator", "file"}
        if unknown:
            raise HierarchyError(f"{where}: unknown field(s) {sorted(unknown)}")
        name = _check_label(entry.get("name"), f"{where}.name")
        if name in seen_names:
            raise HierarchyError(f"{where}: duplicate dataset name {name!r}")
        seen_names.add(name)
        params = _concrete_paramset(entry.get("params", {}), f"{where}.params")
        if "generator" in entry and "file" in entry:
            raise HierarchyError(f"{where}: give either a generator or a file, not both")
        try:
            if "generator" in entry:
                gen = dict(entry["generator"])
                kind = gen.pop("kind", None)
                dataset = generate_dataset(kind, name=name, **gen)
            elif "file" in entry:
                dataset = load_dataset_file(os.path.join(base_dir, entry["file"]))
            else:
                raise HierarchyError(f"{where}: needs a generator or a file reference")
        except (DatasetError, TypeError) as exc:
            raise HierarchyError(f"{where}: {exc}") from None
        datasets.append(CatalogDataset(name=name, params=params, dataset=dataset))

    return Catalog(algorithms=tuple(algorithms), datasets=tuple(datasets))


def load_catalog_file(path: str) -> Catalog:
    import os

    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise HierarchyError(f"cannot read catalog file {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise HierarchyError(f"catalog file {path!r} is not valid JSON: {exc}") from None
    return parse_catalog(doc, base_dir=os.path.dirname(path) or ".")


class Hierarchy:
    """Mutable only through tuner spawn/removal; everything else is fixed at build."""

    def __init__(self, nodes: dict[str, AgentNode]):
        self.nodes = nodes

    # -- navigation -----------------------------------------------------------

    def node(self, agent_id: str) -> AgentNode:
        try:
            return self.nodes[agent_id]
        except KeyError:
            raise HierarchyError(f"unknown agent {agent_id!r}") from None

    def children(self, agent_id: str) -> tuple[str, ...]:
        return self.node(agent_id).children

    def parent(self, agent_id: str) -> str | None:
        return self.node(agent_id).parent

    def agent_count(self) -> int:
        return len(self.nodes)

    def terminals(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.kind == AgentKind.TERMINAL]

    def data_terminals(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.kind == AgentKind.DATA_TERMINAL]

    def subtree_ids(self, agent_id: str) -> list[str]:
        out = [agent_id]
        stack = list(self.node(agent_id).children)
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(self.node(nid).children)
        return out

    def subtree_terminals(self, agent_id: str) -> list[str]:
        return sorted(
            nid for nid in self.subtree_ids(agent_id) if self.node(nid).kind == AgentKind.TERMINAL
        )

    def lowest_common_ancestor(self, agent_ids: Iterable[str]) -> str:
        ids = list(agent_ids)
        if not ids:
            raise HierarchyError("LCA of an empty set is undefined")
        current = ids[0]
        for other in ids[1:]:
            a, b = current, other
            while self.node(a).level > self.node(b).level:
                a = self.node(a).parent
            while self.node(b).level > self.node(a).level:
                b = self.node(b).parent
            while a != b:
                a = self.node(a).parent
                b = self.node(b).parent
            current = a
        return current

    # -- matching -------------------------------------------------------------

    def terminal_matches(self, terminal_id: str, sq: SubQuery) -> bool:
        node = self.node(terminal_id)
        if node.kind != AgentKind.TERMINAL:
            raise HierarchyError(f"{terminal_id!r} is not an algorithm terminal")
        if not name_covers(node.name, sq.algo_name):
            return False
        if sq.all_params:
            return True
        return all(
            node.config.get(name) is not None and pair_covers(value, node.config.get(name))
            for name, value in sq.params
        )

    def matching_terminals(self, sq: SubQuery) -> list[str]:
        return sorted(t for t in self.terminals() if self.terminal_matches(t, sq))

    def locate_data(self, spec: DataSpec) -> str:
        """The unique data terminal satisfying the spec; NoData/AmbiguousData otherwise."""
        matches = sorted(
            n.id
            for n in self.nodes.values()
            if n.kind == AgentKind.DATA_TERMINAL
            and name_covers(n.name, spec.name)
            and n.capability.covers(spec.params)
        )
        if not matches:
            raise NoDataError(f"no dataset matches {spec.name!r} {spec.params.key()!r}")
        if len(matches) > 1:
            raise AmbiguousDataError(f"data spec is ambiguous: {matches}")
        return matches[0]

    # -- structure edits (ephemeral tuners only) -------------------------------

    def add_tuner(self, parent_id: str, label: str) -> str:
        parent = self.node(parent_id)
        tuner_id = f"{parent_id}/tuner({label})"
        if tuner_id in self.nodes:
            raise HierarchyError(f"tuner {tuner_id!r} already exists")
        self.nodes[tuner_id] = AgentNode(
            id=tuner_id,
            kind=AgentKind.TUNER,
            level=parent.level + 1,
            parent=parent_id,
            name=parent.name,
        )
        parent.children = tuple(list(parent.children) + [tuner_id])
        return tuner_id

    def remove_node(self, agent_id: str) -> None:
        node = self.node(agent_id)
        if node.children:
            raise HierarchyError(f"cannot remove {agent_id!r}: it still has children")
        parent = self.node(node.parent)
        parent.children = tuple(c for c in parent.children if c != agent_id)
        del self.nodes[agent_id]

    # -- derived views ---------------------------------------------------------

    def with_child_order(self, reorder: Callable[[list[str]], list[str]]) -> "Hierarchy":
        """A structural copy whose child tuples are reordered (same sets)."""
        nodes = {}
        for nid, node in self.nodes.items():
            reordered = tuple(reorder(list(node.children))) if node.children else ()
            if sorted(reordered) != sorted(node.children):
                raise HierarchyError("reorder must permute, not change, the children")
            nodes[nid] = AgentNode(
                id=node.id,
                kind=node.kind,
                level=node.level,
                parent=node.parent,
                children=reordered,
                name=node.name,
                config=node.config,
                capability=node.capability,
                dataset=node.dataset,
            )
        return Hierarchy(nodes)

    def to_dot(self) -> str:
        """Canonical DOT rendering: nodes and edges in sorted-id order."""
        shapes = {
            AgentKind.ROOT: "doubleoctagon",
            AgentKind.ALG_ROOT: "box3d",
            AgentKind.DATA_ROOT: "box3d",
            AgentKind.NAME: "box",
            AgentKind.COMPOSITE: "folder",
            AgentKind.TERMINAL: "ellipse",
            AgentKind.DATA_TERMINAL: "cylinder",
            AgentKind.TUNER: "diamond",
        }
        lines = ["digraph hierarchy {", "  rankdir=TB;"]
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            label = nid
            if node.kind == AgentKind.TERMINAL:
                label = f"{node.name}\\n{node.config.key() or '(defaults)'}"
            elif node.kind == AgentKind.DATA_TERMINAL:
                label = f"{node.name}\\n{node.dataset.task}"
            escaped = label.replace('"', '\\"')
            lines.append(f'  "{nid}" [label="{escaped}", shape={shapes[node.kind]}];')
        for nid in sorted(self.nodes):
            for child in sorted(self.nodes[nid].children):
                lines.append(f'  "{nid}" -> "{child}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_hierarchy(catalog: Catalog) -> Hierarchy:
    """Deterministic tree construction: identical catalogs yield identical trees."""
    nodes: dict[str, AgentNode] = {}

    def add(node: AgentNode) -> AgentNode:
        if node.id in nodes:
            raise HierarchyError(f"duplicate agent id {node.id!r}")
        nodes[node.id] = node
        if node.parent is not None:
            parent = nodes[node.parent]
            parent.children = tuple(list(parent.children) + [node.id])
        return node

    add(AgentNode(id=ROOT_ID, kind=AgentKind.ROOT, level=0, parent=None))
    add(AgentNode(id=ALG_ROOT_ID, kind=AgentKind.ALG_ROOT, level=1, parent=ROOT_ID))
    add(AgentNode(id=DATA_ROOT_ID, kind=AgentKind.DATA_ROOT, level=1, parent=ROOT_ID))

    for alg in sorted(catalog.algorithms, key=lambda a: (a.family, a.group, a.params.key())):
        family_id = f"{ALG_ROOT_ID}/{alg.family}"
        if family_id not in nodes:
            add(
                AgentNode(
                    id=family_id,
                    kind=AgentKind.NAME,
                    level=2,
                    parent=ALG_ROOT_ID,
                    name=alg.family,
                )
            )
        parent_id = family_id
        for label in alg.group:
            comp_id = f"{parent_id}/{label}"
            if comp_id not in nodes:
                add(
                    AgentNode(
                        id=comp_id,
                        kind=AgentKind.COMPOSITE,
                        level=nodes[parent_id].level + 1,
                        parent=parent_id,
                        name=alg.family,
                    )
                )
            elif nodes[comp_id].kind != AgentKind.COMPOSITE:
                raise HierarchyError(f"group path collides with a terminal at {comp_id!r}")
            parent_id = comp_id
        terminal_id = f"{parent_id}/cfg({alg.params.key()})"
        add(
            AgentNode(
                id=terminal_id,
                kind=AgentKind.TERMINAL,
                level=nodes[parent_id].level + 1,
                parent=parent_id,
                name=alg.family,
                config=alg.params,
                capability=Capability.from_paramset(alg.params),
            )
        )

    for ds in sorted(catalog.datasets, key=lambda d: d.name):
        add(
            AgentNode(
                id=f"{DATA_ROOT_ID}/{ds.name}",
                kind=AgentKind.DATA_TERMINAL,
                level=2,
                parent=DATA_ROOT_ID,
                name=ds.name,
                capability=Capability.from_paramset(ds.params),
                dataset=ds.dataset,
                config=ds.params,
            )
        )

    # canonical child order, then bottom-up union capabilities
    for node in nodes.values():
        node.children = tuple(sorted(node.children))
    for node in sorted(nodes.values(), key=lambda n: -n.level):
        if node.kind in (AgentKind.NAME, AgentKind.COMPOSITE, AgentKind.ALG_ROOT):
            node.capability = Capability.union(nodes[c].capability for c in node.children)
    return Hierarchy(nodes)


WORST_CASE_QUERY = {
    "algorithms": [
        {
            "name": "ridge",
            "params": {"alpha": "?"},
            "domains": {"alpha": {"kind": "loguniform", "lo": 0.01, "hi": 100.0}},
        }
    ],
    "data": {"name": "bench_linreg", "params": {}},
    "output": {"task": "tune", "measure": "mse", "direction": "min", "folds": 3},
}


def worst_case_catalog(total_agents: int) -> Catalog:
    """A catalog whose hierarchy has exactly ``total_agents`` agents and worst-case depth.

    The algorithm side is a single-family chain in which every non-terminal has
    two subordinates (one terminal, one composite; the last composite has two
    terminals), realizing height (chain_size - 1) / 2 over chain_size agents.
    Fixed overhead: root, both subtree roots, one data terminal.
    """
    if total_agents < 3:
        raise HierarchyError(f"cannot build a hierarchy with {total_agents} agents")
    datasets = []
    if total_agents >= 4:
        datasets.append(
            {
                "name": "bench_linreg",
                "params": {"type": "all"},
                "generator": {
                    "kind": "linreg",
                    "n": 30,
                    "seed": 7,
                    "noise": 0.3,
                    "dims": 2,
                },
            }
        )
    chain_size = total_agents - 3 - len(datasets)
    if chain_size % 2 == 0 and chain_size > 0:
        datasets.append(
            {
                "name": "bench_pad",
                "params": {"type": "all"},
                "generator": {"kind": "quad", "n": 20, "seed": 8, "noise": 0.2},
            }
        )
        chain_size -= 1

    algorithms: list[dict] = []
    if chain_size >= 3:
        n_composites = (chain_size - 3) // 2
        group: list[str] = []
        algorithms.append({"family": "ridge", "params": {"alpha": 1}, "group": []})
        for i in range(1, n_composites + 1):
            group.append(f"g{i:03d}")
            algorithms.append({"family": "ridge", "params": {"alpha": i + 1}, "group": list(group)})
        algorithms.append(
            {"family": "ridge", "params": {"alpha": n_composites + 2}, "group": list(group)}
        )
    elif chain_size == 2:
        algorithms.append({"family": "ridge", "params": {"alpha": 1}, "group": []})
    # chain_size in (0, 1): no algorithm side beyond what fits

    catalog = parse_catalog({"algorithms": algorithms, "datasets": datasets})
    built = build_hierarchy(catalog)
    if chain_size not in (0, 1) and built.agent_count() != total_agents:
        raise HierarchyError(
            f"generator produced {built.agent_count()} agents for target {total_agents}"
        )
    return catalog
