"""Query documents: what to run (tune/select), over which algorithms and data.

A query names algorithm sub-queries (family name or ``*``, a parameter set
possibly holding ``*``/``?`` values, and search domains for the ``?`` names),
one data specification, and an output contract (task, measure, direction,
folds). Documents are JSON; parsing is strict and every rejection carries a
distinct diagnostic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .params import ANY, TUNE, ParamError, ParamSet, canon_value, concrete_value

__all__ = [
    "QueryFormatError",
    "TuneDomain",
    "Uniform",
    "LogUniform",
    "Choice",
    "IntRange",
    "domain_from_json",
    "SubQuery",
    "DataSpec",
    "OutputSpec",
    "Query",
    "parse_query",
    "parse_query_file",
    "serialize_query",
]

MEASURES = ("acc", "mse", "fms")
DIRECTIONS = ("max", "min")
TASKS = ("tune", "select")


class QueryFormatError(ValueError):
    """Raised when a query document is malformed."""


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (self.lo < self.hi):
            raise QueryFormatError(f"uniform domain requires lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng: np.random.Generator) -> str:
        return canon_value(self.lo + (self.hi - self.lo) * rng.random())

    def contains(self, value: str) -> bool:
        try:
            x = float(value)
        except ValueError:
            return False
        return self.lo <= x <= self.hi

    def to_json(self) -> dict:
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0.0 < self.lo < self.hi):
            raise QueryFormatError(
                f"loguniform domain requires 0 < lo < hi, got [{self.lo}, {self.hi}]"
            )

    def sample(self, rng: np.random.Generator) -> str:
        lo, hi = np.log(self.lo), np.log(self.hi)
        return canon_value(float(np.exp(lo + (hi - lo) * rng.random())))

    def contains(self, value: str) -> bool:
        try:
            x = float(value)
        except ValueError:
            return False
        return self.lo <= x <= self.hi

    def to_json(self) -> dict:
        return {"kind": "loguniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Choice:
    values: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise QueryFormatError("choice domain requires at least one value")
        try:
            canon = tuple(concrete_value(v) for v in self.values)
        except ParamError as exc:
            raise QueryFormatError(f"choice domain: {exc}") from None
        if len(set(canon)) != len(canon):
            raise QueryFormatError(f"choice domain has duplicate values: {self.values}")
        object.__setattr__(self, "values", canon)

    def sample(self, rng: np.random.Generator) -> str:
        return self.values[int(rng.integers(len(self.values)))]

    def contains(self, value: str) -> bool:
        return value in self.values

    def to_json(self) -> dict:
        return {"kind": "choice", "values": list(self.values)}


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int  # inclusive

    def __post_init__(self) -> None:
        if not (isinstance(self.lo, int) and isinstance(self.hi, int)):
            raise QueryFormatError("intrange bounds must be integers")
        if not (self.lo < self.hi):
            raise QueryFormatError(f"intrange domain requires lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng: np.random.Generator) -> str:
        return str(int(rng.integers(self.lo, self.hi + 1)))

    def contains(self, value: str) -> bool:
        try:
            x = int(value)
        except ValueError:
            return False
        return self.lo <= x <= self.hi

    def to_json(self) -> dict:
        return {"kind": "intrange", "lo": self.lo, "hi": self.hi}


TuneDomain = Uniform | LogUniform | Choice | IntRange


def domain_from_json(obj: object, where: str) -> TuneDomain:
    if not isinstance(obj, dict):
        raise QueryFormatError(f"{where}: domain must be an object, got {type(obj).__name__}")
    kind = obj.get("kind")
    try:
        if kind == "uniform":
            return Uniform(float(obj["lo"]), float(obj["hi"]))
        if kind == "loguniform":
            return LogUniform(float(obj["lo"]), float(obj["hi"]))
        if kind == "choice":
            values = obj["values"]
            if not isinstance(values, list):
                raise QueryFormatError(f"{where}: choice values must be a list")
            return Choice(tuple(values))
        if kind == "intrange":
            lo, hi = obj["lo"], obj["hi"]
            if not (isinstance(lo, int) and isinstance(hi, int)) or isinstance(lo, bool) or isinstance(hi, bool):
                raise QueryFormatError(f"{where}: intrange bounds must be integers")
            return IntRange(lo, hi)
    except KeyError as exc:
        raise QueryFormatError(f"{where}: domain missing field {exc.args[0]!r}") from None
    raise QueryFormatError(f"{where}: unknown domain kind {kind!r}")


@dataclass(frozen=True)
class SubQuery:
    """One algorithm request: a name pattern plus a parametric set."""

    algo_name: str
    params: ParamSet
    domains: tuple[tuple[str, TuneDomain], ...] = ()
    all_params: bool = False  # params document was the bare wildcard "*"

    def __post_init__(self) -> None:
        if not self.algo_name or self.algo_name == TUNE:
            raise QueryFormatError(f"algorithm name may not be {self.algo_name!r}")
        if self.all_params and len(self.params):
            raise QueryFormatError("all-params wildcard cannot be combined with named parameters")
        object.__setattr__(self, "domains", tuple(sorted(self.domains, key=lambda kv: kv[0])))
        domain_names = [name for name, _ in self.domains]
        if len(set(domain_names)) != len(domain_names):
            raise QueryFormatError("duplicate domain name in sub-query")
        for name in domain_names:
            value = self.params.get(name)
            if value is None:
                raise QueryFormatError(f"domain declared for unknown parameter {name!r}")
            if value not in (TUNE, ANY):
                raise QueryFormatError(
                    f"domain declared for parameter {name!r} whose value is concrete"
                )
        for name, value in self.params:
            if value == TUNE and name not in dict(self.domains):
                raise QueryFormatError(f"parameter {name!r} is marked '?' but has no domain")

    @property
    def z(self) -> bool:
        """True when any parameter value is the tune marker."""
        return TUNE in self.params.values()

    @property
    def l(self) -> bool:
        """True when the sub-query is generic: any wildcard value present."""
        return self.all_params or ANY in self.params.values()

    def domain_map(self) -> dict[str, TuneDomain]:
        return dict(self.domains)

    def key(self) -> str:
        """Canonical rendering used for report labels and seed derivation."""
        body = "*" if self.all_params else self.params.key()
        domains = ";".join(
            f"{name}:{json.dumps(dom.to_json(), sort_keys=True, separators=(',', ':'))}"
            for name, dom in self.domains
        )
        return f"{self.algo_name}|{{{body}}}|{domains}"

    def to_json(self) -> dict:
        doc: dict = {"name": self.algo_name}
        doc["params"] = "*" if self.all_params else self.params.to_dict()
        if self.domains:
            doc["domains"] = {name: dom.to_json() for name, dom in self.domains}
        return doc


@dataclass(frozen=True)
class DataSpec:
    name: str
    params: ParamSet = field(default_factory=ParamSet)

    def __post_init__(self) -> None:
        if not self.name or self.name == TUNE:
            raise QueryFormatError(f"data name may not be {self.name!r}")
        if TUNE in self.params.values():
            raise QueryFormatError("'?' is only meaningful inside algorithm parameters")

    def to_json(self) -> dict:
        return {"name": self.name, "params": self.params.to_dict()}


@dataclass(frozen=True)
class OutputSpec:
    task: str
    measure: str
    direction: str
    folds: int | None = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise QueryFormatError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.measure not in MEASURES:
            raise QueryFormatError(f"unknown measure {self.measure!r}; expected one of {MEASURES}")
        if self.direction not in DIRECTIONS:
            raise QueryFormatError(
                f"unknown direction {self.direction!r}; expected one of {DIRECTIONS}"
            )
        if self.folds is not None and (not isinstance(self.folds, int) or self.folds < 2):
            raise QueryFormatError(f"folds must be an integer >= 2, got {self.folds!r}")

    def to_json(self) -> dict:
        doc = {"task": self.task, "measure": self.measure, "direction": self.direction}
        if self.folds is not None:
            doc["folds"] = self.folds
        return doc


@dataclass(frozen=True)
class Query:
    algorithms: tuple[SubQuery, ...]
    data: DataSpec
    output: OutputSpec

    def __post_init__(self) -> None:
        if not self.algorithms:
            raise QueryFormatError("query must request at least one algorithm")
        if self.output.task == "tune" and not any(sq.z for sq in self.algorithms):
            raise QueryFormatError("a tune query must contain at least one '?' value")

    def to_json(self) -> dict:
        return {
            "algorithms": [sq.to_json() for sq in self.algorithms],
            "data": self.data.to_json(),
            "output": self.output.to_json(),
        }


def _reject_duplicate_keys(pairs: list[tuple[str, object]]) -> dict:
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise QueryFormatError(f"duplicate key in document: {key!r}")
        seen.add(key)
    return dict(pairs)


def _parse_value(raw: object, where: str) -> str:
    if isinstance(raw, (dict, list)) or raw is None:
        raise QueryFormatError(f"{where}: parameter values must be text or numbers")
    try:
        return canon_value(raw)
    except ParamError as exc:
        raise QueryFormatError(f"{where}: {exc}") from None


def _parse_paramset(raw: object, where: str, allow_tune: bool) -> ParamSet:
    if not isinstance(raw, dict):
        raise QueryFormatError(f"{where}: params must be an object")
    entries = []
    for name, value in raw.items():
        text = _parse_value(value, f"{where}.{name}")
        if text == TUNE and not allow_tune:
            raise QueryFormatError(
                f"{where}.{name}: '?' is only meaningful inside algorithm parameters"
            )
        entries.append((name, text))
    try:
        return ParamSet(entries)
    except ParamError as exc:
        raise QueryFormatError(f"{where}: {exc}") from None


def _parse_subquery(raw: object, idx: int) -> SubQuery:
    where = f"algorithms[{idx}]"
    if not isinstance(raw, dict):
        raise QueryFormatError(f"{where}: must be an object")
    unknown = set(raw) - {"name", "params", "domains"}
    if unknown:
        raise QueryFormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise QueryFormatError(f"{where}: missing or invalid algorithm name")
    params_raw = raw.get("params", {})
    all_params = False
    if params_raw == "*":
        all_params = True
        params = ParamSet()
    else:
        params = _parse_paramset(params_raw, f"{where}.params", allow_tune=True)
        if len(params) == 0:
            raise QueryFormatError(
                f"{where}.params: must name at least one parameter;"
                ' use "*" to accept any configuration'
            )
    domains_raw = raw.get("domains", {})
    if not isinstance(domains_raw, dict):
        raise QueryFormatError(f"{where}.domains: must be an object")
    domains = tuple(
        (dname, domain_from_json(dobj, f"{where}.domains.{dname}"))
        for dname, dobj in domains_raw.items()
    )
    return SubQuery(algo_name=name, params=params, domains=domains, all_params=all_params)


def parse_query(text: str) -> Query:
    """Parse and validate a query document; raises QueryFormatError."""
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except QueryFormatError:
        raise
    except json.JSONDecodeError as exc:
        raise QueryFormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise QueryFormatError("query document must be a JSON object")
    unknown = set(doc) - {"algorithms", "data", "output"}
    if unknown:
        raise QueryFormatError(f"unknown top-level field(s) {sorted(unknown)}")
    algorithms_raw = doc.get("algorithms")
    if not isinstance(algorithms_raw, list) or not algorithms_raw:
        raise QueryFormatError("'algorithms' must be a non-empty list")
    algorithms = tuple(_parse_subquery(sq, i) for i, sq in enumerate(algorithms_raw))

    data_raw = doc.get("data")
    if not isinstance(data_raw, dict):
        raise QueryFormatError("'data' must be an object")
    unknown = set(data_raw) - {"name", "params"}
    if unknown:
        raise QueryFormatError(f"data: unknown field(s) {sorted(unknown)}")
    data_name = data_raw.get("name")
    if not isinstance(data_name, str) or not data_name:
        raise QueryFormatError("data: missing or invalid name")
    data = DataSpec(
        name=data_name,
        params=_parse_paramset(data_raw.get("params", {}), "data.params", allow_tune=False),
    )

    output_raw = doc.get("output")
    if not isinstance(output_raw, dict):
        raise QueryFormatError("'output' must be an object")
    unknown = set(output_raw) - {"task", "measure", "direction", "folds"}
    if unknown:
        raise QueryFormatError(f"output: unknown field(s) {sorted(unknown)}")
    folds = output_raw.get("folds")
    if folds is not None and (isinstance(folds, bool) or not isinstance(folds, int)):
        raise QueryFormatError(f"folds must be an integer >= 2, got {folds!r}")
    output = OutputSpec(
        task=output_raw.get("task", ""),
        measure=output_raw.get("measure", ""),
        direction=output_raw.get("direction", ""),
        folds=folds,
    )
    return Query(algorithms=algorithms, data=data, output=output)


def parse_query_file(path: str) -> Query:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise QueryFormatError(f"cannot read query file {path!r}: {exc}") from None
    return parse_query(text)


def serialize_query(query: Query) -> str:
    """Canonical JSON rendering; parse(serialize(q)) == q."""
    return json.dumps(query.to_json(), indent=2, sort_keys=True)


def parse_mapping_params(mapping: Mapping[str, object], where: str = "params") -> ParamSet:
    """Helper for catalog loading: concrete-or-wildcard parameter objects."""
    return _parse_paramset(dict(mapping), where, allow_tune=False)
