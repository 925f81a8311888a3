"""Parametric sets and the similarity / coverage algebra used for matching.

Values live in a small algebra: a concrete value (canonical text), the wildcard
``*`` (any existing value is acceptable) and the marker ``?`` (the value is to
be searched for). Similarity scores order how well a capability answers a
request; coverage is the boolean counterpart used for pruning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

__all__ = [
    "ANY",
    "TUNE",
    "ParamError",
    "SimilarityConstants",
    "ParamSet",
    "canon_value",
    "concrete_value",
    "pair_similarity",
    "set_similarity",
    "pair_covers",
    "covers_any",
    "set_covers",
    "name_covers",
]

ANY = "*"
TUNE = "?"
_RESERVED = frozenset({ANY, TUNE})


class ParamError(ValueError):
    """Raised for malformed parameter values or sets."""


def canon_value(value: object) -> str:
    """Render a raw value in its canonical text form.

    Numbers canonicalize so that an integral float and the equal int render
    identically (100 and 100.0 both become "100"); other floats use the
    shortest round-trip form. The wildcard/tune symbols pass through.
    """
    if isinstance(value, str):
        if value == "":
            raise ParamError("empty string is not a valid parameter value")
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ParamError(f"non-finite parameter value: {value!r}")
        if value.is_integer() and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    raise ParamError(f"unsupported parameter value type: {type(value).__name__}")


def concrete_value(value: object) -> str:
    """Canonicalize a value that must be concrete (not ``*`` or ``?``)."""
    text = canon_value(value)
    if text in _RESERVED:
        raise ParamError(f"{text!r} is reserved and cannot be a concrete value")
    return text


@dataclass(frozen=True)
class SimilarityConstants:
    """Mismatch weights: 0 < beta < alpha < tau < 1."""

    beta: float = 0.1
    alpha: float = 0.6
    tau: float = 0.8

    def __post_init__(self) -> None:
        if not (0.0 < self.beta < self.alpha < self.tau < 1.0):
            raise ParamError(
                "similarity constants must satisfy 0 < beta < alpha < tau < 1, "
                f"got beta={self.beta}, alpha={self.alpha}, tau={self.tau}"
            )


DEFAULT_CONSTANTS = SimilarityConstants()


class ParamSet:
    """An immutable set of (name, value) pairs, one value per name.

    Entries are kept sorted by name so that iteration order, hashing and the
    canonical key are stable regardless of construction order.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Iterable[tuple[str, object]] = ()):
        seen: dict[str, str] = {}
        for name, value in entries:
            if not isinstance(name, str) or not name:
                raise ParamError(f"parameter name must be a non-empty string, got {name!r}")
            if name in seen:
                raise ParamError(f"duplicate parameter name: {name!r}")
            seen[name] = canon_value(value)
        object.__setattr__(self, "_entries", tuple(sorted(seen.items())))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "ParamSet":
        return cls(mapping.items())

    def items(self) -> tuple[tuple[str, str], ...]:
        return self._entries

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self._entries)

    def get(self, name: str) -> str | None:
        for key, value in self._entries:
            if key == name:
                return value
        return None

    def values(self) -> tuple[str, ...]:
        return tuple(value for _, value in self._entries)

    def merged(self, other: "ParamSet") -> "ParamSet":
        """Entries of ``other`` override same-named entries of self."""
        combined = dict(self._entries)
        combined.update(other._entries)
        return ParamSet(combined.items())

    def is_concrete(self) -> bool:
        return all(value not in _RESERVED for _, value in self._entries)

    def key(self) -> str:
        """Canonical one-line rendering, usable as a sort / hash key."""
        return ",".join(f"{name}={value}" for name, value in self._entries)

    def to_dict(self) -> dict[str, str]:
        return dict(self._entries)

    def __contains__(self, name: str) -> bool:
        return any(key == name for key, _ in self._entries)

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamSet):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        return f"ParamSet({{{self.key()}}})"

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("ParamSet is immutable")


def pair_similarity(value: str, cap_value: str, constants: SimilarityConstants = DEFAULT_CONSTANTS) -> float:
    """Similarity of a requested value against a capability value.

    Equal values score 1 (including * against * and ? against ?); otherwise a
    ? on either side scores tau, exactly one * scores alpha, and any other
    mismatch scores beta.
    """
    if value == cap_value:
        return 1.0
    if value == TUNE or cap_value == TUNE:
        return constants.tau
    if (value == ANY) != (cap_value == ANY):
        return constants.alpha
    return constants.beta


def set_similarity(query: ParamSet, cap: ParamSet, constants: SimilarityConstants = DEFAULT_CONSTANTS) -> float:
    """Score how well the capability set answers the requested set.

    Pairs are matched by name. Agreeing pairs (equal values, or a ? on either
    side) add their similarity; disagreeing pairs multiply theirs into a single
    product term, as do request names the capability lacks (weight beta). The
    product contributes 0 when no pair disagrees. Normalized by the size of the
    requested set, which must be non-empty.
    """
    if len(query) == 0:
        raise ParamError("set_similarity is undefined for an empty request set")
    total = 0.0
    product = 1.0
    mismatched = False
    for name, value in query:
        cap_value = cap.get(name)
        if cap_value is None:
            product *= constants.beta
            mismatched = True
        elif value == cap_value or value == TUNE or cap_value == TUNE:
            total += pair_similarity(value, cap_value, constants)
        else:
            product *= pair_similarity(value, cap_value, constants)
            mismatched = True
    if mismatched:
        total += product
    return total / len(query)


def pair_covers(value: str, cap_value: str) -> bool:
    """True when the capability value satisfies the requested value."""
    return value in (cap_value, ANY, TUNE) or cap_value in (ANY, TUNE)


def covers_any(value: str, cap_values: Iterable[str]) -> bool:
    return any(pair_covers(value, cv) for cv in cap_values)


def set_covers(query: ParamSet, cap: ParamSet) -> bool:
    """True when every requested pair is satisfied by a same-named capability pair.

    An empty request is covered by anything.
    """
    for name, value in query:
        cap_value = cap.get(name)
        if cap_value is None or not pair_covers(value, cap_value):
            return False
    return True


def name_covers(agent_name: str, query_name: str) -> bool:
    """Name matching: a concrete agent name satisfies itself or a wildcard."""
    return pair_covers(agent_name, query_name)
