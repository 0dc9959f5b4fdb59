"""Causal-map data model: names, relationships, feedback loops, and diffs.

Every other module passes :class:`CausalMap` values around. Maps are
immutable; variable names are stored in canonical (normalized) form while
the raw spelling first seen for each variable is kept as a display label so
failure messages can echo model output verbatim.
"""

from __future__ import annotations

import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

import networkx as nx

from .errors import InvalidLoopError, InvalidMapError, InvalidNameError, LoopExplosionError

__all__ = [
    "DEFAULT_LOOP_CAP",
    "CausalMap",
    "DuplicateRelationshipWarning",
    "FeedbackLoop",
    "LoopPolarity",
    "MapDiff",
    "Polarity",
    "PolarityMismatch",
    "Relationship",
    "UndeclaredVariableWarning",
    "diff_maps",
    "enumerate_loops",
    "loop_polarity",
    "normalize_name",
    "render_relationship",
]

DEFAULT_LOOP_CAP = 100_000


class DuplicateRelationshipWarning(UserWarning):
    pass


class UndeclaredVariableWarning(UserWarning):
    pass


class Polarity(str, Enum):
    POSITIVE = "+"
    NEGATIVE = "-"

    def __str__(self) -> str:
        return self.value

    def flipped(self) -> Polarity:
        return Polarity.NEGATIVE if self is Polarity.POSITIVE else Polarity.POSITIVE

    @classmethod
    def parse(cls, token: Any) -> Polarity:
        if isinstance(token, Polarity):
            return token
        try:
            return cls(token)
        except ValueError:
            raise ValueError(f"polarity must be '+' or '-', got {token!r}") from None


class LoopPolarity(str, Enum):
    REINFORCING = "reinforcing"
    BALANCING = "balancing"

    def __str__(self) -> str:
        return self.value


def normalize_name(raw: str) -> str:
    """Lowercase, trim, and collapse internal whitespace runs."""
    if not isinstance(raw, str):
        raise InvalidNameError(f"variable name must be a string, got {type(raw).__name__}")
    name = " ".join(raw.split()).lower()
    if not name:
        raise InvalidNameError("variable name is empty after trimming")
    return name


@dataclass(frozen=True)
class Relationship:
    source: str
    target: str
    polarity: Polarity
    reasoning: str | None = field(default=None, compare=False)

    @property
    def key(self) -> tuple[str, str]:
        return (self.source, self.target)

    @property
    def is_self_loop(self) -> bool:
        return self.source == self.target


RelationshipLike = Union[Relationship, Sequence[Any]]


def render_relationship(rel: Relationship, labels: Mapping[str, str] | None = None) -> str:
    labels = labels or {}
    source = labels.get(rel.source, rel.source)
    target = labels.get(rel.target, rel.target)
    return f"{source} --> ({rel.polarity.value}) {target}"


@dataclass(frozen=True)
class CausalMap:
    """A directed signed graph keyed by ``(source, target)``.

    Use :meth:`build` or :meth:`from_wire` rather than the raw constructor;
    they normalize names, fill in undeclared endpoints and merge duplicate
    pairs.
    """

    variables: tuple[str, ...] = ()
    relationships: tuple[Relationship, ...] = ()
    labels: Mapping[str, str] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def build(
        cls,
        relationships: Iterable[RelationshipLike] = (),
        variables: Iterable[str] = (),
        *,
        allow_self_loops: bool = True,
    ) -> CausalMap:
        labels: dict[str, str] = {}
        order: list[str] = []

        def intern(raw: str) -> str:
            name = normalize_name(raw)
            if name not in labels:
                labels[name] = " ".join(raw.split())
                order.append(name)
            return name

        for raw in variables:
            intern(raw)

        merged: dict[tuple[str, str], Relationship] = {}
        for item in relationships:
            if isinstance(item, Relationship):
                source, target, polarity, reasoning = (
                    item.source,
                    item.target,
                    item.polarity,
                    item.reasoning,
                )
            else:
                source, target, polarity, *rest = item
                reasoning = rest[0] if rest else None
            rel = Relationship(intern(source), intern(target), Polarity.parse(polarity), reasoning)
            if rel.is_self_loop and not allow_self_loops:
                raise InvalidMapError(f"self-loop on {rel.source!r} is not allowed here")
            if rel.key in merged:
                warnings.warn(
                    f"duplicate relationship {rel.source} -> {rel.target}; keeping the last one",
                    DuplicateRelationshipWarning,
                    stacklevel=2,
                )
            merged[rel.key] = rel
        return cls(tuple(order), tuple(merged.values()), labels)

    @classmethod
    def from_wire(cls, doc: Mapping[str, Any], *, allow_self_loops: bool = True) -> CausalMap:
        variables = [v["name"] for v in doc.get("variables", [])]
        relationships = [
            (r["from"], r["to"], r["polarity"], r.get("reasoning"))
            for r in doc.get("relationships", [])
        ]
        return cls.build(relationships, variables, allow_self_loops=allow_self_loops)

    def to_wire(self) -> dict[str, Any]:
        rels = []
        for rel in self.relationships:
            entry: dict[str, Any] = {
                "from": self.label(rel.source),
                "to": self.label(rel.target),
                "polarity": rel.polarity.value,
            }
            if rel.reasoning is not None:
                entry["reasoning"] = rel.reasoning
            rels.append(entry)
        return {
            "variables": [{"name": self.label(v)} for v in self.variables],
            "relationships": rels,
        }

    def label(self, name: str) -> str:
        return self.labels.get(name, name)

    def edges(self) -> dict[tuple[str, str], Relationship]:
        return {rel.key: rel for rel in self.relationships}

    def render(self, rel: Relationship) -> str:
        return render_relationship(rel, self.labels)


@dataclass(frozen=True)
class FeedbackLoop:
    nodes: tuple[str, ...]
    polarity: LoopPolarity

    @staticmethod
    def canonical_rotation(nodes: Sequence[str]) -> tuple[str, ...]:
        if not nodes:
            raise InvalidLoopError("a loop needs at least one node")
        start = min(range(len(nodes)), key=nodes.__getitem__)
        return tuple(nodes[start:]) + tuple(nodes[:start])

    @classmethod
    def from_cycle(cls, cmap: CausalMap, nodes: Sequence[str]) -> FeedbackLoop:
        """Label the cycle ``nodes[0] -> nodes[1] -> ... -> nodes[0]`` in ``cmap``."""
        if len(set(nodes)) != len(nodes):
            raise InvalidLoopError(f"cycle repeats a node: {list(nodes)}")
        edges = cmap.edges()
        signs = []
        for i, source in enumerate(nodes):
            target = nodes[(i + 1) % len(nodes)]
            try:
                signs.append(edges[(source, target)].polarity)
            except KeyError:
                raise InvalidLoopError(f"no relationship {source} -> {target} in map") from None
        return cls(cls.canonical_rotation(nodes), loop_polarity(signs))

    def __len__(self) -> int:
        return len(self.nodes)


def loop_polarity(edges: Sequence[Polarity | str]) -> LoopPolarity:
    if not edges:
        raise InvalidLoopError("cannot classify a loop with no edges")
    negatives = sum(Polarity.parse(p) is Polarity.NEGATIVE for p in edges)
    return LoopPolarity.REINFORCING if negatives % 2 == 0 else LoopPolarity.BALANCING


def enumerate_loops(cmap: CausalMap, cap: int = DEFAULT_LOOP_CAP) -> list[FeedbackLoop]:
    """Every simple directed cycle of ``cmap`` once, sorted by canonical rotation.

    Self-loops count as one-node cycles. Raises :class:`LoopExplosionError`
    as soon as more than ``cap`` cycles have been seen.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(cmap.variables)
    graph.add_edges_from(rel.key for rel in cmap.relationships)

    loops = []
    for cycle in nx.simple_cycles(graph):
        if len(loops) >= cap:
            raise LoopExplosionError(cap)
        loops.append(FeedbackLoop.from_cycle(cmap, cycle))
    loops.sort(key=lambda loop: loop.nodes)
    return loops


@dataclass(frozen=True)
class PolarityMismatch:
    source: str
    target: str
    expected: Polarity
    actual: Polarity


@dataclass(frozen=True)
class MapDiff:
    fake: tuple[Relationship, ...] = ()
    missing: tuple[Relationship, ...] = ()
    polarity_mismatches: tuple[PolarityMismatch, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not (self.fake or self.missing or self.polarity_mismatches)


def diff_maps(candidate: CausalMap, truth: CausalMap) -> MapDiff:
    """Compare on ``(source, target)`` only; polarity is the pair's value.

    ``fake`` keeps candidate order, ``missing`` and the mismatches keep
    truth order.
    """
    cand_edges = candidate.edges()
    truth_edges = truth.edges()
    fake = tuple(rel for rel in candidate.relationships if rel.key not in truth_edges)
    missing = tuple(rel for rel in truth.relationships if rel.key not in cand_edges)
    mismatches = tuple(
        PolarityMismatch(rel.source, rel.target, rel.polarity, cand_edges[rel.key].polarity)
        for rel in truth.relationships
        if rel.key in cand_edges and cand_edges[rel.key].polarity is not rel.polarity
    )
    return MapDiff(fake, missing, mismatches)
