"""Deterministic generation of the causal-translation and conformance suites.

Ground truths live in a gibberish universe so a model cannot lean on world
knowledge. Nouns are consumed from the vocabulary in a fixed draw order
(the vocabulary order itself for ``seed=0``; a seeded permutation
otherwise), which with ``seed=0`` reproduces the variable names used by the
published benchmark run.
"""

from __future__ import annotations

import json
import random
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import InvalidLengthError, VocabularyError
from .graph import CausalMap, LoopPolarity, Polarity, Relationship

__all__ = [
    "CONFORMANCE_BASES",
    "MULTI_LOOP_LAYOUTS",
    "VOCABULARY_SIZE",
    "CausalSentenceSpec",
    "ConformanceCase",
    "ConformanceConstraint",
    "Direction",
    "GibberishVocabulary",
    "GroundTruthCase",
    "TestGroup",
    "assemble_description",
    "build_conformance_tests",
    "build_loop",
    "build_multi_loop_tests",
    "build_single_loop_tests",
    "build_single_relationship_tests",
    "canonical_suites",
    "parse_description",
    "parse_sentence",
    "pluralize",
    "render_sentence",
    "singularize",
]

VOCABULARY_SIZE = 56
SINGLE_LOOP_LENGTHS = range(2, 9)

# (loop lengths, loop signs) per multi-loop case; consecutive loops share one noun.
MULTI_LOOP_LAYOUTS: tuple[tuple[tuple[int, ...], tuple[str, ...]], ...] = (
    ((3, 6), ("+", "+")),
    ((3, 6), ("-", "+")),
    ((5, 2, 4), ("-", "-", "+")),
    ((5, 2, 4), ("+", "+", "-")),
    ((3, 5, 6, 2, 6), ("-", "+", "+", "-", "-")),
    ((3, 5, 6, 2, 6), ("-", "+", "+", "+", "-")),
)


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


class TestGroup(str, Enum):
    SINGLE_RELATIONSHIP = "single_relationship"
    SINGLE_LOOP = "single_loop"
    MULTIPLE_LOOPS = "multiple_loops"

    @property
    def display(self) -> str:
        return {
            TestGroup.SINGLE_RELATIONSHIP: "single relationship",
            TestGroup.SINGLE_LOOP: "single feedback loop",
            TestGroup.MULTIPLE_LOOPS: "multiple feedback loops",
        }[self]


@dataclass(frozen=True)
class GibberishVocabulary:
    nouns: tuple[str, ...]

    def __post_init__(self) -> None:
        nouns = tuple(self.nouns)
        object.__setattr__(self, "nouns", nouns)
        if len(nouns) != VOCABULARY_SIZE:
            raise VocabularyError(f"vocabulary needs {VOCABULARY_SIZE} nouns, got {len(nouns)}")
        if len(set(nouns)) != len(nouns):
            dupes = sorted({n for n in nouns if nouns.count(n) > 1})
            raise VocabularyError(f"duplicate nouns: {dupes}")
        for noun in nouns:
            if not re.fullmatch(r"[a-z]+", noun):
                raise VocabularyError(f"noun {noun!r} must be a single lowercase word")
            if noun.endswith(("s", "y")):
                raise VocabularyError(f"noun {noun!r} cannot be pluralized by appending 's'")

    @classmethod
    def default(cls) -> GibberishVocabulary:
        text = resources.files("sd_eval").joinpath("data/vocabulary.json").read_text("utf-8")
        return cls(tuple(json.loads(text)["nouns"]))

    @classmethod
    def from_file(cls, path: str | Path) -> GibberishVocabulary:
        return cls(tuple(json.loads(Path(path).read_text("utf-8"))["nouns"]))

    def draw_order(self, seed: int) -> tuple[str, ...]:
        if seed == 0:
            return self.nouns
        return tuple(random.Random(seed).sample(self.nouns, len(self.nouns)))

    def __len__(self) -> int:
        return len(self.nouns)


def pluralize(noun: str) -> str:
    if not noun or noun != noun.lower():
        raise VocabularyError(f"cannot pluralize {noun!r}: expected a lowercase noun")
    if noun.endswith("s"):
        raise VocabularyError(f"cannot pluralize {noun!r}: already ends in 's'")
    return noun + "s"


def singularize(plural: str) -> str:
    if not plural.endswith("s") or len(plural) < 2:
        raise VocabularyError(f"{plural!r} is not a pluralized vocabulary noun")
    return plural[:-1]


@dataclass(frozen=True)
class CausalSentenceSpec:
    """One causal link in singular-noun form plus the narrated direction."""

    source: str
    target: str
    polarity: Polarity
    direction: Direction

    @property
    def relationship(self) -> Relationship:
        return Relationship(pluralize(self.source), pluralize(self.target), self.polarity)


_WORDS = {
    (Polarity.POSITIVE, Direction.UP): ("more", "more"),
    (Polarity.POSITIVE, Direction.DOWN): ("less", "fewer"),
    (Polarity.NEGATIVE, Direction.UP): ("more", "fewer"),
    (Polarity.NEGATIVE, Direction.DOWN): ("less", "more"),
}
_WORDS_INVERSE = {words: key for key, words in _WORDS.items()}
_SENTENCE = re.compile(
    r"The (more|less) ([a-z]+) there are, the (more|fewer) ([a-z]+) there are\."
)


def render_sentence(spec: CausalSentenceSpec) -> str:
    if spec.source == spec.target:
        raise InvalidLengthError("a causal sentence needs two different variables")
    first, second = _WORDS[(Polarity.parse(spec.polarity), Direction(spec.direction))]
    return (
        f"The {first} {pluralize(spec.source)} there are, "
        f"the {second} {pluralize(spec.target)} there are."
    )


def parse_sentence(text: str) -> CausalSentenceSpec:
    """Strict inverse of :func:`render_sentence`."""
    match = _SENTENCE.fullmatch(text)
    if match is None:
        raise ValueError(f"not a causal sentence: {text!r}")
    first, source, second, target = match.groups()
    try:
        polarity, direction = _WORDS_INVERSE[(first, second)]
    except KeyError:
        raise ValueError(f"inconsistent comparison words {first!r}/{second!r}") from None
    return CausalSentenceSpec(singularize(source), singularize(target), polarity, direction)


def parse_description(text: str) -> list[CausalSentenceSpec]:
    sentences = [m.group(0) for m in _SENTENCE.finditer(text)]
    if " ".join(sentences) != text:
        raise ValueError("description contains text outside causal sentences")
    return [parse_sentence(s) for s in sentences]


def assemble_description(
    truth: CausalMap,
    seed: int,
    directions: Mapping[tuple[str, str], Direction] | None = None,
) -> str:
    """One sentence per relationship, seeded-shuffled, joined by single spaces.

    ``directions`` maps ``(source, target)`` to the narrated direction; pairs
    not listed are narrated ``up``.
    """
    if not truth.relationships:
        raise InvalidLengthError("cannot describe an empty map")
    directions = directions or {}
    sentences = [
        render_sentence(
            CausalSentenceSpec(
                singularize(rel.source),
                singularize(rel.target),
                rel.polarity,
                directions.get(rel.key, Direction.UP),
            )
        )
        for rel in truth.relationships
    ]
    random.Random(seed).shuffle(sentences)
    return " ".join(sentences)


def _loop_sentences(nouns: Sequence[str], sign: LoopPolarity) -> list[CausalSentenceSpec]:
    # Edge 0 leaves the first drawn noun; it carries the negative link of a
    # balancing loop and directions alternate from "down" there.
    specs = []
    for i, source in enumerate(nouns):
        target = nouns[(i + 1) % len(nouns)]
        negative = i == 0 and sign is LoopPolarity.BALANCING
        specs.append(
            CausalSentenceSpec(
                source,
                target,
                Polarity.NEGATIVE if negative else Polarity.POSITIVE,
                Direction.DOWN if i % 2 == 0 else Direction.UP,
            )
        )
    return specs


def _map_from_sentences(specs: Iterable[CausalSentenceSpec]) -> CausalMap:
    return CausalMap.build((s.relationship for s in specs), allow_self_loops=False)


def _loop_nouns(length: int, vocab: GibberishVocabulary, seed: int, start: int | None) -> list[str]:
    if length < 2:
        raise InvalidLengthError(f"a feedback loop needs at least 2 variables, got {length}")
    if length > len(vocab):
        raise InvalidLengthError(f"loop length {length} exceeds vocabulary size {len(vocab)}")
    order = vocab.draw_order(seed)
    start = length if start is None else start
    return [order[(start + i) % len(order)] for i in range(length)]


def build_loop(
    length: int,
    loop_sign: LoopPolarity | str,
    vocab: GibberishVocabulary,
    seed: int = 0,
    *,
    start: int | None = None,
) -> CausalMap:
    """A single simple cycle of ``length`` distinct plural nouns.

    Reinforcing loops are all positive; balancing loops have exactly one
    negative link. ``start`` is the draw-order offset of the first noun and
    defaults to ``length``.
    """
    nouns = _loop_nouns(length, vocab, seed, start)
    return _map_from_sentences(_loop_sentences(nouns, LoopPolarity(loop_sign)))


@dataclass(frozen=True)
class GroundTruthCase:
    id: str
    group: TestGroup
    title: str
    description: str
    truth: CausalMap
    seed: int
    sentences: tuple[CausalSentenceSpec, ...] = field(default=(), compare=False, repr=False)

    suite = "causal"

    def to_fixture(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "group": self.group.value,
            "title": self.title,
            "description": self.description,
            "truth": self.truth.to_wire(),
            "seed": self.seed,
        }

    @classmethod
    def from_fixture(cls, doc: Mapping[str, Any]) -> GroundTruthCase:
        return cls(
            id=doc["id"],
            group=TestGroup(doc["group"]),
            title=doc["title"],
            description=doc["description"],
            truth=CausalMap.from_wire(doc["truth"], allow_self_loops=False),
            seed=doc["seed"],
            sentences=tuple(parse_description(doc["description"])),
        )


def _case(
    case_id: str, group: TestGroup, title: str, specs: Sequence[CausalSentenceSpec], seed: int
) -> GroundTruthCase:
    truth = _map_from_sentences(specs)
    directions = {s.relationship.key: s.direction for s in specs}
    return GroundTruthCase(
        id=case_id,
        group=group,
        title=title,
        description=assemble_description(truth, seed, directions),
        truth=truth,
        seed=seed,
        sentences=tuple(specs),
    )


def _sign_word(sign: LoopPolarity | Polarity) -> str:
    if sign in (LoopPolarity.REINFORCING, Polarity.POSITIVE):
        return "reinforcing"
    return "balancing"


def build_single_relationship_tests(
    vocab: GibberishVocabulary, seed: int = 0, *, first_index: int = 1
) -> list[GroundTruthCase]:
    order = vocab.draw_order(seed)
    cases = []
    for polarity in (Polarity.POSITIVE, Polarity.NEGATIVE):
        for direction in (Direction.UP, Direction.DOWN):
            spec = CausalSentenceSpec(order[0], order[1], polarity, direction)
            title = f"extract a {_sign_word(polarity)} relationship {direction.value}"
            cases.append(
                _case(
                    f"causal-{first_index + len(cases):02d}",
                    TestGroup.SINGLE_RELATIONSHIP,
                    title,
                    [spec],
                    seed,
                )
            )
    return cases


def build_single_loop_tests(
    vocab: GibberishVocabulary, seed: int = 0, *, first_index: int = 5
) -> list[GroundTruthCase]:
    cases = []
    for sign in (LoopPolarity.REINFORCING, LoopPolarity.BALANCING):
        for length in SINGLE_LOOP_LENGTHS:
            specs = _loop_sentences(_loop_nouns(length, vocab, seed, None), sign)
            title = f"extract a {sign.value} feedback loop with {length} variables"
            cases.append(
                _case(
                    f"causal-{first_index + len(cases):02d}",
                    TestGroup.SINGLE_LOOP,
                    title,
                    specs,
                    seed,
                )
            )
    return cases


def _chained_loop_sentences(
    order: Sequence[str], lengths: Sequence[int], signs: Sequence[str]
) -> list[CausalSentenceSpec]:
    specs: list[CausalSentenceSpec] = []
    offset = 0
    for length, sign in zip(lengths, signs):
        nouns = order[offset : offset + length]
        loop_sign = LoopPolarity.REINFORCING if sign == "+" else LoopPolarity.BALANCING
        specs.extend(_loop_sentences(nouns, loop_sign))
        offset += length - 1
    return specs


def build_multi_loop_tests(
    vocab: GibberishVocabulary, seed: int = 0, *, first_index: int = 19
) -> list[GroundTruthCase]:
    order = vocab.draw_order(seed)
    cases = []
    for lengths, signs in MULTI_LOOP_LAYOUTS:
        if sum(lengths) - len(lengths) + 1 > len(order):
            raise InvalidLengthError("vocabulary too small for the multi-loop layout")
        specs = _chained_loop_sentences(order, lengths, signs)
        title = f"extract {len(lengths)} feedback loops with [{', '.join(signs)}] polarities"
        cases.append(
            _case(
                f"causal-{first_index + len(cases):02d}",
                TestGroup.MULTIPLE_LOOPS,
                title,
                specs,
                seed,
            )
        )
    return cases


@dataclass(frozen=True)
class ConformanceConstraint:
    required_variables: tuple[str, ...] = ()
    min_variables: int | None = None
    max_variables: int | None = None
    min_loops: int | None = None
    max_loops: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "required_variables", tuple(self.required_variables))
        bounds = (self.min_variables, self.max_variables, self.min_loops, self.max_loops)
        if not self.required_variables and all(b is None for b in bounds):
            raise ValueError("a conformance constraint needs at least one requirement")
        if any(b is not None and b < 0 for b in bounds):
            raise ValueError("bounds must be non-negative")
        for low, high, what in (
            (self.min_variables, self.max_variables, "variables"),
            (self.min_loops, self.max_loops, "loops"),
        ):
            if low is not None and high is not None and low > high:
                raise ValueError(f"min {what} {low} exceeds max {what} {high}")

    def _count_clauses(self) -> list[str]:
        clauses = []
        for low, high, noun in (
            (self.min_loops, self.max_loops, "feedback loops"),
            (self.min_variables, self.max_variables, "variables"),
        ):
            if low is not None:
                clauses.append(f"at least {low} {noun}")
            if high is not None:
                clauses.append(f"no more than {high} {noun}")
        return clauses

    def render_instruction(self) -> str:
        sentences = []
        if self.required_variables:
            quoted = [f'"{v}"' for v in self.required_variables]
            listed = quoted[0] if len(quoted) == 1 else ", ".join(quoted[:-1]) + " and " + quoted[-1]
            sentences.append(f"Your response must include the variables {listed}")
        clauses = self._count_clauses()
        if clauses:
            sentences.append(f"Your response must include {' and '.join(clauses)}.")
        return ". ".join(sentences) if len(sentences) > 1 else sentences[0]

    def describe(self) -> str:
        parts = []
        for low, high, noun in (
            (self.min_loops, self.max_loops, "feedback loops"),
            (self.min_variables, self.max_variables, "variables"),
        ):
            if low is not None:
                parts.append(f"a minimum number of {noun}")
            if high is not None:
                parts.append(f"a maximum number of {noun}")
        if self.required_variables:
            parts.insert(0, "the requested variables")
        return "can conform to the instruction include " + " and ".join(parts)

    def to_wire(self) -> dict[str, Any]:
        return {
            "required_variables": list(self.required_variables),
            "min_variables": self.min_variables,
            "max_variables": self.max_variables,
            "min_loops": self.min_loops,
            "max_loops": self.max_loops,
        }

    @classmethod
    def from_wire(cls, doc: Mapping[str, Any]) -> ConformanceConstraint:
        return cls(
            required_variables=tuple(doc.get("required_variables") or ()),
            min_variables=doc.get("min_variables"),
            max_variables=doc.get("max_variables"),
            min_loops=doc.get("min_loops"),
            max_loops=doc.get("max_loops"),
        )


# case_name -> (base prompt, required variables, display name)
CONFORMANCE_BASES: dict[str, tuple[str, tuple[str, ...], str]] = {
    "american_revolution": (
        "create a feedback-based explanation for the American revolutionary war",
        ("Taxation", "Anti-British Sentiment", "Colonial Identity"),
        "American Revolution",
    ),
    "road_rage": (
        "create a feedback-based explanation for road rage",
        ("Traffic Congestion", "Driver Stress", "Accidents"),
        "Road Rage",
    ),
}

_COUNT_CONSTRAINTS: tuple[dict[str, int], ...] = (
    {"min_variables": 10},
    {"max_variables": 5},
    {"min_loops": 8},
    {"max_loops": 4},
    {"min_loops": 6, "min_variables": 8},
    {"min_loops": 6, "max_variables": 15},
    {"max_loops": 4, "max_variables": 5},
    {"max_loops": 4, "min_variables": 5},
)


@dataclass(frozen=True)
class ConformanceCase:
    id: str
    case_name: str
    base_prompt: str
    instruction: str
    constraint: ConformanceConstraint
    seed: int = 0

    suite = "conformance"
    group = "conformance"

    @property
    def prompt(self) -> str:
        return f"{self.base_prompt}. {self.instruction}"

    @property
    def display_name(self) -> str:
        return CONFORMANCE_BASES.get(self.case_name, ("", (), self.case_name))[2]

    @property
    def title(self) -> str:
        return f"{self.constraint.describe()} for the case {self.display_name}"

    def to_fixture(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "group": self.group,
            "case_name": self.case_name,
            "title": self.title,
            "prompt": self.prompt,
            "base_prompt": self.base_prompt,
            "instruction": self.instruction,
            "constraint": self.constraint.to_wire(),
            "seed": self.seed,
        }

    @classmethod
    def from_fixture(cls, doc: Mapping[str, Any]) -> ConformanceCase:
        return cls(
            id=doc["id"],
            case_name=doc["case_name"],
            base_prompt=doc["base_prompt"],
            instruction=doc["instruction"],
            constraint=ConformanceConstraint.from_wire(doc["constraint"]),
            seed=doc.get("seed", 0),
        )


def build_conformance_tests(seed: int = 0) -> list[ConformanceCase]:
    cases = []
    for case_name, (base, required, _) in CONFORMANCE_BASES.items():
        constraints = [ConformanceConstraint(required_variables=required)]
        constraints += [ConformanceConstraint(**bounds) for bounds in _COUNT_CONSTRAINTS]
        for constraint in constraints:
            cases.append(
                ConformanceCase(
                    id=f"conformance-{len(cases) + 1:02d}",
                    case_name=case_name,
                    base_prompt=base,
                    instruction=constraint.render_instruction(),
                    constraint=constraint,
                    seed=seed,
                )
            )
    return cases


def canonical_suites(
    seed: int = 0, vocab: GibberishVocabulary | None = None
) -> tuple[list[GroundTruthCase], list[ConformanceCase]]:
    vocab = vocab or GibberishVocabulary.default()
    causal = (
        build_single_relationship_tests(vocab, seed, first_index=1)
        + build_single_loop_tests(vocab, seed, first_index=5)
        + build_multi_loop_tests(vocab, seed, first_index=19)
    )
    return causal, build_conformance_tests(seed)
