"""Scoring, failure classification and scorecard aggregation."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Any, Union

from .errors import ContractViolation
from .graph import (
    DEFAULT_LOOP_CAP,
    CausalMap,
    Polarity,
    diff_maps,
    enumerate_loops,
    normalize_name,
)
from .synthesis import ConformanceCase, GroundTruthCase

__all__ = [
    "CausalFailureKind",
    "ConformanceFailureKind",
    "CountFinding",
    "EvalOutcome",
    "Finding",
    "PolarityFinding",
    "RelationshipSetFinding",
    "RequiredVariablesFinding",
    "ScoreCard",
    "aggregate",
    "classify_causal",
    "classify_conformance",
    "format_percent",
    "score_causal_translation",
    "score_conformance",
]


class CausalFailureKind(str, Enum):
    FAKE_RELATIONSHIP = "fake_relationship"
    MISSING_RELATIONSHIP = "missing_relationship"
    POLARITY = "polarity"
    MULTIPLE = "multiple"

    @property
    def display(self) -> str:
        return _DISPLAY[self]


class ConformanceFailureKind(str, Enum):
    TOO_FEW_VARIABLES = "too_few_variables"
    TOO_MANY_VARIABLES = "too_many_variables"
    TOO_FEW_LOOPS = "too_few_loops"
    TOO_MANY_LOOPS = "too_many_loops"
    MISSING_REQUIRED_VARIABLE = "missing_required_variable"
    MULTIPLE = "multiple"

    @property
    def display(self) -> str:
        return _DISPLAY[self]


_DISPLAY: dict[Enum, str] = {
    CausalFailureKind.FAKE_RELATIONSHIP: "Fake relationship",
    CausalFailureKind.MISSING_RELATIONSHIP: "Missing relationship",
    CausalFailureKind.MULTIPLE: "Multiple Kinds of Failures",
    CausalFailureKind.POLARITY: "Polarity",
    ConformanceFailureKind.MULTIPLE: "Multiple Kinds of Failures",
    ConformanceFailureKind.MISSING_REQUIRED_VARIABLE: "Missing required variables",
    ConformanceFailureKind.TOO_FEW_LOOPS: "Too few feedback loops",
    ConformanceFailureKind.TOO_FEW_VARIABLES: "Too few variables",
    ConformanceFailureKind.TOO_MANY_LOOPS: "Too many feedback loops",
    ConformanceFailureKind.TOO_MANY_VARIABLES: "Too many variables",
}

@dataclass(frozen=True)
class RelationshipSetFinding:
    """All fake (or all missing) relationships of one test, as rendered lines."""

    kind: CausalFailureKind
    offenders: tuple[str, ...]
    truth: tuple[str, ...]

    def message(self) -> str:
        heading = (
            "Fake relationships found"
            if self.kind is CausalFailureKind.FAKE_RELATIONSHIP
            else "Real relationships not found"
        )
        return (
            f"{heading}\n{', '.join(sorted(self.offenders))}\nGround Truth\n"
            f"{', '.join(sorted(self.truth))}: Expected {len(self.offenders)} to be 0."
        )


@dataclass(frozen=True)
class PolarityFinding:
    source: str
    target: str
    expected: Polarity
    actual: Polarity
    kind: CausalFailureKind = field(default=CausalFailureKind.POLARITY, init=False)

    def message(self) -> str:
        return (
            "Incorrect polarity discovered: "
            f"Expected '{self.actual.value}' to be '{self.expected.value}'."
        )


@dataclass(frozen=True)
class CountFinding:
    kind: ConformanceFailureKind
    observed: int
    bound: int
    variables: tuple[str, ...] = ()

    def message(self) -> str:
        n, bound = self.observed, self.bound
        if self.kind is ConformanceFailureKind.TOO_FEW_LOOPS:
            return (
                f"Too few feedback loops: The number of feedback loops found was {n}: "
                f"Expected {n} to be greater than or equal {bound}."
            )
        if self.kind is ConformanceFailureKind.TOO_MANY_LOOPS:
            return (
                f"Too many feedback loops: The number of feedback loops found was {n}: "
                f"Expected {n} to be less than or equal {bound}."
            )
        listed = ", ".join(self.variables)
        if self.kind is ConformanceFailureKind.TOO_FEW_VARIABLES:
            return (
                f"Too few variables: Variables are: {listed}: "
                f"Expected {n} to be greater than or equal {bound}."
            )
        return (
            f"Too many variables: Variables are: {listed}: "
            f"Expected {n} to be less than or equal {bound}."
        )


@dataclass(frozen=True)
class RequiredVariablesFinding:
    missing: tuple[str, ...]
    variables: tuple[str, ...]
    kind: ConformanceFailureKind = field(
        default=ConformanceFailureKind.MISSING_REQUIRED_VARIABLE, init=False
    )

    def message(self) -> str:
        wanted = ", ".join(f'"{v}"' for v in self.missing)
        return (
            f"Missing required variables: {wanted}: Variables are: {', '.join(self.variables)}: "
            f"Expected {len(self.missing)} to be 0."
        )


Finding = Union[RelationshipSetFinding, PolarityFinding, CountFinding, RequiredVariablesFinding]
FailureKind = Union[CausalFailureKind, ConformanceFailureKind]


@dataclass(frozen=True)
class EvalOutcome:
    """Result of one test. ``error`` marks an errored test, which is neither pass nor fail."""

    test_id: str
    suite: str
    passed: bool
    findings: tuple[Finding, ...] = ()
    category: FailureKind | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if self.error is not None:
            if self.passed or self.findings or self.category is not None:
                raise ContractViolation("an errored outcome carries no verdict")
        elif self.passed != (not self.findings) or self.passed != (self.category is None):
            raise ContractViolation("pass, empty findings and absent category must agree")

    @property
    def errored(self) -> bool:
        return self.error is not None

    @property
    def messages(self) -> list[str]:
        return [f.message() for f in self.findings]

    @classmethod
    def errored_for(cls, test_id: str, suite: str, error: str) -> EvalOutcome:
        return cls(test_id, suite, passed=False, error=error)

    def to_wire(self) -> dict[str, Any]:
        return {
            "test_id": self.test_id,
            "suite": self.suite,
            "passed": self.passed,
            "category": self.category.value if self.category is not None else None,
            "messages": self.messages,
            "error": self.error,
        }


def classify_causal(findings: Sequence[Finding]) -> CausalFailureKind:
    if not findings:
        raise ContractViolation("classify_causal called on a passing outcome")
    kinds = {f.kind for f in findings}
    if len(kinds) > 1:
        return CausalFailureKind.MULTIPLE
    kind = kinds.pop()
    if not isinstance(kind, CausalFailureKind):
        raise ContractViolation(f"{kind!r} is not a causal-translation finding")
    return kind


def classify_conformance(findings: Sequence[Finding]) -> ConformanceFailureKind:
    if not findings:
        raise ContractViolation("classify_conformance called on a passing outcome")
    kinds = {f.kind for f in findings}
    if not all(isinstance(k, ConformanceFailureKind) for k in kinds):
        raise ContractViolation("classify_conformance got a causal-translation finding")
    if len(kinds) == 1:
        return kinds.pop()
    return ConformanceFailureKind.MULTIPLE


def score_causal_translation(candidate: CausalMap, case: GroundTruthCase) -> EvalOutcome:
    truth = case.truth
    diff = diff_maps(candidate, truth)
    truth_lines = tuple(truth.render(r) for r in truth.relationships)
    findings: list[Finding] = []
    if diff.fake:
        findings.append(
            RelationshipSetFinding(
                CausalFailureKind.FAKE_RELATIONSHIP,
                tuple(candidate.render(r) for r in diff.fake),
                truth_lines,
            )
        )
    if diff.missing:
        findings.append(
            RelationshipSetFinding(
                CausalFailureKind.MISSING_RELATIONSHIP,
                tuple(truth.render(r) for r in diff.missing),
                truth_lines,
            )
        )
    for m in sorted(diff.polarity_mismatches, key=lambda m: (m.source, m.target)):
        findings.append(PolarityFinding(m.source, m.target, m.expected, m.actual))
    category = classify_causal(findings) if findings else None
    return EvalOutcome(case.id, "causal", not findings, tuple(findings), category)


def score_conformance(
    candidate: CausalMap, case: ConformanceCase, loop_cap: int = DEFAULT_LOOP_CAP
) -> EvalOutcome:
    """Check required variables, then variable count, then loop count.

    :class:`~sd_eval.errors.LoopExplosionError` propagates; callers record
    the test as errored.
    """
    c = case.constraint
    labels = tuple(candidate.label(v) for v in candidate.variables)
    findings: list[Finding] = []

    present = set(candidate.variables)
    missing = tuple(v for v in c.required_variables if normalize_name(v) not in present)
    if missing:
        findings.append(RequiredVariablesFinding(missing, labels))

    n_vars = len(candidate.variables)
    if c.min_variables is not None and n_vars < c.min_variables:
        findings.append(
            CountFinding(ConformanceFailureKind.TOO_FEW_VARIABLES, n_vars, c.min_variables, labels)
        )
    if c.max_variables is not None and n_vars > c.max_variables:
        findings.append(
            CountFinding(ConformanceFailureKind.TOO_MANY_VARIABLES, n_vars, c.max_variables, labels)
        )

    if c.min_loops is not None or c.max_loops is not None:
        n_loops = len(enumerate_loops(candidate, cap=loop_cap))
        if c.min_loops is not None and n_loops < c.min_loops:
            findings.append(CountFinding(ConformanceFailureKind.TOO_FEW_LOOPS, n_loops, c.min_loops))
        if c.max_loops is not None and n_loops > c.max_loops:
            findings.append(
                CountFinding(ConformanceFailureKind.TOO_MANY_LOOPS, n_loops, c.max_loops)
            )

    category = classify_conformance(findings) if findings else None
    return EvalOutcome(case.id, "conformance", not findings, tuple(findings), category)


def format_percent(passed: int, total: int) -> str:
    """Percentage to one decimal, rounding half up; ``"-"`` for an empty suite."""
    if total == 0:
        return "-"
    value = Decimal(100 * passed) / Decimal(total)
    return str(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ScoreCard:
    causal_passed: int = 0
    causal_total: int = 0
    conformance_passed: int = 0
    conformance_total: int = 0
    causal_errored: int = 0
    conformance_errored: int = 0
    causal_categories: dict[str, int] = field(default_factory=dict, compare=False)
    conformance_categories: dict[str, int] = field(default_factory=dict, compare=False)

    @property
    def causal(self) -> str:
        return format_percent(self.causal_passed, self.causal_total)

    @property
    def conformance(self) -> str:
        return format_percent(self.conformance_passed, self.conformance_total)

    @property
    def overall(self) -> str:
        return format_percent(
            self.causal_passed + self.conformance_passed,
            self.causal_total + self.conformance_total,
        )

    @property
    def causal_failed(self) -> int:
        return self.causal_total - self.causal_passed

    @property
    def conformance_failed(self) -> int:
        return self.conformance_total - self.conformance_passed

    def to_wire(self) -> dict[str, Any]:
        return {
            "causal": {
                "passed": self.causal_passed,
                "total": self.causal_total,
                "errored": self.causal_errored,
                "percent": self.causal,
                "categories": dict(self.causal_categories),
            },
            "conformance": {
                "passed": self.conformance_passed,
                "total": self.conformance_total,
                "errored": self.conformance_errored,
                "percent": self.conformance,
                "categories": dict(self.conformance_categories),
            },
            "overall": {
                "passed": self.causal_passed + self.conformance_passed,
                "total": self.causal_total + self.conformance_total,
                "percent": self.overall,
            },
        }


def aggregate(outcomes: Iterable[EvalOutcome]) -> ScoreCard:
    """Fold outcomes into pass counts and Table-2/3 category tallies.

    Errored outcomes are counted separately and kept out of the totals.
    """
    passed: Counter[str] = Counter()
    total: Counter[str] = Counter()
    errored: Counter[str] = Counter()
    categories: dict[str, Counter[str]] = {"causal": Counter(), "conformance": Counter()}
    for outcome in outcomes:
        if outcome.suite not in categories:
            raise ContractViolation(f"unknown suite {outcome.suite!r}")
        if outcome.errored:
            errored[outcome.suite] += 1
            continue
        total[outcome.suite] += 1
        if outcome.passed:
            passed[outcome.suite] += 1
        else:
            categories[outcome.suite][outcome.category.value] += 1
    return ScoreCard(
        causal_passed=passed["causal"],
        causal_total=total["causal"],
        conformance_passed=passed["conformance"],
        conformance_total=total["conformance"],
        causal_errored=errored["causal"],
        conformance_errored=errored["conformance"],
        causal_categories=dict(categories["causal"]),
        conformance_categories=dict(categories["conformance"]),
    )
