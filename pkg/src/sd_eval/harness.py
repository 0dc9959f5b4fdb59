"""Run the benchmark suites against an engine and render the results."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Union

from .engines import EngineRegistry, GenerateRequest, LLMEngine, ProviderClient, ProviderConfig, default_registry
from .engines.prompts import default_prompt_texts
from .errors import ConfigurationError, ContractViolation, EngineNotFoundError
from .evaluation import (
    CausalFailureKind,
    ConformanceFailureKind,
    EvalOutcome,
    ScoreCard,
    aggregate,
    score_causal_translation,
    score_conformance,
)
from .graph import CausalMap
from .synthesis import (
    CONFORMANCE_BASES,
    ConformanceCase,
    ConformanceConstraint,
    GroundTruthCase,
    TestGroup,
    canonical_suites,
)

SUITES = ("causal", "conformance")
FORMATS = ("json", "csv", "markdown")
SUITE_DISPLAY = {"causal": "causal translation testing", "conformance": "conformance testing"}

CAUSAL_COLUMNS = (
    CausalFailureKind.FAKE_RELATIONSHIP,
    CausalFailureKind.MISSING_RELATIONSHIP,
    CausalFailureKind.MULTIPLE,
    CausalFailureKind.POLARITY,
)
CONFORMANCE_COLUMNS = (
    ConformanceFailureKind.MULTIPLE,
    ConformanceFailureKind.TOO_FEW_LOOPS,
    ConformanceFailureKind.TOO_FEW_VARIABLES,
    ConformanceFailureKind.TOO_MANY_LOOPS,
    ConformanceFailureKind.TOO_MANY_VARIABLES,
    ConformanceFailureKind.MISSING_REQUIRED_VARIABLE,
)

Case = Union[GroundTruthCase, ConformanceCase]


@dataclass(frozen=True)
class RunConfig:
    suites: tuple[str, ...] = SUITES
    engine: str = "default"
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    seed: int = 0
    concurrency: int = 1
    replay_dir: Path | None = None
    record_dir: Path | None = None
    output: Path | None = None
    format: str = "markdown"
    parameters: dict[str, Any] = field(default_factory=dict)
    model_label: str | None = None

    def __post_init__(self) -> None:
        if not self.suites:
            raise ConfigurationError("at least one suite must be selected")
        unknown = set(self.suites) - set(SUITES)
        if unknown:
            raise ConfigurationError(f"unknown suite(s) {sorted(unknown)}; choose from {SUITES}")
        if self.concurrency < 1:
            raise ConfigurationError("concurrency must be >= 1")
        if self.format not in FORMATS:
            raise ConfigurationError(f"format must be one of {FORMATS}")

    def snapshot(self) -> dict[str, Any]:
        return {
            "suites": list(self.suites),
            "engine": self.engine,
            "provider": self.provider.snapshot(),
            "seed": self.seed,
            "concurrency": self.concurrency,
            "replay_dir": str(self.replay_dir) if self.replay_dir else None,
            "parameters": dict(self.parameters),
        }


@dataclass(frozen=True)
class CaseInfo:
    test_id: str
    suite: str
    group: str
    title: str


@dataclass(frozen=True)
class RunReport:
    model: str
    config: dict[str, Any]
    cases: tuple[CaseInfo, ...]
    outcomes: tuple[EvalOutcome, ...]
    scorecard: ScoreCard
    generated_at: str = ""
    wall_clock: float = 0.0
    latencies: dict[str, float] = field(default_factory=dict, compare=False)

    @property
    def errored(self) -> tuple[EvalOutcome, ...]:
        return tuple(o for o in self.outcomes if o.errored)

    @property
    def failures(self) -> list[tuple[CaseInfo, EvalOutcome]]:
        info = {c.test_id: c for c in self.cases}
        return [(info[o.test_id], o) for o in self.outcomes if not o.passed and not o.errored]

    def timing(self) -> dict[str, Any]:
        return {
            "generated_at": self.generated_at,
            "wall_clock_seconds": round(self.wall_clock, 3),
            "latency_seconds": {k: round(v, 3) for k, v in sorted(self.latencies.items())},
        }


def case_info(case: Case) -> CaseInfo:
    if isinstance(case, GroundTruthCase):
        return CaseInfo(case.id, "causal", case.group.display, case.title)
    return CaseInfo(
        case.id, "conformance", case.constraint.describe(), f"for the case {case.display_name}"
    )


def build_request(case: Case, parameters: dict[str, Any] | None = None) -> GenerateRequest:
    params = dict(parameters or {})
    if isinstance(case, GroundTruthCase):
        return GenerateRequest(
            prompt=default_prompt_texts()["causal_task_prompt"],
            background_knowledge=case.description,
            parameters=params,
        )
    return GenerateRequest(prompt=case.prompt, parameters=params)


def select_cases(suites: tuple[str, ...], seed: int) -> list[Case]:
    causal, conformance = canonical_suites(seed)
    cases: list[Case] = []
    if "causal" in suites:
        cases += causal
    if "conformance" in suites:
        cases += conformance
    return cases


def score(candidate: CausalMap, case: Case) -> EvalOutcome:
    if isinstance(case, GroundTruthCase):
        return score_causal_translation(candidate, case)
    return score_conformance(candidate, case)


def run_suite(config: RunConfig, registry: EngineRegistry | None = None) -> RunReport:
    """Run every selected test once; engine failures mark a test errored and the run goes on."""
    if registry is None:
        registry = default_registry(
            config.provider, replay_dir=config.replay_dir, record_dir=config.record_dir
        )
    try:
        engine = registry.get(config.engine)
    except EngineNotFoundError as exc:
        raise ConfigurationError(str(exc)) from None
    if isinstance(engine, LLMEngine) and engine.client_options.get("replay_dir") is None:
        ProviderClient(engine.provider).api_key()
    engine.resolve_parameters(config.parameters)

    cases = select_cases(config.suites, config.seed)

    def attempt(case: Case) -> tuple[EvalOutcome, float]:
        started = time.perf_counter()
        try:
            response = engine.generate(build_request(case, config.parameters))
            outcome = score(response.map, case)
        except ContractViolation:
            raise
        except Exception as exc:  # any engine failure is recorded, not fatal
            outcome = EvalOutcome.errored_for(case.id, case.suite, f"{type(exc).__name__}: {exc}")
        return outcome, time.perf_counter() - started

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        results = list(pool.map(attempt, cases))
    wall = time.perf_counter() - started

    outcomes = tuple(outcome for outcome, _ in results)
    if config.model_label:
        label = config.model_label
    elif isinstance(engine, LLMEngine):
        label = engine.configure(engine.resolve_parameters(config.parameters))[0].label
    else:
        label = engine.name
    return RunReport(
        model=label,
        config=config.snapshot(),
        cases=tuple(case_info(c) for c in cases),
        outcomes=outcomes,
        scorecard=aggregate(outcomes),
        generated_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        wall_clock=wall,
        latencies={case.id: latency for case, (_, latency) in zip(cases, results)},
    )


def _percent(value: str) -> str:
    return value if value == "-" else f"{value}%"


def report_tables(report: RunReport) -> dict[str, Any]:
    """The numbers every rendering shares."""
    card = report.scorecard
    table2 = {k.display: card.causal_categories.get(k.value, 0) for k in CAUSAL_COLUMNS}
    table2["Grand Total"] = sum(table2.values())
    table3 = {k.display: card.conformance_categories.get(k.value, 0) for k in CONFORMANCE_COLUMNS}
    table3["Grand Total"] = sum(table3.values())
    return {
        "table1": {
            "Causal Translation": _percent(card.causal),
            "Conformance": _percent(card.conformance),
            "Overall": _percent(card.overall),
        },
        "table2": table2,
        "table3": table3,
    }


def failure_log(report: RunReport) -> list[dict[str, Any]]:
    return [
        {
            "n": n,
            "test_id": info.test_id,
            "header": f"{n}) {report.model} | {SUITE_DISPLAY[info.suite]} | {info.group} | {info.title}",
            "category": outcome.category.value,
            "messages": outcome.messages,
        }
        for n, (info, outcome) in enumerate(report.failures, start=1)
    ]


def render_report(report: RunReport, format: str = "markdown") -> str:
    if format == "json":
        return _render_json(report)
    if format == "csv":
        return _render_csv(report)
    if format == "markdown":
        return _render_markdown(report)
    raise ConfigurationError(f"format must be one of {FORMATS}")


def _render_json(report: RunReport) -> str:
    doc = {
        "timing": report.timing(),
        "model": report.model,
        "config": report.config,
        "scorecard": report.scorecard.to_wire(),
        **report_tables(report),
        "errored": [{"test_id": o.test_id, "error": o.error} for o in report.errored],
        "outcomes": [o.to_wire() for o in report.outcomes],
        "failure_log": failure_log(report),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _render_csv(report: RunReport) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["section", "model", "column", "value"])
    out.writerow(["timing", report.model, "header", json.dumps(report.timing(), sort_keys=True)])
    for section, row in report_tables(report).items():
        for column, value in row.items():
            out.writerow([section, report.model, column, value])
    for o in report.errored:
        out.writerow(["errored", report.model, o.test_id, o.error])
    for entry in failure_log(report):
        for message in entry["messages"]:
            out.writerow(["failure", report.model, entry["header"], message])
    return buf.getvalue()


def _table(header: list[str], row: list[Any]) -> list[str]:
    return [
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
        "| " + " | ".join(str(v) for v in row) + " |",
    ]


def _render_markdown(report: RunReport) -> str:
    tables = report_tables(report)
    card = report.scorecard
    lines = [f"<!-- timing: {json.dumps(report.timing(), sort_keys=True)} -->"]
    lines += [f"# Benchmark report: {report.model}", ""]
    lines += ["## Overall results", ""]
    lines += _table(["LLM", *tables["table1"]], [report.model, *tables["table1"].values()])
    lines += ["", f"## Causal translation failures (out of {card.causal_total} tests)", ""]
    lines += _table(["LLM", *tables["table2"]], [report.model, *tables["table2"].values()])
    lines += ["", f"## Conformance failures (out of {card.conformance_total} tests)", ""]
    lines += _table(["LLM", *tables["table3"]], [report.model, *tables["table3"].values()])
    lines += ["", "## Errored tests", ""]
    if report.errored:
        lines += [f"- {o.test_id}: {o.error}" for o in report.errored]
    else:
        lines.append("None.")
    lines += ["", "## Failure log", ""]
    log = failure_log(report)
    if not log:
        lines.append("No failures.")
    for entry in log:
        lines.append(entry["header"])
        for message in entry["messages"]:
            lines += ["", "Message:", "", message]
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


@dataclass(frozen=True)
class AppendixFixture:
    item: int
    model: str
    suite: str
    group: str
    title: str
    candidate: CausalMap
    expected_category: str
    expected_messages: tuple[str, ...]
    case: Case

    @classmethod
    def from_wire(cls, doc: dict[str, Any]) -> AppendixFixture:
        test_id = f"appendix-{doc['item']}"
        case: Case
        if doc["suite"] == "causal":
            case = GroundTruthCase(
                id=test_id,
                group=TestGroup.SINGLE_RELATIONSHIP,
                title=doc["title"],
                description="",
                truth=CausalMap.from_wire(doc["truth"]),
                seed=0,
            )
        else:
            constraint = ConformanceConstraint.from_wire(doc["constraint"])
            case = ConformanceCase(
                id=test_id,
                case_name=doc["case_name"],
                base_prompt=CONFORMANCE_BASES[doc["case_name"]][0],
                instruction=constraint.render_instruction(),
                constraint=constraint,
            )
        return cls(
            item=doc["item"],
            model=doc["model"],
            suite=doc["suite"],
            group=doc["group"],
            title=doc["title"],
            candidate=CausalMap.from_wire(doc["candidate"]),
            expected_category=doc["expected_category"],
            expected_messages=tuple(doc["expected_messages"]),
            case=case,
        )


@dataclass(frozen=True)
class FixtureResult:
    item: int
    ok: bool
    expected_category: str
    actual_category: str | None
    detail: str = ""


def load_fixtures(path: str | Path | None = None) -> list[AppendixFixture]:
    if path is None:
        text = resources.files("sd_eval").joinpath("data/appendix_fixtures.json").read_text("utf-8")
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"fixture file {path} does not exist")
        text = path.read_text("utf-8")
    return [AppendixFixture.from_wire(doc) for doc in json.loads(text)["fixtures"]]


def verify_fixtures(path: str | Path | None = None) -> list[FixtureResult]:
    """Score every shipped failure-log fixture and compare category and messages exactly."""
    results = []
    for fx in load_fixtures(path):
        outcome = score(fx.candidate, fx.case)
        actual = outcome.category.value if outcome.category is not None else None
        problems = []
        if actual != fx.expected_category:
            problems.append(f"category {actual!r} != {fx.expected_category!r}")
        if tuple(outcome.messages) != fx.expected_messages:
            problems.append(f"messages differ: {outcome.messages!r}")
        results.append(FixtureResult(fx.item, not problems, fx.expected_category, actual, "; ".join(problems)))
    return results


def export_suites(path: str | Path, seed: int = 0) -> Path:
    """Write the canonical suites as one JSON array of case fixtures."""
    causal, conformance = canonical_suites(seed)
    docs = [c.to_fixture() for c in causal] + [c.to_fixture() for c in conformance]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(docs, indent=2, ensure_ascii=False) + "\n", "utf-8")
    return path


def load_suites(path: str | Path) -> list[Case]:
    docs = json.loads(Path(path).read_text("utf-8"))
    return [
        ConformanceCase.from_fixture(d) if d["group"] == "conformance" else GroundTruthCase.from_fixture(d)
        for d in docs
    ]
