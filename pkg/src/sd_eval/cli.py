"""Command-line entry point: ``sd-eval run | suites export | fixtures verify | serve``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from .engines import ProviderConfig
from .errors import ConfigurationError
from .harness import FORMATS, SUITES, RunConfig, export_suites, render_report, run_suite, verify_fixtures

EXIT_OK = 0
EXIT_ERRORED = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sd-eval", description="Benchmark causal-map generation engines.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the benchmark suites against an engine")
    run.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    run.add_argument("--engine", default="default")
    run.add_argument("--model", help="provider model id")
    run.add_argument("--base-url", help="OpenAI-compatible API base URL")
    run.add_argument("--api-key-env", help="name of the environment variable holding the API key")
    run.add_argument("--reasoning-effort", choices=("low", "medium", "high"))
    run.add_argument("--timeout", type=float, help="provider request timeout in seconds")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--concurrency", type=int, default=1)
    run.add_argument("--replay", type=Path, help="answer provider calls from this transcript directory")
    run.add_argument("--record", type=Path, help="write provider transcripts to this directory")
    run.add_argument("--out", type=Path, help="write the report here instead of stdout")
    run.add_argument("--format", choices=FORMATS, default="markdown")
    run.add_argument("--label", help="model label shown in the report")

    suites = sub.add_parser("suites", help="work with the canonical suites")
    suites_sub = suites.add_subparsers(dest="suites_command", required=True)
    export = suites_sub.add_parser("export", help="write the canonical suites as JSON fixtures")
    export.add_argument("--out", type=Path, required=True)
    export.add_argument("--seed", type=int, default=0)

    fixtures = sub.add_parser("fixtures", help="work with the recorded failure-log fixtures")
    fixtures_sub = fixtures.add_subparsers(dest="fixtures_command", required=True)
    verify = fixtures_sub.add_parser("verify", help="replay the fixtures through the scorer")
    verify.add_argument("--path", type=Path, help="fixture file (defaults to the shipped one)")

    serve = sub.add_parser("serve", help="start the HTTP engine service")
    serve.add_argument("--addr", help="HOST:PORT (default $SD_EVAL_ADDR or 127.0.0.1:8080)")
    return parser


def _provider(args: argparse.Namespace) -> ProviderConfig:
    overrides = {
        "model": args.model,
        "base_url": args.base_url,
        "api_key_env": args.api_key_env,
        "reasoning_effort": args.reasoning_effort,
        "timeout": args.timeout,
    }
    return ProviderConfig(**{k: v for k, v in overrides.items() if v is not None})


def _run(args: argparse.Namespace) -> int:
    config = RunConfig(
        suites=SUITES if args.suite == "all" else (args.suite,),
        engine=args.engine,
        provider=_provider(args),
        seed=args.seed,
        concurrency=args.concurrency,
        replay_dir=args.replay,
        record_dir=args.record,
        output=args.out,
        format=args.format,
        model_label=args.label,
    )
    report = run_suite(config)
    document = render_report(report, config.format)
    if config.output is None:
        sys.stdout.write(document)
    else:
        config.output.parent.mkdir(parents=True, exist_ok=True)
        config.output.write_text(document, "utf-8")
    for outcome in report.errored:
        print(f"errored: {outcome.test_id}: {outcome.error}", file=sys.stderr)
    return EXIT_ERRORED if report.errored else EXIT_OK


def _verify(args: argparse.Namespace) -> int:
    results = verify_fixtures(args.path)
    for r in results:
        status = "ok  " if r.ok else "FAIL"
        print(f"{status} item {r.item}: {r.actual_category} (expected {r.expected_category}) {r.detail}".rstrip())
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} fixtures reproduced")
    return EXIT_OK if not failed else EXIT_ERRORED


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "suites":
            print(export_suites(args.out, args.seed))
            return EXIT_OK
        if args.command == "fixtures":
            return _verify(args)
        from .service import serve

        serve(args.addr)
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
