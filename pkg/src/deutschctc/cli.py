"""Command-line driver: ``deutschctc run|validate|list-protocols``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import CTCError
from .runner import (
    PROTOCOL_HELP,
    ScenarioError,
    ScenarioValidationError,
    emit_csv,
    format_summary,
    parse_scenario,
    run_scenario,
    scenario_from_dict,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def _load(path: str, overrides: dict | None = None):
    text = Path(path).read_text(encoding="utf-8")
    scenario = parse_scenario(text)
    if overrides:
        doc = scenario.to_dict()
        doc.update({k: v for k, v in overrides.items() if v is not None})
        scenario = scenario_from_dict(doc)
    return scenario


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="deutschctc", description="Deutsch-model CTC protocol simulator"
    )
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario")
    run.add_argument("--csv", help="write the sweep table to this path")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--tol", type=float)

    val = sub.add_parser("validate", help="parse and validate a scenario file")
    val.add_argument("scenario")

    sub.add_parser("list-protocols", help="list the available protocols")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)

    if args.command == "list-protocols":
        for name, text in PROTOCOL_HELP.items():
            print(f"{name:<20} {text}")
        return EXIT_OK

    try:
        if args.command == "validate":
            s = _load(args.scenario)
            print(f"ok: {s.protocol} ({len(s.state_specs)} state specs)")
            return EXIT_OK
        s = _load(args.scenario, {"seed": args.seed, "trials": args.trials, "tol": args.tol})
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        report = run_scenario(s)
    except ScenarioValidationError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CTCError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(format_summary(report))
    if args.csv:
        Path(args.csv).write_text(emit_csv(report), encoding="utf-8", newline="\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
