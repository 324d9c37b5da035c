"""Command line: ``rvv run``, ``rvv sweep`` and ``rvv list``.

Exit status is 0 when the result matches the scenario's expectations (or it
has none), 1 on a mismatch, and 2 on usage, file or parse errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..engine import EngineError
from ..schedule import BoundExceeded, HistoryError, ItemMissing, ScheduleError
from .builtins import BUILTINS
from .report import (
    Style,
    run_report_machine,
    run_report_text,
    run_scenario,
    sweep_report_machine,
    sweep_report_text,
    sweep_scenario,
)
from .scenario import ScenarioError, ScenarioSpec, history_scenario, looks_like_scenario, parse_scenario

EXIT_MATCH, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _history_error(spec: ScenarioSpec, exc: HistoryError) -> UsageError:
    """Point a history error at its place in the scenario file."""
    if spec.history_origin and 1 <= exc.line <= len(spec.history_origin):
        line, col = spec.history_origin[exc.line - 1]
        return UsageError(f"{spec.source}:{line}:{col + exc.column - 1}: {exc.message}")
    return UsageError(f"{spec.source}:{exc.line}:{exc.column}: {exc.message}")


def load_spec(target: str) -> ScenarioSpec:
    if target in BUILTINS:
        return parse_scenario(BUILTINS[target], source=target)
    path = Path(target)
    if not path.is_file():
        raise UsageError(f"{target}: no such file or built-in scenario (try 'rvv list')")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"{target}: {exc}") from None
    if looks_like_scenario(text):
        return parse_scenario(text, source=target)
    try:
        return history_scenario(text, target)
    except HistoryError as exc:
        raise UsageError(f"{target}:{exc.line}:{exc.column}: {exc.message}") from None


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--engine", choices=["lscc", "mvcc"], help="override the concurrency-control mode")
    common.add_argument("--stamp", choices=["counter", "coarse", "scn", "rowversion"], help="override the stamping kind")
    common.add_argument("--iso", choices=["rc", "rr", "snap", "ser"], help="override the default isolation level")
    common.add_argument("--report", choices=["text", "machine"], default="text")
    common.add_argument("--limit", type=int, help="sample this many interleavings instead of all")
    common.add_argument("--seed", type=int, default=0, help="seed for sampling")

    parser = argparse.ArgumentParser(prog="rvv", description="Row-version verification scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run one scenario, history file or built-in")
    run.add_argument("target")
    sweep = sub.add_parser("sweep", parents=[common], help="run every interleaving of a scenario's programs")
    sweep.add_argument("target")
    sub.add_parser("list", help="list built-in scenarios")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    out = sys.stdout
    if args.command == "list":
        for name in sorted(BUILTINS):
            out.write(name + "\n")
        return EXIT_MATCH
    if args.limit is not None and args.limit < 1:
        sys.stderr.write("rvv: --limit must be positive\n")
        return EXIT_USAGE
    style = Style(color=out.isatty() and not os.environ.get("RVV_NO_COLOR"))
    spec = None
    try:
        spec = load_spec(args.target).with_overrides(args.engine, args.stamp, args.iso)
        if args.command == "run":
            result = run_scenario(spec)
            text = run_report_machine(result) if args.report == "machine" else run_report_text(result, style)
        else:
            result = sweep_scenario(spec, args.limit, args.seed)
            text = sweep_report_machine(result) if args.report == "machine" else sweep_report_text(result, style)
    except HistoryError as exc:
        err = _history_error(spec, exc) if spec is not None else exc
        sys.stderr.write(f"rvv: {err}\n")
        return EXIT_USAGE
    except (UsageError, ScenarioError, BoundExceeded, ItemMissing, ScheduleError, EngineError, KeyError, ValueError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"rvv: {message}\n")
        return EXIT_USAGE
    out.write(text)
    return EXIT_MISMATCH if result.verdict == "mismatch" else EXIT_MATCH


if __name__ == "__main__":
    sys.exit(main())
