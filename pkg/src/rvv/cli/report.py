"""Running scenarios and rendering their reports.

Machine reports are tab-separated, one record per line; the first field names
the record type:

=================  ============================================================
``scenario``       name, then ``engine=``, ``stamp=``, ``resolution=``, ``iso=``
``sweep``          same fields as ``scenario`` plus ``mode=exhaustive|sampled``
``step``           index, program, operation, result, store digest
``outcome``        program, outcome text
``victim``         deadlock victim transaction
``lost``           item, victim program, overwriter program, victim write step
``edge``           source, target, item, conflict kind
``serializable``   ``true`` or ``false``
``row``            final row in store dump format
``summary``        metric, value
``final``          item, value, number of interleavings
``status``         program, status, number of interleavings
``counterexample`` anomaly kind, interleaving index, program order
``expect``         ``ok`` or ``fail``, expectation, actual value
``result``         ``match``, ``mismatch`` or ``unchecked``
=================  ============================================================
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from ..engine import RowKey
from ..engine.snapshot import format_row
from ..patterns import PatternOutcome, pattern_program
from ..schedule import (
    AnomalyReport,
    ExecutionTrace,
    Program,
    StuckSchedule,
    analyze,
    compile_history,
    enumerate_interleavings,
    execute,
    parse_history,
    run_programs,
)
from .scenario import Expectation, ScenarioSpec


def outcome_status(outcome) -> str:
    if isinstance(outcome, PatternOutcome):
        return outcome.status.value
    if isinstance(outcome, str):
        return outcome
    error = getattr(outcome, "error", None)
    return type(error).__name__ if error is not None else str(outcome)


def _split_item(metric: str, prefix: str) -> tuple[RowKey, str]:
    key, _, column = metric[len(prefix):].rpartition(".")
    return RowKey.parse(key), column


def _final(trace: ExecutionTrace, key: RowKey, column: str) -> str:
    try:
        return str(trace.final_value(key, column))
    except KeyError:
        return "missing"


@dataclass
class Check:
    expectation: Expectation
    actual: str

    @property
    def ok(self) -> bool:
        return self.expectation.check(self.actual)


def _verdict(checks: list[Check]) -> str:
    if not checks:
        return "unchecked"
    return "match" if all(c.ok for c in checks) else "mismatch"


@dataclass
class RunResult:
    spec: ScenarioSpec
    trace: ExecutionTrace
    anomalies: AnomalyReport
    checks: list[Check] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return _verdict(self.checks)

    def metric(self, name: str) -> str:
        tr, an = self.trace, self.anomalies
        if name.startswith("final:"):
            return _final(tr, *_split_item(name, "final:"))
        if name.startswith("status:"):
            prog = name[len("status:"):]
            return outcome_status(tr.outcomes[prog]) if prog in tr.outcomes else "missing"
        if name == "lost_updates":
            return str(len(an.lost_updates))
        if name == "lost_victims":
            return ",".join(sorted({lu.victim for lu in an.lost_updates})) or "-"
        if name == "serializable":
            return str(an.serializable).lower()
        if name == "victims":
            return ",".join(tr.deadlock_victims) or "-"
        if name == "stuck":
            return str(tr.stuck).lower()
        raise KeyError(name)


def build_programs(spec: ScenarioSpec) -> list[Program]:
    if spec.history is not None:
        return compile_history(
            parse_history(spec.history), spec.config, spec.rows, spec.isolation, grouped=True
        )
    programs = []
    for p in spec.programs:
        key = p.key or spec.rows[0].key
        row = next((r for r in spec.rows if r.key == key), None)
        if row is None:
            raise KeyError(f"program {p.name} refers to missing row {key}")
        column = p.column or next(iter(row.columns))
        programs.append(
            pattern_program(p.name, p.pattern, key, column, p.delta, p.isolation, spec.config.cc_mode, p.retries)
        )
    return programs


def run_scenario(spec: ScenarioSpec, check_invariants: bool = True) -> RunResult:
    if spec.history is not None:
        try:
            trace = execute(spec.history, spec.config, spec.rows, spec.isolation, check_invariants=check_invariants)
        except StuckSchedule as exc:
            trace = exc.trace
    else:
        trace = run_programs(build_programs(spec), spec.config, spec.rows, spec.schedule, check_invariants)
    result = RunResult(spec, trace, analyze(trace))
    result.checks = [Check(e, result.metric(e.metric)) for e in spec.expects]
    return result


@dataclass
class SweepResult:
    spec: ScenarioSpec
    mode: str
    interleavings: int = 0
    lost_update_runs: int = 0
    nonserializable_runs: int = 0
    deadlock_runs: int = 0
    finals: Counter = field(default_factory=Counter)
    statuses: Counter = field(default_factory=Counter)
    # anomaly kind -> (interleaving index, trace)
    counterexamples: dict[str, tuple[int, ExecutionTrace]] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return _verdict(self.checks)

    def metric(self, name: str) -> str:
        if name in ("interleavings", "lost_update_runs", "nonserializable_runs", "deadlock_runs"):
            return str(getattr(self, name))
        if name.startswith("finals:"):
            key, column = _split_item(name, "finals:")
            return ",".join(str(v) for v in sorted({v for (k, c, v) in self.finals if (k, c) == (key, column)}, key=_num)) or "-"
        if name.startswith("statuses:"):
            prog = name[len("statuses:"):]
            return ",".join(sorted({s for (p, s) in self.statuses if p == prog})) or "-"
        raise KeyError(name)


def _num(v: str):
    try:
        return (0, int(v), "")
    except ValueError:
        return (1, 0, v)


def sweep_scenario(
    spec: ScenarioSpec, limit: Optional[int] = None, seed: int = 0, check_invariants: bool = True
) -> SweepResult:
    programs = build_programs(spec)
    result = SweepResult(spec, "exhaustive" if limit is None else "sampled")
    for i, trace in enumerate(
        enumerate_interleavings(programs, spec.config, spec.rows, limit, seed, check_invariants), start=1
    ):
        report = analyze(trace)
        result.interleavings += 1
        if report.lost_updates:
            result.lost_update_runs += 1
            result.counterexamples.setdefault("lost-update", (i, trace))
        if not report.serializable:
            result.nonserializable_runs += 1
            result.counterexamples.setdefault("non-serializable", (i, trace))
        if trace.deadlock_victims:
            result.deadlock_runs += 1
        for row in trace.final_rows:
            for column, value in row.columns.items():
                result.finals[(row.key, column, str(value))] += 1
        for prog, outcome in trace.outcomes.items():
            result.statuses[(prog, outcome_status(outcome))] += 1
    result.checks = [Check(e, result.metric(e.metric)) for e in spec.sweep_expects]
    return result


# -- rendering -----------------------------------------------------------------


def _settings(spec: ScenarioSpec) -> list[str]:
    c = spec.config
    return [
        f"engine={c.cc_mode.value}", f"stamp={c.stamping.value}", f"resolution={c.clock_resolution}",
        f"iso={spec.isolation.value}",
    ]


def _tsv(*fields) -> str:
    return "\t".join(str(f).replace("\t", " ").replace("\n", " ") for f in fields) + "\n"


class Style:
    def __init__(self, color: bool):
        self.color = color

    def _wrap(self, code: str, text: str) -> str:
        return f"\x1b[{code}m{text}\x1b[0m" if self.color else text

    def good(self, text: str) -> str:
        return self._wrap("32", text)

    def bad(self, text: str) -> str:
        return self._wrap("31", text)

    def head(self, text: str) -> str:
        return self._wrap("1", text)


def _checks_text(checks: list[Check], verdict: str, style: Style) -> str:
    out = ""
    if checks:
        out += style.head("expectations") + "\n"
        for c in checks:
            mark = style.good("ok  ") if c.ok else style.bad("FAIL")
            out += f"  {mark} {c.expectation.text()}  (actual {c.actual})\n"
    shown = {"match": style.good, "mismatch": style.bad}.get(verdict, str)(verdict.upper())
    return out + f"result: {shown}\n"


def _outcomes(trace: ExecutionTrace) -> list[tuple[str, str]]:
    return [(p, str(o)) for p, o in trace.outcomes.items()]


def run_report_text(result: RunResult, style: Style) -> str:
    tr, an = result.trace, result.anomalies
    out = style.head(f"scenario {result.spec.name}") + "  " + " ".join(_settings(result.spec)) + "\n"
    out += style.head("trace") + "\n"
    out += "".join(f"  {s.line()}\n" for s in tr.steps)
    out += style.head("outcomes") + "\n"
    out += "".join(f"  {p}: {o}\n" for p, o in _outcomes(tr))
    if tr.stuck:
        out += style.bad("  schedule stuck: blocked operations never completed") + "\n"
    out += f"deadlock victims: {', '.join(tr.deadlock_victims) or 'none'}\n"
    out += style.head("anomalies") + "\n"
    if not an.lost_updates:
        out += "  lost updates: none\n"
    for lu in an.lost_updates:
        out += style.bad(
            f"  lost update on {lu.item}: {lu.victim}'s write (step {lu.victim_write_step}) overwritten by {lu.overwriter}"
        ) + "\n"
    verdict = "yes" if an.serializable else style.bad("no")
    out += f"  serializable: {verdict}\n"
    out += "".join(f"  edge {e.source} -> {e.target} {e.kind} on {e.item}\n" for e in an.edges)
    out += style.head("final store") + "\n"
    out += "".join(f"  {format_row(r)}\n" for r in tr.final_rows)
    return out + _checks_text(result.checks, result.verdict, style)


def run_report_machine(result: RunResult) -> str:
    tr, an = result.trace, result.anomalies
    out = _tsv("scenario", result.spec.name, *_settings(result.spec))
    out += "".join(_tsv("step", s.index, s.program, s.op, s.result, s.digest) for s in tr.steps)
    out += "".join(_tsv("outcome", p, o) for p, o in _outcomes(tr))
    if tr.stuck:
        out += _tsv("stuck", "true")
    out += "".join(_tsv("victim", v) for v in tr.deadlock_victims)
    out += "".join(_tsv("lost", lu.item, lu.victim, lu.overwriter, lu.victim_write_step) for lu in an.lost_updates)
    out += "".join(_tsv("edge", e.source, e.target, e.item, e.kind) for e in an.edges)
    out += _tsv("serializable", str(an.serializable).lower())
    out += "".join(_tsv("row", format_row(r)) for r in tr.final_rows)
    out += "".join(_tsv("expect", "ok" if c.ok else "fail", c.expectation.text(), c.actual) for c in result.checks)
    return out + _tsv("result", result.verdict)


_SUMMARY = ("interleavings", "lost_update_runs", "nonserializable_runs", "deadlock_runs")


def _finals(result: SweepResult) -> list[tuple[str, str, int]]:
    return [
        (f"{k}.{c}", v, n) for (k, c, v), n in sorted(result.finals.items(), key=lambda kv: (kv[0][0], kv[0][1], _num(kv[0][2])))
    ]


def sweep_report_text(result: SweepResult, style: Style) -> str:
    out = style.head(f"sweep {result.spec.name}") + "  " + " ".join(_settings(result.spec) + [f"mode={result.mode}"]) + "\n"
    out += style.head("summary") + "\n"
    width = max(len(m) for m in _SUMMARY)
    out += "".join(f"  {m:<{width}}  {getattr(result, m)}\n" for m in _SUMMARY)
    out += style.head("final values") + "\n"
    out += "".join(f"  {item} = {v}  in {n} interleavings\n" for item, v, n in _finals(result))
    out += style.head("outcomes") + "\n"
    out += "".join(f"  {p}: {s}  in {n} interleavings\n" for (p, s), n in sorted(result.statuses.items()))
    for kind, (i, trace) in sorted(result.counterexamples.items()):
        out += style.bad(f"counterexample ({kind}), interleaving #{i}: {' '.join(trace.interleaving)}") + "\n"
        out += "".join(f"  {s.line()}\n" for s in trace.steps)
    return out + _checks_text(result.checks, result.verdict, style)


def sweep_report_machine(result: SweepResult) -> str:
    out = _tsv("sweep", result.spec.name, *_settings(result.spec), f"mode={result.mode}")
    out += "".join(_tsv("summary", m, getattr(result, m)) for m in _SUMMARY)
    out += "".join(_tsv("final", item, v, n) for item, v, n in _finals(result))
    out += "".join(_tsv("status", p, s, n) for (p, s), n in sorted(result.statuses.items()))
    for kind, (i, trace) in sorted(result.counterexamples.items()):
        out += _tsv("counterexample", kind, i, " ".join(trace.interleaving))
        out += "".join(_tsv("step", s.index, s.program, s.op, s.result, s.digest) for s in trace.steps)
    out += "".join(_tsv("expect", "ok" if c.ok else "fail", c.expectation.text(), c.actual) for c in result.checks)
    return out + _tsv("result", result.verdict)
