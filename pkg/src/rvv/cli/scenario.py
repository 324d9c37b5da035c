"""Scenario files: a small ``key = value`` line format.

Example::

    # comment
    name = withdrawal-conditional
    engine = lscc
    stamp = counter
    row = acct|101|balance=1000|counter:0
    program = A conditional -100
    program = B sensitive -200
    schedule = A B B A A
    expect = final:acct:101.balance == 800
    expect = status:A == CONFLICT_DETECTED
    expect_sweep = lost_update_runs == 0

``history`` lines (repeatable, joined with newlines) replace ``program``
lines. Program lines read ``<name> <pattern> <delta>`` followed by optional
``key=``, ``column=``, ``iso=`` and ``retries=`` settings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional

from ..engine import (
    CCMode,
    EngineConfig,
    Isolation,
    Row,
    RowKey,
    SnapshotFormatError,
    StampKind,
    VersionStamp,
)
from ..engine.snapshot import parse_row
from ..patterns import PATTERNS

KEYS = frozenset(
    {"name", "engine", "stamp", "resolution", "iso", "row", "history", "program", "schedule",
     "expect", "expect_sweep"}
)
REPEATABLE = frozenset({"row", "history", "program", "expect", "expect_sweep"})
COMPARATORS = ("==", "!=", ">=", "<=", ">", "<")
RUN_METRICS = ("final:", "status:", "lost_updates", "lost_victims", "serializable", "victims", "stuck")
SWEEP_METRICS = (
    "interleavings", "lost_update_runs", "nonserializable_runs", "deadlock_runs", "finals:",
    "statuses:",
)
_SCENARIO_LINE = re.compile(r"^\s*([A-Za-z_]+)\s*=")


class ScenarioError(ValueError):
    def __init__(self, source: str, line: int, column: int, message: str):
        self.source, self.line, self.column, self.message = source, line, column, message
        super().__init__(f"{source}:{line}:{column}: {message}")


@dataclass(frozen=True)
class Expectation:
    metric: str
    op: str
    value: str
    line: int = 0

    def text(self) -> str:
        return f"{self.metric} {self.op} {self.value}"

    def check(self, actual: str) -> bool:
        try:
            a, b = int(actual), int(self.value)
        except ValueError:
            if self.op == "==":
                return actual == self.value
            if self.op == "!=":
                return actual != self.value
            return False
        return {
            "==": a == b, "!=": a != b, ">=": a >= b, "<=": a <= b, ">": a > b, "<": a < b
        }[self.op]


@dataclass(frozen=True)
class ProgramSpec:
    name: str
    pattern: str
    delta: int
    key: Optional[RowKey] = None
    column: Optional[str] = None
    isolation: Optional[Isolation] = None
    retries: int = 3


@dataclass
class ScenarioSpec:
    name: str
    config: EngineConfig
    rows: list[Row]
    isolation: Isolation = Isolation.READ_COMMITTED
    history: Optional[str] = None
    # scenario (line, column) where each history line starts
    history_origin: list[tuple[int, int]] = field(default_factory=list)
    programs: list[ProgramSpec] = field(default_factory=list)
    schedule: list[str] = field(default_factory=list)
    expects: list[Expectation] = field(default_factory=list)
    sweep_expects: list[Expectation] = field(default_factory=list)
    source: str = "<scenario>"

    def with_overrides(
        self,
        engine: Optional[str] = None,
        stamp: Optional[str] = None,
        iso: Optional[str] = None,
    ) -> "ScenarioSpec":
        config = self.config
        if engine is not None:
            config = replace(config, cc_mode=CCMode(engine))
        if stamp is not None:
            config = replace(config, stamping=StampKind.parse(stamp))
        rows = [Row(r.key, dict(r.columns), VersionStamp(config.stamping, r.stamp.value)) for r in self.rows]
        mode = config.cc_mode
        isolation = Isolation.parse(iso) if iso is not None else _carry_over(self.isolation, mode)
        programs = [
            replace(p, isolation=_carry_over(p.isolation, mode)) if p.isolation else p for p in self.programs
        ]
        return replace(self, config=config, rows=rows, isolation=isolation, programs=programs)


def _carry_over(isolation: Isolation, mode: CCMode) -> Isolation:
    """Closest level valid in ``mode``: strong levels map to each other."""
    if isolation.valid_for(mode):
        return isolation
    return Isolation.SNAPSHOT if mode is CCMode.MVCC else Isolation.REPEATABLE_READ


def looks_like_scenario(text: str) -> bool:
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        return bool(_SCENARIO_LINE.match(line))
    return False


def parse_expectation(value: str, line: int, col: int, source: str, sweep: bool) -> Expectation:
    parts = value.split()
    if len(parts) != 3 or parts[1] not in COMPARATORS:
        raise ScenarioError(source, line, col, f"expected '<metric> <{'|'.join(COMPARATORS)}> <value>'")
    metric = parts[0]
    known = SWEEP_METRICS if sweep else RUN_METRICS
    if not any(metric == m or (m.endswith(":") and metric.startswith(m) and len(metric) > len(m)) for m in known):
        raise ScenarioError(source, line, col, f"unknown metric {metric!r}")
    return Expectation(metric, parts[1], parts[2], line)


def _parse_program(value: str, line: int, col: int, source: str) -> ProgramSpec:
    parts = value.split()
    if len(parts) < 3:
        raise ScenarioError(source, line, col, "expected '<name> <pattern> <delta> [key=..] [column=..] [iso=..] [retries=..]'")
    name, pattern, delta = parts[:3]
    if pattern not in PATTERNS:
        raise ScenarioError(source, line, col, f"unknown pattern {pattern!r}; expected one of {', '.join(PATTERNS)}")
    try:
        spec = ProgramSpec(name, pattern, int(delta))
        for opt in parts[3:]:
            k, _, v = opt.partition("=")
            if k == "key":
                spec = replace(spec, key=RowKey.parse(v))
            elif k == "column":
                spec = replace(spec, column=v)
            elif k == "iso":
                spec = replace(spec, isolation=Isolation.parse(v))
            elif k == "retries":
                spec = replace(spec, retries=int(v))
            else:
                raise ValueError(f"unknown program setting {k!r}")
    except ValueError as exc:
        raise ScenarioError(source, line, col, str(exc)) from None
    return spec


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioSpec:
    values: dict[str, list[tuple[str, int, int]]] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, eq, value = raw.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ScenarioError(source, n, 1, "expected 'key = value'")
        if key not in KEYS:
            raise ScenarioError(source, n, raw.index(key) + 1, f"unknown key {key!r}")
        if key in values and key not in REPEATABLE:
            raise ScenarioError(source, n, raw.index(key) + 1, f"duplicate key {key!r}")
        start = len(key) + raw.index(key)
        start = raw.index("=", start) + 1
        while start < len(raw) and raw[start] == " ":
            start += 1
        values.setdefault(key, []).append((raw[start:].rstrip(), n, start + 1))

    def single(key: str, default: Optional[str] = None) -> tuple[Optional[str], int, int]:
        return values[key][0] if key in values else (default, 0, 0)

    def fail(where: tuple, message: str):
        raise ScenarioError(source, where[1] or 1, where[2] or 1, message)

    name = single("name", "unnamed")[0]
    try:
        mode = CCMode(single("engine", "lscc")[0].lower())
    except ValueError:
        fail(single("engine"), "engine must be lscc or mvcc")
    try:
        stamping = StampKind.parse(single("stamp", "counter")[0])
    except ValueError as exc:
        fail(single("stamp"), str(exc))
    try:
        config = EngineConfig(mode, stamping, int(single("resolution", "1")[0]))
    except ValueError as exc:
        fail(single("resolution"), f"bad resolution: {exc}")
    try:
        isolation = Isolation.parse(single("iso", "rc")[0])
    except ValueError as exc:
        fail(single("iso"), str(exc))

    rows = []
    for value, n, c in values.get("row", []):
        try:
            row = parse_row(value)
        except (SnapshotFormatError, ValueError) as exc:
            raise ScenarioError(source, n, c, f"bad row: {exc}") from None
        rows.append(Row(row.key, row.columns, VersionStamp(stamping, row.stamp.value)))
    if len({r.key for r in rows}) != len(rows):
        fail(values["row"][-1], "duplicate row key")

    spec = ScenarioSpec(name, config, rows, isolation, source=source)
    if "history" in values and "program" in values:
        fail(values["program"][0], "a scenario has either history lines or program lines, not both")
    if "history" in values:
        spec.history = "\n".join(v for v, _, _ in values["history"])
        spec.history_origin = [(n, c) for _, n, c in values["history"]]
    elif "program" in values:
        if not rows:
            fail(values["program"][0], "programs need at least one row")
        for value, n, c in values["program"]:
            spec.programs.append(_parse_program(value, n, c, source))
        names = [p.name for p in spec.programs]
        if len(set(names)) != len(names):
            fail(values["program"][-1], "program names must be unique")
    else:
        raise ScenarioError(source, 1, 1, "scenario needs history or program lines")
    if "schedule" in values:
        if spec.history is not None:
            fail(values["schedule"][0], "schedule applies to programs only")
        value, n, c = values["schedule"][0]
        known = {p.name for p in spec.programs}
        for tok in value.split():
            if tok not in known:
                raise ScenarioError(source, n, c + value.index(tok), f"unknown program {tok!r}")
        spec.schedule = value.split()
    for value, n, c in values.get("expect", []):
        spec.expects.append(parse_expectation(value, n, c, source, sweep=False))
    for value, n, c in values.get("expect_sweep", []):
        spec.sweep_expects.append(parse_expectation(value, n, c, source, sweep=True))
    return spec


def history_scenario(text: str, source: str) -> ScenarioSpec:
    """Wrap a bare history file: every item becomes a row ``t:<item>`` holding ``v = 1000``."""
    from ..schedule import parse_history

    history = parse_history(text)
    rows = [Row(RowKey("t", item), {"v": 1000}, VersionStamp(StampKind.COUNTER, 0)) for item in history.items]
    n = text.count("\n") + 1
    return ScenarioSpec(
        source, EngineConfig(), rows, history=text, history_origin=[(i, 1) for i in range(1, n + 1)],
        source=source,
    )
