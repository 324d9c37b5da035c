from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..engine.types import Row, RowKey, VersionStamp


@dataclass(frozen=True)
class TraceStep:
    index: int
    program: str
    op: str
    result: str
    blocked: tuple[str, ...]
    digest: str

    def line(self) -> str:
        return f"{self.index}|{self.op}|{self.result}|{self.digest}"


@dataclass
class Access:
    """One read or write that reached the engine.

    ``version`` is the committed version a read observed, or the version a
    write installed (``None`` until its transaction commits). ``basis`` is the
    version a write's value was computed from.
    """

    kind: str
    program: str
    txn: str
    key: RowKey
    step: int
    version: Optional[int]
    stamp: Optional[VersionStamp] = None
    basis: Optional[int] = None
    own: bool = False


@dataclass
class ExecutionTrace:
    steps: list[TraceStep] = field(default_factory=list)
    accesses: list[Access] = field(default_factory=list)
    txn_states: dict[str, str] = field(default_factory=dict)
    txn_program: dict[str, str] = field(default_factory=dict)
    outcomes: dict[str, Any] = field(default_factory=dict)
    final_rows: list[Row] = field(default_factory=list)
    interleaving: tuple[str, ...] = ()
    deadlock_victims: list[str] = field(default_factory=list)
    stuck: bool = False

    def committed_txns(self) -> set[str]:
        return {t for t, s in self.txn_states.items() if s == "COMMITTED"}

    def final_value(self, key: RowKey, column: str) -> int:
        for row in self.final_rows:
            if row.key == key:
                return row.columns[column]
        raise KeyError(str(key))

    def serialize(self) -> str:
        return "".join(step.line() + "\n" for step in self.steps)
