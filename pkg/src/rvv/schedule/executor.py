"""Deterministic step-wise driver for transaction programs over one engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from ..engine import Engine, EngineConfig, EngineError, Row, TxnState, WouldBlock, digest
from ..engine.types import Transaction
from .program import (
    Abort,
    Begin,
    Commit,
    CondWrite,
    Note,
    Program,
    Read,
    Request,
    Tick,
    Write,
)
from .trace import Access, ExecutionTrace, TraceStep


class ProgramError(Exception):
    """A program gave up in a way it wants reported as its outcome."""


class StuckSchedule(Exception):
    def __init__(self, trace: ExecutionTrace):
        self.trace = trace
        parked = sorted({s.program for s in trace.steps if s.result.startswith("blocked")})
        super().__init__(f"schedule stuck: {', '.join(parked)} blocked with no way forward")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ProgramFailure:
    """Outcome recorded for a program that ended by raising."""

    error: Exception

    def __str__(self) -> str:
        return f"{type(self.error).__name__}: {self.error}"


@dataclass
class _Slot:
    program: Program
    gen: Any
    pending: Optional[Request] = None
    finished: bool = False
    parked: bool = False
    outcome: Any = None
    txns: list[Transaction] = field(default_factory=list)


def _copy_rows(rows: Iterable[Row]) -> list[Row]:
    return [Row(r.key, dict(r.columns), r.stamp) for r in rows]


class Executor:
    def __init__(
        self,
        programs: Sequence[Program],
        config: EngineConfig,
        rows: Iterable[Row],
        check_invariants: bool = False,
    ):
        names = [p.name for p in programs]
        if len(set(names)) != len(names):
            raise ScheduleError(f"program names must be unique: {names}")
        self.engine = Engine(config, _copy_rows(rows))
        self.check_invariants = check_invariants
        self.trace = ExecutionTrace()
        self._choices: list[str] = []
        self._deferred: list[int] = []
        self._by_name = {p.name: i for i, p in enumerate(programs)}
        self.slots = [_Slot(p, p.body()) for p in programs]
        for slot in self.slots:
            self._advance(slot, None, None, prime=True)

    # -- scheduling ------------------------------------------------------------

    def index(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise ScheduleError(f"no program named {name!r}") from None

    def enabled(self) -> list[int]:
        """Programs that can take a fresh step right now."""
        return [
            i
            for i, s in enumerate(self.slots)
            if not s.finished and not s.parked and i not in self._deferred
        ]

    def step(self, i: int) -> None:
        """Run one step of program ``i``, which must be enabled."""
        if i not in self.enabled():
            raise ScheduleError(f"{self.slots[i].program.name} cannot step now")
        self._choices.append(self.slots[i].program.name)
        if not self._run_step(i):
            self._deferred.append(i)
        self._settle()

    def schedule(self, i: int) -> None:
        """Give program ``i`` its next step, deferring it behind a pending block."""
        slot = self.slots[i]
        if slot.finished:
            raise ScheduleError(f"{slot.program.name} has already finished")
        if slot.parked or i in self._deferred:
            self._choices.append(slot.program.name)
            self._deferred.append(i)
            return
        self.step(i)

    def tick(self, label: str = "tick") -> None:
        clock = self.engine.tick()
        self._record("-", label, f"clock={clock}")

    def finish(self) -> ExecutionTrace:
        tr = self.trace
        tr.txn_states = {tid: t.state.value for tid, t in sorted(self.engine.transactions.items())}
        tr.outcomes = {
            s.program.name: (s.outcome if s.finished else "UNFINISHED") for s in self.slots
        }
        tr.final_rows = self.engine.rows()
        tr.interleaving = tuple(self._choices)
        tr.deadlock_victims = list(self.engine.deadlock_victims)
        tr.stuck = bool(self._deferred) or any(s.parked for s in self.slots)
        return tr

    # -- internals -------------------------------------------------------------

    def _run_step(self, i: int) -> bool:
        """Perform requests of program ``i`` up to a step boundary; False if it blocked."""
        slot = self.slots[i]
        while not slot.finished:
            req = slot.pending
            try:
                result, text = self._perform(slot, req)
            except WouldBlock as exc:
                slot.parked = True
                by = ",".join(exc.waiting_for)
                self._record(slot.program.name, self._label(slot, req), f"blocked on {exc.key} by {by}")
                return False
            except EngineError as exc:
                slot.parked = False
                self._record(slot.program.name, self._label(slot, req), type(exc).__name__)
                self._advance(slot, None, exc)
                if req.ends_step:
                    return True
                continue
            slot.parked = False
            self._record(slot.program.name, self._label(slot, req), text)
            self._advance(slot, result, None)
            if req.ends_step:
                return True
        return True

    def _settle(self) -> None:
        while True:
            while (victim := self.engine.detect_deadlock()) is not None:
                self._record("-", "deadlock", f"victim={victim}")
            if self.check_invariants:
                self.engine.assert_acyclic()
                self.engine.check_invariants()
            if not self._drain_one():
                return

    def _drain_one(self) -> bool:
        stalled: set[int] = set()
        for pos, i in enumerate(self._deferred):
            if i in stalled:
                continue
            slot = self.slots[i]
            if slot.finished:
                del self._deferred[pos]
                return True
            txn = getattr(slot.pending, "txn", None)
            if slot.parked and txn is not None and txn.state is TxnState.BLOCKED:
                stalled.add(i)
                continue
            if self._run_step(i):
                del self._deferred[pos]
            return True
        return False

    def _advance(
        self, slot: _Slot, value: Any, error: Optional[Exception], prime: bool = False
    ) -> None:
        try:
            if prime:
                slot.pending = next(slot.gen)
            elif error is not None:
                slot.pending = slot.gen.throw(error)
            else:
                slot.pending = slot.gen.send(value)
        except StopIteration as stop:
            slot.finished, slot.pending, slot.outcome = True, None, stop.value
        except (EngineError, ProgramError) as exc:
            slot.finished, slot.pending, slot.outcome = True, None, ProgramFailure(exc)
            for t in slot.txns:
                if not t.finished:
                    self.engine.abort(t)

    def _perform(self, slot: _Slot, req: Request) -> tuple[Any, str]:
        eng = self.engine
        name = slot.program.name
        if isinstance(req, Begin):
            txn_id = req.txn_id or f"{name}{len(slot.txns) + 1}"
            txn = eng.begin(req.isolation, txn_id=txn_id)
            slot.txns.append(txn)
            self.trace.txn_program[txn.id] = name
            return txn, f"begin {txn.id} {req.isolation.value}"
        if isinstance(req, Read):
            r = eng.read(req.txn, req.key, req.column)
            self._access("r", slot, req.txn, req.key, r.version, stamp=r.stamp, own=r.own)
            return r, f"value={r.value} stamp={r.stamp}"
        if isinstance(req, Write):
            ticket = eng.write(req.txn, req.key, req.updates, relative=req.relative)
            basis = req.basis.version if req.basis is not None else ticket.base_version
            self._access("w", slot, req.txn, req.key, None, basis=basis)
            shown = ",".join(f"{c}={ticket.values[c]}" for c in sorted(req.updates))
            return ticket, f"buffered {shown}"
        if isinstance(req, CondWrite):
            n = eng.conditional_write(
                req.txn, req.key, req.updates, req.expected, relative=req.relative
            )
            if n:
                basis = (
                    req.basis.version
                    if req.basis is not None
                    else eng.version_history(req.key)[-1][0]
                )
                self._access("w", slot, req.txn, req.key, None, basis=basis)
            return n, f"rows={n}"
        if isinstance(req, Commit):
            receipt = eng.commit(req.txn)
            for acc in self.trace.accesses:
                if acc.txn == req.txn.id and acc.kind == "w":
                    acc.version = receipt.installed[acc.key][0]
            return receipt, f"committed seq={receipt.commit_seq}"
        if isinstance(req, Abort):
            eng.abort(req.txn)
            return None, "aborted"
        if isinstance(req, Tick):
            return eng.tick(req.n), f"clock={eng.clock}"
        if isinstance(req, Note):
            return None, req.text
        raise TypeError(f"unknown request {req!r}")

    def _access(self, kind: str, slot: _Slot, txn: Transaction, key, version, **kw) -> None:
        self.trace.accesses.append(
            Access(kind, slot.program.name, txn.id, key, len(self.trace.steps) + 1, version, **kw)
        )

    def _label(self, slot: _Slot, req: Request) -> str:
        if req.label:
            return req.label
        name = slot.program.name
        if isinstance(req, Begin):
            return f"{name}:begin"
        if isinstance(req, Read):
            return f"{req.txn.id}:r({req.key}.{req.column})"
        if isinstance(req, (Write, CondWrite)):
            sign = "+=" if req.relative else "="
            body = ",".join(f"{c}{sign}{v}" for c, v in sorted(req.updates.items()))
            cond = f" if {req.expected}" if isinstance(req, CondWrite) else ""
            return f"{req.txn.id}:w({req.key}.{body}){cond}"
        if isinstance(req, Commit):
            return f"{req.txn.id}:commit"
        if isinstance(req, Abort):
            return f"{req.txn.id}:abort"
        if isinstance(req, Tick):
            return f"{name}:tick"
        return f"{name}:note"

    def _record(self, program: str, op: str, result: str) -> None:
        parked = tuple(sorted(s.program.name for s in self.slots if s.parked and not s.finished))
        self.trace.steps.append(
            TraceStep(len(self.trace.steps) + 1, program, op, result, parked, digest(self.engine.rows()))
        )
