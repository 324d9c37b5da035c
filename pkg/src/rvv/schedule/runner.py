"""Running histories and enumerating interleavings of programs."""

from __future__ import annotations

import random
from typing import Iterable, Iterator, Optional, Sequence, Union

from ..engine import CCMode, EngineConfig, Isolation, Row, RowKey, TransactionAborted
from .executor import Executor, StuckSchedule
from .history import History, OpKind, Operation, TxnDecl, parse_history
from .program import Abort, Begin, Commit, CondWrite, Note, Program, Read, Tick, Write
from .trace import ExecutionTrace

EXHAUSTIVE_BOUND = 12
DEFAULT_DELTA = 1
CLOCK_PROGRAM = "~clock"


class ItemMissing(KeyError):
    pass


class BoundExceeded(ValueError):
    pass


def resolve_item(item: str, keys: Iterable[RowKey]) -> RowKey:
    """Map a history item to a row: ``table:id`` exactly, or a bare id that is unique."""
    keys = list(keys)
    if ":" in item:
        key = RowKey.parse(item)
        if key not in keys:
            raise ItemMissing(item)
        return key
    matches = [k for k in keys if k.id == item]
    if len(matches) != 1:
        raise ItemMissing(item if not matches else f"{item} is ambiguous: {matches}")
    return matches[0]


def _strong_isolation(mode: CCMode) -> Isolation:
    return Isolation.SNAPSHOT if mode is CCMode.MVCC else Isolation.REPEATABLE_READ


def _txn_program(
    txn: str,
    history: History,
    rows: dict[RowKey, Row],
    config: EngineConfig,
    isolation: Isolation,
    column: Optional[str],
    grouped: bool,
) -> Program:
    ops = history.ops_of(txn)
    decl = history.decls.get(txn) or TxnDecl(txn)
    if decl.mode is not None and decl.mode is not config.cc_mode:
        raise ValueError(f"{txn} is declared {decl.mode.name} but the engine runs {config.cc_mode.name}")
    occ = history.is_occ(txn)
    delta = DEFAULT_DELTA if decl.delta is None else decl.delta
    keys = {op.item: resolve_item(op.item, rows) for op in ops if op.item is not None}
    cols = {}
    for item, key in keys.items():
        col = column or next(iter(rows[key].columns))
        if col not in rows[key].columns:
            raise ItemMissing(f"{item} has no column {col}")
        cols[item] = col
    # index of each op inside the whole history, for adjacency checks
    positions = [i for i, op in enumerate(history.operations) if op.txn == txn]

    def adjacent_commit(k: int) -> bool:
        nxt = positions[k] + 1
        return nxt < len(history.operations) and history.operations[nxt] == Operation(OpKind.COMMIT, txn)

    def last_unit_write(k: int) -> bool:
        return k + 1 >= len(ops) or ops[k + 1].kind not in (OpKind.WRITE, OpKind.COND_WRITE)

    def body():
        reads = {}
        status = None
        if occ:
            phase_txn = None  # read-phase transaction, then validation/write transaction
            validated = False
        t = None
        for k, op in enumerate(ops):
            label = op.text()
            if status is not None:
                yield Note(text=f"skipped: {txn} {status.lower()}", label=label)
                continue
            try:
                if op.kind in (OpKind.READ, OpKind.WRITE, OpKind.COND_WRITE):
                    key, col = keys[op.item], cols[op.item]
                if not occ:
                    if t is None and op.kind is not OpKind.ABORT:
                        t = yield Begin(isolation if decl.isolation is None else decl.isolation,
                                        txn_id=txn, ends_step=False, label=f"{txn}:begin")
                    if op.kind is OpKind.READ:
                        reads[op.item] = yield Read(t, key, col, label=label)
                    elif op.kind is OpKind.WRITE:
                        yield _dsl_write(t, key, col, reads.get(op.item), delta, label, True)
                    elif op.kind is OpKind.COND_WRITE:
                        base = reads[op.item]
                        yield CondWrite(t, key, {col: base.value + delta}, base.stamp, basis=base, label=label)
                    elif op.kind is OpKind.COMMIT:
                        yield Commit(t, label=label)
                        status = "COMMITTED"
                    elif op.kind is OpKind.ABORT:
                        if t is None:
                            yield Note(text="aborted before start", label=label)
                        else:
                            yield Abort(t, label=label)
                        status = "ABORTED"
                    continue
                # optimistic transaction
                if op.kind is OpKind.READ:
                    if phase_txn is None:
                        phase_txn = yield Begin(Isolation.READ_COMMITTED, txn_id=f"{txn}.r",
                                                ends_step=False, label=f"{txn}:begin-read")
                    reads[op.item] = yield Read(phase_txn, key, col, label=label)
                elif op.kind is OpKind.VALIDATE:
                    has_writes = k + 1 < len(ops) and ops[k + 1].kind in (OpKind.WRITE, OpKind.COND_WRITE)
                    if phase_txn is not None:
                        yield Commit(phase_txn, ends_step=False, label=f"{txn}:end-read")
                    strong = decl.isolation or _strong_isolation(config.cc_mode)
                    phase_txn = yield Begin(strong, txn_id=f"{txn}.v", ends_step=False, label=label)
                    ok = True
                    for item, seen in reads.items():
                        now = yield Read(phase_txn, keys[item], cols[item], ends_step=False, label=label)
                        ok = ok and now.stamp == seen.stamp
                    if not ok:
                        yield Abort(phase_txn, ends_step=False, label=label)
                        yield Note(text="validation failed", label=label)
                        status = "ABORTED"
                    elif not has_writes and not adjacent_commit(k):
                        yield Commit(phase_txn, ends_step=False, label=label)
                        yield Note(text="validated", label=label)
                        status = "COMMITTED"
                    else:
                        yield Note(text="validated", label=label, ends_step=not (grouped and has_writes))
                    validated = True
                elif op.kind in (OpKind.WRITE, OpKind.COND_WRITE):
                    finish = last_unit_write(k) and not adjacent_commit(k)
                    step_ends = not grouped or last_unit_write(k)
                    if op.kind is OpKind.WRITE:
                        yield _dsl_write(phase_txn, key, col, reads.get(op.item), delta, label,
                                         step_ends and not finish)
                    else:
                        base = reads[op.item]
                        yield CondWrite(phase_txn, key, {col: base.value + delta}, base.stamp,
                                        basis=base, label=label, ends_step=step_ends and not finish)
                    if finish:
                        yield Commit(phase_txn, label=label)
                        status = "COMMITTED"
                elif op.kind is OpKind.COMMIT:
                    if phase_txn is None:
                        yield Note(text="committed empty", label=label)
                    else:
                        yield Commit(phase_txn, label=label)
                    status = "COMMITTED"
                elif op.kind is OpKind.ABORT:
                    if phase_txn is None:
                        yield Note(text="aborted before start", label=label)
                    else:
                        yield Abort(phase_txn, label=label)
                    status = "ABORTED"
            except TransactionAborted:
                status = "ABORTED"
        if status is None:
            return "ACTIVE" if (t if not occ else phase_txn) is not None else "NOT_STARTED"
        return status

    size = len(ops)
    if grouped and occ:
        size -= sum(1 for op in ops if op.kind in (OpKind.WRITE, OpKind.COND_WRITE))
    return Program(txn, body, size)


def _dsl_write(t, key, col, base, delta, label, ends_step):
    if base is None:
        return Write(t, key, {col: delta}, relative=True, label=label, ends_step=ends_step)
    return Write(t, key, {col: base.value + delta}, basis=base, label=label, ends_step=ends_step)


def compile_history(
    history: History,
    config: EngineConfig,
    rows: Sequence[Row],
    isolation: Isolation = Isolation.READ_COMMITTED,
    column: Optional[str] = None,
    grouped: bool = False,
) -> list[Program]:
    """One program per transaction (plus a clock program when the history ticks).

    Writes compute ``value read + delta`` when the transaction read the item
    before, and ``current value + delta`` otherwise; ``delta`` comes from the
    transaction header (default 1). Optimistic transactions read under READ
    COMMITTED, then validate and write in a second transaction at a strong
    level. With ``grouped`` the validation and its write phase form one step.
    """
    by_key = {r.key: r for r in rows}
    programs = [
        _txn_program(t, history, by_key, config, isolation, column, grouped) for t in history.txns
    ]
    ticks = sum(1 for op in history.operations if op.kind is OpKind.TICK)
    if ticks:

        def clock():
            for _ in range(ticks):
                yield Tick(label="tick")

        programs.append(Program(CLOCK_PROGRAM, clock, ticks))
    return programs


def execute(
    history: Union[History, str],
    config: EngineConfig,
    rows: Sequence[Row],
    isolation: Isolation = Isolation.READ_COMMITTED,
    column: Optional[str] = None,
    check_invariants: bool = False,
) -> ExecutionTrace:
    """Run ``history`` in its written order; blocked operations wait and retry.

    Raises :class:`StuckSchedule` (carrying the trace) when operations are
    still blocked after the last one was issued.
    """
    if isinstance(history, str):
        history = parse_history(history)
    programs = [p for p in compile_history(history, config, rows, isolation, column) if p.name != CLOCK_PROGRAM]
    ex = Executor(programs, config, rows, check_invariants=check_invariants)
    for op in history.operations:
        if op.kind is OpKind.TICK:
            ex.tick()
        else:
            ex.schedule(ex.index(op.txn))
    trace = ex.finish()
    if trace.stuck:
        raise StuckSchedule(trace)
    return trace


def run_programs(
    programs: Sequence[Program],
    config: EngineConfig,
    rows: Sequence[Row],
    schedule: Sequence[str] = (),
    check_invariants: bool = False,
) -> ExecutionTrace:
    """Follow ``schedule`` (program names), then run whatever is left in listed order."""
    ex = Executor(programs, config, rows, check_invariants=check_invariants)
    for name in schedule:
        ex.schedule(ex.index(name))
    while True:
        enabled = ex.enabled()
        if not enabled:
            break
        ex.step(enabled[0])
    return ex.finish()


def enumerate_interleavings(
    programs: Sequence[Program],
    config: EngineConfig,
    rows: Sequence[Row],
    limit: Optional[int] = None,
    seed: int = 0,
    check_invariants: bool = False,
) -> Iterator[ExecutionTrace]:
    """Yield one trace per distinct interleaving of the programs' steps.

    Without ``limit`` every interleaving is explored (total nominal size must
    not exceed the exhaustive bound). With ``limit``, that many distinct
    interleavings are sampled by seeded random walks.
    """
    if limit is None:
        total = sum(p.size for p in programs)
        if total > EXHAUSTIVE_BOUND:
            raise BoundExceeded(f"{total} operations exceed the exhaustive bound of {EXHAUSTIVE_BOUND}")
        yield from _exhaustive(programs, config, rows, check_invariants)
    else:
        yield from _sampled(programs, config, rows, limit, seed, check_invariants)


def _exhaustive(programs, config, rows, check_invariants) -> Iterator[ExecutionTrace]:
    stack: list[list] = []  # [enabled choices, index taken] per depth
    while True:
        ex = Executor(programs, config, rows, check_invariants=check_invariants)
        depth = 0
        while enabled := ex.enabled():
            if depth == len(stack):
                stack.append([enabled, 0])
            choices, taken = stack[depth]
            if choices != enabled:
                raise RuntimeError("non-deterministic program: replay diverged")
            ex.step(choices[taken])
            depth += 1
        del stack[depth:]
        yield ex.finish()
        while stack and stack[-1][1] == len(stack[-1][0]) - 1:
            stack.pop()
        if not stack:
            return
        stack[-1][1] += 1


def _sampled(programs, config, rows, limit, seed, check_invariants) -> Iterator[ExecutionTrace]:
    rng = random.Random(seed)
    seen: set[tuple[int, ...]] = set()
    attempts = 0
    while len(seen) < limit and attempts < 50 * limit:
        attempts += 1
        ex = Executor(programs, config, rows, check_invariants=check_invariants)
        path = []
        while enabled := ex.enabled():
            choice = rng.choice(enabled)
            path.append(choice)
            ex.step(choice)
        if tuple(path) in seen:
            continue
        seen.add(tuple(path))
        yield ex.finish()
