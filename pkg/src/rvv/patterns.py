"""Client-side update patterns written as programs for the schedule executor.

Each pattern is a generator function: ``yield from pattern(...)`` inside a
program body, and the value it returns is a :class:`PatternOutcome`. The
``*_program`` builders wrap a pattern (plus the context-capturing read
transaction, where the pattern needs one) into a :class:`Program`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from .engine import (
    CCMode,
    DeadlockVictim,
    EngineConfig,
    Isolation,
    ReadResult,
    Row,
    RowKey,
    SerializationConflict,
    StampKind,
    TransactionAborted,
    VersionStamp,
)
from .schedule import (
    Abort,
    Begin,
    Commit,
    CondWrite,
    History,
    HistoryError,
    IllFormedHistory,
    Program,
    ProgramError,
    Read,
    Write,
    execute,
    parse_history,
)
from .schedule.trace import ExecutionTrace


class Status(enum.Enum):
    APPLIED = "APPLIED"
    CONFLICT_DETECTED = "CONFLICT_DETECTED"
    ABORTED_DEADLOCK = "ABORTED_DEADLOCK"
    ABORTED_SERIALIZATION = "ABORTED_SERIALIZATION"
    RETRIED_APPLIED = "RETRIED_APPLIED"

    @property
    def applied(self) -> bool:
        return self in (Status.APPLIED, Status.RETRIED_APPLIED)


@dataclass
class PatternOutcome:
    status: Status
    final_value: Optional[int] = None
    attempts: int = 1
    # (stamp the user saw, stamp found at re-check) per detected conflict
    observed_stamps: list[tuple[VersionStamp, VersionStamp]] = field(default_factory=list)
    attempt_statuses: list[Status] = field(default_factory=list)

    def __str__(self) -> str:
        value = "-" if self.final_value is None else self.final_value
        return f"{self.status.value} final={value} attempts={self.attempts}"


@dataclass(frozen=True)
class UserTransactionContext:
    """What the user saw in an earlier, already committed read transaction."""

    key: RowKey
    column: str
    read: ReadResult
    requested_delta: int

    @property
    def value_read(self) -> int:
        return self.read.value

    @property
    def stamp_read(self) -> VersionStamp:
        return self.read.stamp

    @property
    def new_value(self) -> int:
        return self.read.value + self.requested_delta


class RetriesExhausted(ProgramError):
    def __init__(self, attempts: int, observed: list):
        self.attempts = attempts
        self.observed = observed
        super().__init__(f"gave up after {attempts} attempts")


class MalformedHistory(IllFormedHistory):
    pass


def _aborted(exc: TransactionAborted) -> Status:
    if isinstance(exc, DeadlockVictim):
        return Status.ABORTED_DEADLOCK
    if isinstance(exc, SerializationConflict):
        return Status.ABORTED_SERIALIZATION
    raise exc


# -- patterns ------------------------------------------------------------------


def capture_context(key: RowKey, column: str, delta: int):
    """READ COMMITTED read transaction that commits immediately (one step)."""
    t = yield Begin(Isolation.READ_COMMITTED, ends_step=False)
    r = yield Read(t, key, column, ends_step=False)
    yield Commit(t)
    return UserTransactionContext(key, column, r, delta)


def blind_write(ctx: UserTransactionContext, isolation: Isolation = Isolation.READ_COMMITTED):
    """Anti-pattern: write ``value_read + delta`` without checking anything."""
    try:
        t = yield Begin(isolation, ends_step=False)
        yield Write(t, ctx.key, {ctx.column: ctx.new_value}, basis=ctx.read)
        yield Commit(t)
    except TransactionAborted as exc:
        status = _aborted(exc)
        return PatternOutcome(status, attempt_statuses=[status])
    return PatternOutcome(Status.APPLIED, ctx.new_value, attempt_statuses=[Status.APPLIED])


def sensitive_update(
    key: RowKey, column: str, delta: int, isolation: Isolation = Isolation.READ_COMMITTED
):
    """``SET col = col + delta`` in one transaction."""
    try:
        t = yield Begin(isolation, ends_step=False)
        ticket = yield Write(t, key, {column: delta}, relative=True)
        yield Commit(t)
    except TransactionAborted as exc:
        status = _aborted(exc)
        return PatternOutcome(status, attempt_statuses=[status])
    return PatternOutcome(Status.APPLIED, ticket.values[column], attempt_statuses=[Status.APPLIED])


def conditional_update(ctx: UserTransactionContext, isolation: Isolation = Isolation.READ_COMMITTED):
    """Write only if the row still carries the stamp the user saw; no read needed."""
    try:
        t = yield Begin(isolation, ends_step=False)
        n = yield CondWrite(
            t, ctx.key, {ctx.column: ctx.new_value}, ctx.stamp_read, basis=ctx.read
        )
        yield Commit(t)
    except TransactionAborted as exc:
        status = _aborted(exc)
        return PatternOutcome(status, attempt_statuses=[status])
    if n == 0:
        return PatternOutcome(Status.CONFLICT_DETECTED, attempt_statuses=[Status.CONFLICT_DETECTED])
    return PatternOutcome(Status.APPLIED, ctx.new_value, attempt_statuses=[Status.APPLIED])


def reselect_update(
    ctx: UserTransactionContext,
    isolation: Isolation = Isolation.REPEATABLE_READ,
    max_retries: int = 3,
):
    """Re-read the stamp under strong isolation and update only if unchanged.

    On a changed stamp the pair (seen, current) is recorded and, when retries
    remain, the fresh read becomes the new context: the delta is re-applied to
    the refreshed value. Engine aborts (deadlock victim, serialization
    conflict) also count as attempts and are retried with the same context.
    With ``max_retries=0`` the single attempt's status is returned; otherwise
    running out of attempts raises :class:`RetriesExhausted`.
    """
    if isolation is Isolation.READ_COMMITTED:
        raise ValueError("reselect_update needs REPEATABLE_READ, SERIALIZABLE or SNAPSHOT")
    observed: list[tuple[VersionStamp, VersionStamp]] = []
    statuses: list[Status] = []
    for attempt in range(1, max_retries + 2):
        try:
            t = yield Begin(isolation, ends_step=False)
            now = yield Read(t, ctx.key, ctx.column)
            if now.stamp == ctx.stamp_read:
                yield Write(t, ctx.key, {ctx.column: ctx.new_value}, basis=now)
                yield Commit(t)
                status = Status.APPLIED if attempt == 1 else Status.RETRIED_APPLIED
                statuses.append(status)
                return PatternOutcome(status, ctx.new_value, attempt, observed, statuses)
            observed.append((ctx.stamp_read, now.stamp))
            statuses.append(Status.CONFLICT_DETECTED)
            yield Commit(t)
            ctx = UserTransactionContext(ctx.key, ctx.column, now, ctx.requested_delta)
        except TransactionAborted as exc:
            statuses.append(_aborted(exc))
    if max_retries == 0:
        return PatternOutcome(statuses[-1], None, 1, observed, statuses)
    raise RetriesExhausted(max_retries + 1, observed)


def occ_update(
    key: RowKey,
    column: str,
    delta: int,
    strong: Isolation = Isolation.REPEATABLE_READ,
):
    """Read phase, then validation and write phase as one atomic unit.

    Validation re-reads the item under ``strong`` isolation and compares
    stamps; a mismatch aborts the transaction and reports a conflict.
    """
    t = yield Begin(Isolation.READ_COMMITTED, ends_step=False)
    seen = yield Read(t, key, column, ends_step=False)
    yield Commit(t)
    try:
        v = yield Begin(strong, ends_step=False)
        now = yield Read(v, key, column, ends_step=False)
        if now.stamp != seen.stamp:
            yield Abort(v)
            return PatternOutcome(
                Status.CONFLICT_DETECTED, observed_stamps=[(seen.stamp, now.stamp)],
                attempt_statuses=[Status.CONFLICT_DETECTED],
            )
        yield Write(v, key, {column: seen.value + delta}, basis=seen, ends_step=False)
        yield Commit(v)
    except TransactionAborted as exc:
        status = _aborted(exc)
        return PatternOutcome(status, attempt_statuses=[status])
    return PatternOutcome(Status.APPLIED, seen.value + delta, attempt_statuses=[Status.APPLIED])


# -- programs ------------------------------------------------------------------

PATTERNS = ("blind", "sensitive", "conditional", "reselect", "occ")


def strong_isolation(mode: CCMode) -> Isolation:
    return Isolation.SNAPSHOT if mode is CCMode.MVCC else Isolation.REPEATABLE_READ


def pattern_program(
    name: str,
    pattern: str,
    key: RowKey,
    column: str,
    delta: int,
    isolation: Optional[Isolation] = None,
    cc_mode: CCMode = CCMode.LSCC,
    max_retries: int = 3,
) -> Program:
    """Build a named program running ``pattern`` for a ``delta`` change of ``key.column``.

    Patterns that act on a user context first run the capturing read
    transaction as their own step.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}; expected one of {', '.join(PATTERNS)}")
    if isolation is None:
        isolation = strong_isolation(cc_mode) if pattern == "reselect" else Isolation.READ_COMMITTED

    def body():
        if pattern == "sensitive":
            return (yield from sensitive_update(key, column, delta, isolation))
        if pattern == "occ":
            strong = isolation if isolation is not Isolation.READ_COMMITTED else strong_isolation(cc_mode)
            return (yield from occ_update(key, column, delta, strong))
        ctx = yield from capture_context(key, column, delta)
        if pattern == "blind":
            return (yield from blind_write(ctx, isolation))
        if pattern == "conditional":
            return (yield from conditional_update(ctx, isolation))
        return (yield from reselect_update(ctx, isolation, max_retries))

    sizes = {"blind": 3, "sensitive": 2, "conditional": 3, "reselect": 4, "occ": 2}
    return Program(name, body, sizes[pattern])


# -- optimistic histories ------------------------------------------------------


def occ_history_run(
    history: Union[History, str],
    config: Optional[EngineConfig] = None,
    rows: Optional[list[Row]] = None,
) -> tuple[dict[str, str], ExecutionTrace]:
    """Run a history where every transaction is optimistic.

    Returns the terminal status of each transaction (``COMMITTED``,
    ``ABORTED`` or ``ACTIVE``) together with the trace. When no rows are
    given, each item becomes a row ``t:<item>`` with ``v = 1000``.
    """
    try:
        if isinstance(history, str):
            history = parse_history(history)
        history = history.with_occ()
    except HistoryError as exc:
        raise MalformedHistory(exc.message, exc.pos) from exc
    config = config or EngineConfig(CCMode.LSCC, StampKind.COUNTER)
    if rows is None:
        rows = [Row(RowKey("t", item), {"v": 1000}, VersionStamp(config.stamping, 0)) for item in history.items]
    trace = execute(history, config, rows)
    return {t: str(trace.outcomes[t]) for t in history.txns}, trace
