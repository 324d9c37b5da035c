"""In-memory row store with locking (LSCC) and multiversion (MVCC) concurrency control.

The engine is a sequential state machine. A call that cannot proceed raises
:class:`WouldBlock` and leaves its request queued; the caller retries the same
call once the engine state has changed. Nothing here ever suspends a thread.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

import networkx as nx

from .errors import (
    DeadlockVictim,
    IndeterminateStamp,
    InvalidIsolationForMode,
    InvalidTransactionState,
    RowNotFound,
    SerializationConflict,
    UnknownColumn,
    WouldBlock,
)
from .locks import LockTable
from .types import (
    CCMode,
    CommitReceipt,
    EngineConfig,
    Isolation,
    LockMode,
    ReadResult,
    Row,
    RowKey,
    StampKind,
    Transaction,
    TxnState,
    VersionStamp,
    WriteTicket,
    check_int64,
)


@dataclass(frozen=True)
class _Version:
    version: int
    commit_seq: int
    columns: dict[str, int]
    stamp: VersionStamp
    writer: Optional[str]


def normalize_stamp(stamp: VersionStamp) -> int:
    """Map a stamp onto an unsigned 64-bit integer for client-side comparison."""
    if stamp.is_indeterminate:
        raise IndeterminateStamp(f"cannot normalize {stamp}")
    return stamp.value


class Engine:
    def __init__(self, config: EngineConfig = EngineConfig(), rows: Iterable[Row] = ()):
        self.config = config
        self.commit_seq = 0
        self.clock = 0
        self._start_seq = 0
        self._rowversion = 0
        self._rows: dict[RowKey, list[_Version]] = {}
        self._txns: dict[str, Transaction] = {}
        self._locks = LockTable()
        self._writers: dict[RowKey, str] = {}
        self._write_queue: dict[RowKey, list[str]] = {}
        self._cond_acquired: dict[str, RowKey] = {}
        self.deadlock_victims: list[str] = []
        for row in rows:
            self.load_row(row)

    # -- store ---------------------------------------------------------------

    def load_row(self, row: Row) -> None:
        """Insert ``row`` as committed state.

        A stamp of a different kind than the engine's stamping is re-labelled
        with the engine's kind, keeping its value.
        """
        if row.key in self._rows:
            raise ValueError(f"duplicate row {row.key}")
        stamp = row.stamp
        if stamp.is_indeterminate:
            raise ValueError(f"row {row.key} loaded with an indeterminate stamp")
        if stamp.kind is not self.config.stamping:
            stamp = VersionStamp(self.config.stamping, stamp.value)
        kind = stamp.kind
        if kind is StampKind.SCN:
            self.commit_seq = max(self.commit_seq, stamp.value)
        elif kind is StampKind.ROWVERSION:
            self._rowversion = max(self._rowversion, stamp.value)
        elif kind is StampKind.COARSE:
            self.clock = max(self.clock, stamp.value)
        self._rows[row.key] = [_Version(0, 0, dict(row.columns), stamp, None)]

    def _latest(self, key: RowKey) -> _Version:
        try:
            return self._rows[key][-1]
        except KeyError:
            raise RowNotFound(str(key)) from None

    def row(self, key: RowKey) -> Row:
        v = self._latest(key)
        return Row(key, dict(v.columns), v.stamp)

    def rows(self) -> list[Row]:
        return [self.row(k) for k in sorted(self._rows)]

    def keys(self) -> list[RowKey]:
        return sorted(self._rows)

    def value(self, key: RowKey, column: str) -> int:
        cols = self._latest(key).columns
        if column not in cols:
            raise UnknownColumn(f"{key}.{column}")
        return cols[column]

    def current_stamp(self, key: RowKey) -> VersionStamp:
        """Stamp as a reader outside any transaction would see it."""
        stamp = self._latest(key).stamp
        if self.config.stamping is StampKind.SCN and self._write_locked(key, None):
            return VersionStamp.indeterminate(stamp.kind)
        return stamp

    def version_history(self, key: RowKey) -> list[tuple[int, int, VersionStamp, Optional[str]]]:
        return [(v.version, v.commit_seq, v.stamp, v.writer) for v in self._rows[key]]

    def tick(self, n: int = 1) -> int:
        """Advance the coarse timestamp clock."""
        if n < 0:
            raise ValueError("clock cannot go backwards")
        self.clock += n
        return self.clock

    # -- transactions --------------------------------------------------------

    @property
    def transactions(self) -> dict[str, Transaction]:
        return dict(self._txns)

    def begin(
        self,
        isolation: Isolation,
        cc_mode: Optional[CCMode] = None,
        txn_id: Optional[str] = None,
    ) -> Transaction:
        mode = cc_mode or self.config.cc_mode
        if not isolation.valid_for(mode):
            raise InvalidIsolationForMode(f"{isolation.name} is not available under {mode.name}")
        if mode is not self.config.cc_mode:
            raise InvalidIsolationForMode(
                f"engine runs {self.config.cc_mode.name}; cannot begin a {mode.name} transaction"
            )
        self._start_seq += 1
        if txn_id is None:
            txn_id = f"T{self._start_seq}"
        if txn_id in self._txns:
            raise ValueError(f"transaction id {txn_id} already used")
        txn = Transaction(
            id=txn_id,
            cc_mode=mode,
            isolation=isolation,
            start_seq=self._start_seq,
            snapshot_seq=self.commit_seq if mode is CCMode.MVCC else None,
        )
        self._txns[txn_id] = txn
        return txn

    def _live(self, txn: Union[Transaction, str]) -> Transaction:
        t = self._txns[txn if isinstance(txn, str) else txn.id]
        if t.state is TxnState.ABORTED and t.abort_error is not None:
            raise t.abort_error
        if t.finished:
            raise InvalidTransactionState(f"{t.id} is {t.state.value}")
        return t

    def read(self, txn: Union[Transaction, str], key: RowKey, column: str) -> ReadResult:
        t = self._live(txn)
        latest = self._latest(key)
        if column not in latest.columns:
            raise UnknownColumn(f"{key}.{column}")
        own = key in t.write_set and column in t.write_set[key]
        if t.cc_mode is CCMode.LSCC:
            self._lock(t, key, LockMode.S)
            visible = latest
            if t.isolation is Isolation.READ_COMMITTED and self._locks.mode_of(t.id, key) is LockMode.S:
                self._wake(self._locks.release(t.id, key))
        elif own or t.isolation is Isolation.READ_COMMITTED:
            visible = latest
        else:
            visible = next(v for v in reversed(self._rows[key]) if v.commit_seq <= t.snapshot_seq)
        value = t.write_set[key][column] if own else visible.columns[column]
        stamp = visible.stamp
        if self.config.stamping is StampKind.SCN and self._write_locked(key, t.id):
            stamp = VersionStamp.indeterminate(stamp.kind)
        t.read_set[key] = stamp
        return ReadResult(value, stamp, visible.version, own)

    def write(
        self,
        txn: Union[Transaction, str],
        key: RowKey,
        updates: Mapping[str, int],
        relative: bool = False,
    ) -> WriteTicket:
        """Buffer an update of ``key``; ``relative`` adds the values to the current ones."""
        t = self._live(txn)
        latest = self._latest(key)
        self._check_columns(key, latest, updates)
        self._acquire_write(t, key)
        return self._buffer(t, key, latest, updates, relative)

    def conditional_write(
        self,
        txn: Union[Transaction, str],
        key: RowKey,
        updates: Mapping[str, int],
        expected: VersionStamp,
        relative: bool = False,
    ) -> int:
        """Write only if the committed stamp still equals ``expected``; return rows affected."""
        t = self._live(txn)
        latest = self._latest(key)
        self._check_columns(key, latest, updates)
        if t.id not in self._cond_acquired and not self._holds_any(t, key):
            self._cond_acquired[t.id] = key
        self._acquire_write(t, key)
        fresh = self._cond_acquired.pop(t.id, None) == key
        if latest.stamp == expected:
            self._buffer(t, key, latest, updates, relative)
            return 1
        if fresh and key not in t.write_set:
            self._release_write(t, key)
        return 0

    def commit(self, txn: Union[Transaction, str]) -> CommitReceipt:
        t = self._live(txn)
        if t.state is not TxnState.ACTIVE:
            raise InvalidTransactionState(f"{t.id} is {t.state.value}")
        self.commit_seq += 1
        seq = self.commit_seq
        installed: dict[RowKey, tuple[int, VersionStamp]] = {}
        for key in sorted(t.write_set):
            prev = self._rows[key][-1]
            stamp = self._next_stamp(prev.stamp, seq)
            cols = {**prev.columns, **t.write_set[key]}
            self._rows[key].append(_Version(prev.version + 1, seq, cols, stamp, t.id))
            installed[key] = (prev.version + 1, stamp)
        t.state = TxnState.COMMITTED
        self._release_all(t, committed=True)
        return CommitReceipt(t.id, seq, installed)

    def abort(self, txn: Union[Transaction, str]) -> None:
        t = self._txns[txn if isinstance(txn, str) else txn.id]
        if t.finished:
            raise InvalidTransactionState(f"{t.id} is {t.state.value}")
        self._terminate(t, None)

    def detect_deadlock(self) -> Optional[str]:
        """Abort the youngest member of one wait-for cycle, if any, and return its id."""
        graph = nx.DiGraph()
        for waiter, blockers in sorted(self.waits_for().items()):
            for b in sorted(blockers):
                graph.add_edge(waiter, b)
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return None
        members = {u for u, _ in cycle}
        victim = max(members, key=lambda tid: self._txns[tid].start_seq)
        self.deadlock_victims.append(victim)
        self._terminate(
            self._txns[victim],
            DeadlockVictim(victim, f"deadlock among {', '.join(sorted(members))}"),
        )
        return victim

    def waits_for(self) -> dict[str, set[str]]:
        graph = self._locks.waits_for()
        for key, waiters in self._write_queue.items():
            holder = self._writers.get(key)
            for w in waiters:
                graph.setdefault(w, set()).update({holder} if holder else set())
        return graph

    def lock_mode(self, txn: Union[Transaction, str], key: RowKey) -> Optional[LockMode]:
        return self._locks.mode_of(txn if isinstance(txn, str) else txn.id, key)

    def check_invariants(self) -> None:
        """Raise AssertionError when lock or queue bookkeeping is inconsistent."""
        self._locks.check_safety()
        blocked = {tid for tid, t in self._txns.items() if t.state is TxnState.BLOCKED}
        waiting = set(self.waits_for())
        if blocked != waiting:
            raise AssertionError(f"blocked {sorted(blocked)} != waiting {sorted(waiting)}")
        for tid in blocked:
            entries = sum(q.count(tid) for q in self._write_queue.values())
            entries += sum(r.txn == tid for k in self._rows for r in self._locks.queue(k))
            if entries != 1:
                raise AssertionError(f"{tid} sits in {entries} wait queues")

    def assert_acyclic(self) -> None:
        graph = nx.DiGraph((w, b) for w, bs in self.waits_for().items() for b in bs)
        if not nx.is_directed_acyclic_graph(graph):
            raise AssertionError("wait-for graph has a cycle")

    # -- internals -----------------------------------------------------------

    def _check_columns(self, key: RowKey, latest: _Version, updates: Mapping[str, int]) -> None:
        if not updates:
            raise ValueError("empty column update")
        for column, value in updates.items():
            if column not in latest.columns:
                raise UnknownColumn(f"{key}.{column}")
            check_int64(column, value)

    def _buffer(
        self,
        t: Transaction,
        key: RowKey,
        latest: _Version,
        updates: Mapping[str, int],
        relative: bool,
    ) -> WriteTicket:
        pending = t.write_set.get(key, {})
        new = {}
        for column, value in updates.items():
            base = pending.get(column, latest.columns[column])
            new[column] = base + value if relative else value
            check_int64(column, new[column])
        t.write_set.setdefault(key, {}).update(new)
        return WriteTicket(key, {**latest.columns, **t.write_set[key]}, latest.version)

    def _lock(self, t: Transaction, key: RowKey, mode: LockMode) -> None:
        if self._locks.acquire(t.id, key, mode):
            t.state = TxnState.ACTIVE
            return
        t.state = TxnState.BLOCKED
        raise WouldBlock(t.id, key, tuple(sorted(self.waits_for().get(t.id, ()))))

    def _holds_any(self, t: Transaction, key: RowKey) -> bool:
        if t.cc_mode is CCMode.LSCC:
            return self._locks.mode_of(t.id, key) is not None
        return self._writers.get(key) == t.id

    def _acquire_write(self, t: Transaction, key: RowKey) -> None:
        if t.cc_mode is CCMode.LSCC:
            held = self._locks.mode_of(t.id, key)
            if self.config.stamping is StampKind.ROWVERSION and (held is None or held < LockMode.U):
                self._lock(t, key, LockMode.U)
            self._lock(t, key, LockMode.X)
            return
        latest = self._rows[key][-1]
        if t.isolation is Isolation.SNAPSHOT and latest.commit_seq > t.snapshot_seq:
            err = SerializationConflict(t.id, f"{key} changed after the snapshot")
            self._terminate(t, err)
            raise err
        holder = self._writers.get(key)
        if holder is None:
            self._writers[key] = t.id
        elif holder != t.id:
            queue = self._write_queue.setdefault(key, [])
            if t.id not in queue:
                queue.append(t.id)
            t.state = TxnState.BLOCKED
            raise WouldBlock(t.id, key, (holder,))
        t.state = TxnState.ACTIVE

    def _release_write(self, t: Transaction, key: RowKey) -> None:
        if t.cc_mode is CCMode.LSCC:
            self._wake(self._locks.release(t.id, key))
        elif self._writers.get(key) == t.id:
            del self._writers[key]
            self._hand_over(key)

    def _hand_over(self, key: RowKey) -> None:
        queue = self._write_queue.get(key)
        if queue:
            nxt = queue.pop(0)
            self._writers[key] = nxt
            self._txns[nxt].state = TxnState.ACTIVE

    def _write_locked(self, key: RowKey, reader: Optional[str]) -> bool:
        if self.config.cc_mode is CCMode.LSCC:
            return self._locks.is_x_locked_by_other(key, reader)
        holder = self._writers.get(key)
        return holder is not None and holder != reader

    def _wake(self, txn_ids: list[str]) -> None:
        for tid in txn_ids:
            t = self._txns[tid]
            if t.state is TxnState.BLOCKED:
                t.state = TxnState.ACTIVE

    def _next_stamp(self, prev: VersionStamp, seq: int) -> VersionStamp:
        kind = self.config.stamping
        if kind is StampKind.COUNTER:
            value = prev.value + 1
        elif kind is StampKind.COARSE:
            value = self.clock - self.clock % self.config.clock_resolution
        elif kind is StampKind.SCN:
            value = seq
        else:
            self._rowversion += 1
            value = self._rowversion
        return VersionStamp(kind, value)

    def _terminate(self, t: Transaction, error: Optional[Exception]) -> None:
        t.write_set.clear()
        t.state = TxnState.ABORTED
        t.abort_error = error
        self._cond_acquired.pop(t.id, None)
        self._release_all(t, committed=False)

    def _release_all(self, t: Transaction, committed: bool) -> None:
        if t.cc_mode is CCMode.LSCC:
            self._wake(self._locks.release_all(t.id))
            return
        for queue in self._write_queue.values():
            if t.id in queue:
                queue.remove(t.id)
        for key in sorted(k for k, h in self._writers.items() if h == t.id):
            del self._writers[key]
            if committed:
                # first writer won: everyone queued behind it loses
                for loser in self._write_queue.pop(key, []):
                    self._terminate(
                        self._txns[loser],
                        SerializationConflict(loser, f"{t.id} committed a write to {key} first"),
                    )
            else:
                self._hand_over(key)
