"""Row lock manager with S/U/X modes, FIFO queues and upgrade priority."""

from __future__ import annotations

from dataclasses import dataclass

from .types import LockMode, RowKey, compatible


@dataclass
class LockRequest:
    txn: str
    mode: LockMode
    upgrade: bool


class LockTable:
    def __init__(self) -> None:
        self._granted: dict[RowKey, dict[str, LockMode]] = {}
        self._queue: dict[RowKey, list[LockRequest]] = {}
        self._waiting: dict[str, RowKey] = {}

    def mode_of(self, txn: str, key: RowKey) -> LockMode | None:
        return self._granted.get(key, {}).get(txn)

    def holders(self, key: RowKey) -> dict[str, LockMode]:
        return dict(self._granted.get(key, {}))

    def queue(self, key: RowKey) -> list[LockRequest]:
        return list(self._queue.get(key, []))

    def waiting_on(self, txn: str) -> RowKey | None:
        return self._waiting.get(txn)

    def is_x_locked_by_other(self, key: RowKey, txn: str) -> bool:
        return any(m is LockMode.X and t != txn for t, m in self._granted.get(key, {}).items())

    def acquire(self, txn: str, key: RowKey, mode: LockMode) -> bool:
        """Grant ``mode`` on ``key`` or queue the request. Idempotent while queued."""
        held = self.mode_of(txn, key)
        if held is not None and held >= mode:
            return True
        queue = self._queue.setdefault(key, [])
        for req in queue:
            if req.txn == txn:
                if req.mode >= mode:
                    return False
                raise RuntimeError(f"{txn} already waits for {req.mode.name} on {key}")
        if txn in self._waiting:
            raise RuntimeError(f"{txn} is already blocked on {self._waiting[txn]}")
        upgrade = held is not None
        if self._grantable(txn, key, mode) and (upgrade or not queue):
            self._granted.setdefault(key, {})[txn] = mode
            return True
        req = LockRequest(txn, mode, upgrade)
        if upgrade:
            pos = 0
            while pos < len(queue) and queue[pos].upgrade:
                pos += 1
            queue.insert(pos, req)
        else:
            queue.append(req)
        self._waiting[txn] = key
        return False

    def release(self, txn: str, key: RowKey) -> list[str]:
        granted = self._granted.get(key)
        if granted is None or txn not in granted:
            return []
        del granted[txn]
        return self._grant_waiters(key)

    def release_all(self, txn: str) -> list[str]:
        """Drop every lock and queued request of ``txn``; return newly granted waiters."""
        woken: list[str] = []
        key = self._waiting.pop(txn, None)
        touched = set()
        if key is not None:
            self._queue[key] = [r for r in self._queue[key] if r.txn != txn]
            touched.add(key)
        for k, granted in self._granted.items():
            if txn in granted:
                del granted[txn]
                touched.add(k)
        for k in sorted(touched):
            woken.extend(self._grant_waiters(k))
        return woken

    def _grantable(self, txn: str, key: RowKey, mode: LockMode) -> bool:
        return all(
            compatible(m, mode) for t, m in self._granted.get(key, {}).items() if t != txn
        )

    def _grant_waiters(self, key: RowKey) -> list[str]:
        queue = self._queue.get(key, [])
        woken = []
        while queue and self._grantable(queue[0].txn, key, queue[0].mode):
            req = queue.pop(0)
            self._granted.setdefault(key, {})[req.txn] = req.mode
            del self._waiting[req.txn]
            woken.append(req.txn)
        return woken

    def waits_for(self) -> dict[str, set[str]]:
        """Wait-for graph: each waiter points at incompatible holders and
        incompatible requests queued ahead of it."""
        graph: dict[str, set[str]] = {}
        for key in sorted(self._queue):
            queue = self._queue[key]
            granted = self._granted.get(key, {})
            for i, req in enumerate(queue):
                edges = graph.setdefault(req.txn, set())
                edges.update(t for t, m in granted.items() if t != req.txn and not compatible(m, req.mode))
                edges.update(
                    q.txn for q in queue[:i] if q.txn != req.txn and not compatible(q.mode, req.mode)
                )
        return graph

    def check_safety(self) -> None:
        """Raise AssertionError if incompatible locks are co-granted or queues are inconsistent."""
        for key, granted in self._granted.items():
            items = sorted(granted.items())
            for i, (t1, m1) in enumerate(items):
                for t2, m2 in items[i + 1 :]:
                    if not (compatible(m1, m2) and compatible(m2, m1)):
                        raise AssertionError(f"{t1}:{m1.name} and {t2}:{m2.name} both hold {key}")
            if sum(m is LockMode.U for m in granted.values()) > 1:
                raise AssertionError(f"two U holders on {key}")
        seen: dict[str, int] = {}
        for key, queue in self._queue.items():
            for req in queue:
                seen[req.txn] = seen.get(req.txn, 0) + 1
                if self._waiting.get(req.txn) != key:
                    raise AssertionError(f"{req.txn} queued on {key} but not marked waiting there")
        if any(n != 1 for n in seen.values()) or set(seen) != set(self._waiting):
            raise AssertionError("a blocked transaction must sit in exactly one queue entry")
