"""Typed failures raised by the engine API."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for every error the engine raises."""


class InvalidIsolationForMode(EngineError):
    pass


class RowNotFound(EngineError):
    pass


class UnknownColumn(EngineError):
    pass


class ValueOutOfRange(EngineError):
    pass


class InvalidTransactionState(EngineError):
    pass


class IndeterminateStamp(EngineError):
    pass


class WouldBlock(EngineError):
    """The call cannot complete until another transaction releases ``key``.

    The request stays queued inside the engine; retrying the identical call
    later either completes it or raises ``WouldBlock`` again without
    queueing twice.
    """

    def __init__(self, txn_id: str, key: object, waiting_for: tuple[str, ...]):
        self.txn_id = txn_id
        self.key = key
        self.waiting_for = waiting_for
        super().__init__(f"{txn_id} waits on {key} held by {', '.join(waiting_for) or '?'}")


class TransactionAborted(EngineError):
    """The engine aborted the transaction on its own initiative."""

    def __init__(self, txn_id: str, detail: str = ""):
        self.txn_id = txn_id
        super().__init__(f"{txn_id}: {detail}" if detail else txn_id)


class DeadlockVictim(TransactionAborted):
    pass


class SerializationConflict(TransactionAborted):
    pass
