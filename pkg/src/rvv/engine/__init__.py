from .core import Engine, normalize_stamp
from .errors import (
    DeadlockVictim,
    EngineError,
    IndeterminateStamp,
    InvalidIsolationForMode,
    InvalidTransactionState,
    RowNotFound,
    SerializationConflict,
    TransactionAborted,
    UnknownColumn,
    ValueOutOfRange,
    WouldBlock,
)
from .locks import LockTable
from .snapshot import SnapshotFormatError, digest, dump_rows, load_rows
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
)

__all__ = [
    "CCMode",
    "CommitReceipt",
    "DeadlockVictim",
    "Engine",
    "EngineConfig",
    "EngineError",
    "IndeterminateStamp",
    "InvalidIsolationForMode",
    "InvalidTransactionState",
    "Isolation",
    "LockMode",
    "LockTable",
    "ReadResult",
    "Row",
    "RowKey",
    "RowNotFound",
    "SerializationConflict",
    "SnapshotFormatError",
    "StampKind",
    "Transaction",
    "TransactionAborted",
    "TxnState",
    "UnknownColumn",
    "ValueOutOfRange",
    "VersionStamp",
    "WouldBlock",
    "WriteTicket",
    "digest",
    "dump_rows",
    "load_rows",
    "normalize_stamp",
]
