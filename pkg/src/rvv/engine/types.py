from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .errors import ValueOutOfRange

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class CCMode(enum.Enum):
    LSCC = "lscc"
    MVCC = "mvcc"


class Isolation(enum.Enum):
    READ_COMMITTED = "rc"
    REPEATABLE_READ = "rr"
    SNAPSHOT = "snap"
    SERIALIZABLE = "ser"

    @classmethod
    def parse(cls, text: str) -> "Isolation":
        t = text.strip().lower()
        for iso in cls:
            if t in (iso.value, iso.name.lower()):
                return iso
        raise ValueError(f"unknown isolation level {text!r}")

    def valid_for(self, mode: CCMode) -> bool:
        if self is Isolation.READ_COMMITTED:
            return True
        if self is Isolation.SNAPSHOT:
            return mode is CCMode.MVCC
        return mode is CCMode.LSCC


class TxnState(enum.Enum):
    ACTIVE = "ACTIVE"
    BLOCKED = "BLOCKED"
    COMMITTED = "COMMITTED"
    ABORTED = "ABORTED"


class LockMode(enum.IntEnum):
    S = 1
    U = 2
    X = 3


_COMPATIBLE = {
    (LockMode.S, LockMode.S),
    (LockMode.S, LockMode.U),
    (LockMode.U, LockMode.S),
}


def compatible(held: LockMode, requested: LockMode) -> bool:
    return (held, requested) in _COMPATIBLE


class StampKind(enum.Enum):
    COUNTER = "counter"
    COARSE = "coarse"
    SCN = "scn"
    # Global per-database counter; LSCC writes take U before X as a side effect.
    ROWVERSION = "rowversion"

    @classmethod
    def parse(cls, text: str) -> "StampKind":
        t = text.strip().lower()
        aliases = {"coarse-timestamp": "coarse", "commit-scn": "scn"}
        return cls(aliases.get(t, t))


@dataclass(frozen=True, order=True)
class RowKey:
    table: str
    id: str

    def __post_init__(self) -> None:
        if not self.table or not self.id:
            raise ValueError("RowKey needs a non-empty table and id")

    @classmethod
    def parse(cls, text: str) -> "RowKey":
        table, sep, ident = text.partition(":")
        if not sep:
            raise ValueError(f"expected table:id, got {text!r}")
        return cls(table, ident)

    def __str__(self) -> str:
        return f"{self.table}:{self.id}"


class VersionStamp:
    """Server-maintained row version.

    ``value`` is ``None`` for the INDETERMINATE stamp, which compares unequal
    to everything, itself included.
    """

    __slots__ = ("kind", "value")

    def __init__(self, kind: StampKind, value: Optional[int]):
        if value is not None and value < 0:
            raise ValueError("stamp values are unsigned")
        self.kind = kind
        self.value = value

    @classmethod
    def indeterminate(cls, kind: StampKind) -> "VersionStamp":
        return cls(kind, None)

    @property
    def is_indeterminate(self) -> bool:
        return self.value is None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VersionStamp):
            return NotImplemented
        if self.value is None or other.value is None:
            return False
        return self.kind is other.kind and self.value == other.value

    def __hash__(self) -> int:
        return hash((self.kind, self.value))

    def __str__(self) -> str:
        return f"{self.kind.value}:{'INDETERMINATE' if self.value is None else self.value}"

    def __repr__(self) -> str:
        return f"VersionStamp({self})"

    @classmethod
    def parse(cls, text: str) -> "VersionStamp":
        kind, sep, value = text.partition(":")
        if not sep:
            raise ValueError(f"expected kind:value stamp, got {text!r}")
        k = StampKind.parse(kind)
        if value == "INDETERMINATE":
            return cls(k, None)
        if not value.isdigit():
            raise ValueError(f"bad stamp value {value!r}")
        return cls(k, int(value))


@dataclass(frozen=True)
class EngineConfig:
    cc_mode: CCMode = CCMode.LSCC
    stamping: StampKind = StampKind.COUNTER
    clock_resolution: int = 1

    def __post_init__(self) -> None:
        if self.clock_resolution < 1:
            raise ValueError("clock_resolution must be >= 1")


@dataclass
class Row:
    key: RowKey
    columns: dict[str, int]
    stamp: VersionStamp

    def __post_init__(self) -> None:
        if not self.columns:
            raise ValueError(f"row {self.key} has no columns")
        for name, value in self.columns.items():
            check_int64(name, value)


def check_int64(column: str, value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise TypeError(f"column {column} must hold an int, got {type(value).__name__}")
    if not INT64_MIN <= value <= INT64_MAX:
        raise ValueOutOfRange(f"{column}={value} does not fit a signed 64-bit integer")


@dataclass(frozen=True)
class ReadResult:
    value: int
    stamp: VersionStamp
    # Ordinal of the committed version the value came from (0 = as loaded).
    # Not a client-visible stamp; the anomaly detectors key on it.
    version: int
    own: bool = False


@dataclass(frozen=True)
class WriteTicket:
    key: RowKey
    values: dict[str, int]
    base_version: int


@dataclass(frozen=True)
class CommitReceipt:
    txn_id: str
    commit_seq: int
    installed: dict[RowKey, tuple[int, VersionStamp]] = field(default_factory=dict)


@dataclass
class Transaction:
    id: str
    cc_mode: CCMode
    isolation: Isolation
    start_seq: int
    snapshot_seq: Optional[int] = None
    state: TxnState = TxnState.ACTIVE
    read_set: dict[RowKey, VersionStamp] = field(default_factory=dict)
    write_set: dict[RowKey, dict[str, int]] = field(default_factory=dict)
    abort_error: Optional[Exception] = None

    @property
    def finished(self) -> bool:
        return self.state in (TxnState.COMMITTED, TxnState.ABORTED)
