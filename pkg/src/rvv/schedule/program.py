"""Coroutine protocol between transaction programs and the executor.

A program is a generator that yields request objects and receives each
request's result back (or has the engine error thrown into it). A request
with ``ends_step=False`` is fused with the following request into one
scheduling step, which is how atomic units are expressed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Generator, Mapping, Optional

from ..engine.types import Isolation, ReadResult, RowKey, Transaction, VersionStamp

ProgramBody = Generator["Request", Any, Any]


@dataclass
class Request:
    ends_step: bool = field(default=True, kw_only=True)
    label: Optional[str] = field(default=None, kw_only=True)


@dataclass
class Begin(Request):
    isolation: Isolation
    txn_id: Optional[str] = None


@dataclass
class Read(Request):
    txn: Transaction
    key: RowKey
    column: str


@dataclass
class Write(Request):
    txn: Transaction
    key: RowKey
    updates: Mapping[str, int]
    relative: bool = False
    # Read whose value this write was computed from; None means the current value.
    basis: Optional[ReadResult] = None


@dataclass
class CondWrite(Request):
    txn: Transaction
    key: RowKey
    updates: Mapping[str, int]
    expected: VersionStamp
    relative: bool = False
    basis: Optional[ReadResult] = None


@dataclass
class Commit(Request):
    txn: Transaction


@dataclass
class Abort(Request):
    txn: Transaction


@dataclass
class Tick(Request):
    n: int = 1


@dataclass
class Note(Request):
    """No-op step that only leaves ``text`` in the trace."""

    text: str = ""


@dataclass
class Program:
    name: str
    body: Callable[[], ProgramBody]
    # Nominal number of scheduling steps, used for the exhaustive bound.
    size: int
