"""Transaction history notation: parsing, formatting and well-formedness.

Operations are whitespace- or comma-separated tokens::

    rA(x)  wA(x)  wA(x,k)  valA  cA  aA  tick

Header lines declare per-transaction settings::

    txn A iso=rr mode=LSCC delta=-100 occ

``#`` starts a comment running to the end of the line.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from ..engine.types import CCMode, Isolation

_ALNUM = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789")
_ITEM_CHARS = _ALNUM | frozenset("_.-")


class OpKind(enum.Enum):
    READ = "r"
    WRITE = "w"
    COND_WRITE = "wc"
    VALIDATE = "val"
    COMMIT = "c"
    ABORT = "a"
    TICK = "tick"


@dataclass(frozen=True)
class Position:
    offset: int
    line: int
    column: int


@dataclass(frozen=True)
class Operation:
    kind: OpKind
    txn: Optional[str] = None
    item: Optional[str] = None
    cond: Optional[str] = None
    pos: Optional[Position] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        needs_item = self.kind in (OpKind.READ, OpKind.WRITE, OpKind.COND_WRITE)
        if needs_item != (self.item is not None):
            raise ValueError(f"{self.kind.name} {'requires' if needs_item else 'takes no'} item")
        if (self.kind is OpKind.TICK) != (self.txn is None):
            raise ValueError("only TICK has no transaction")
        if (self.kind is OpKind.COND_WRITE) != (self.cond is not None):
            raise ValueError("a condition goes with COND_WRITE only")

    def text(self) -> str:
        k = self.kind
        if k is OpKind.TICK:
            return "tick"
        if k is OpKind.READ:
            return f"r{self.txn}({self.item})"
        if k is OpKind.WRITE:
            return f"w{self.txn}({self.item})"
        if k is OpKind.COND_WRITE:
            return f"w{self.txn}({self.item},{self.cond})"
        return f"{k.value}{self.txn}"

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True)
class TxnDecl:
    txn: str
    isolation: Optional[Isolation] = None
    mode: Optional[CCMode] = None
    occ: bool = False
    delta: Optional[int] = None
    pos: Optional[Position] = field(default=None, compare=False, repr=False)

    def text(self) -> str:
        parts = [f"txn {self.txn}"]
        if self.isolation is not None:
            parts.append(f"iso={self.isolation.value}")
        if self.mode is not None:
            parts.append(f"mode={self.mode.name}")
        if self.delta is not None:
            parts.append(f"delta={self.delta}")
        if self.occ:
            parts.append("occ")
        return " ".join(parts)


@dataclass(frozen=True)
class History:
    operations: tuple[Operation, ...]
    decls: dict[str, TxnDecl] = field(default_factory=dict)

    @property
    def txns(self) -> list[str]:
        """Transactions in order of first appearance."""
        seen: dict[str, None] = {}
        for op in self.operations:
            if op.txn is not None:
                seen.setdefault(op.txn, None)
        return list(seen)

    @property
    def items(self) -> list[str]:
        seen: dict[str, None] = {}
        for op in self.operations:
            if op.item is not None:
                seen.setdefault(op.item, None)
        return list(seen)

    def ops_of(self, txn: str) -> list[Operation]:
        return [op for op in self.operations if op.txn == txn]

    def is_occ(self, txn: str) -> bool:
        decl = self.decls.get(txn)
        if decl is not None:
            return decl.occ
        return any(op.kind is OpKind.VALIDATE for op in self.ops_of(txn))

    def with_occ(self) -> "History":
        """Copy in which every transaction runs the optimistic protocol."""
        decls = dict(self.decls)
        for txn in self.txns:
            d = decls.get(txn)
            decls[txn] = (
                TxnDecl(txn, occ=True)
                if d is None
                else TxnDecl(d.txn, d.isolation, d.mode, True, d.delta, d.pos)
            )
        return History(self.operations, decls)


class HistoryError(ValueError):
    def __init__(self, message: str, pos: Optional[Position]):
        self.message = message
        self.pos = pos
        self.offset = pos.offset if pos else 0
        self.line = pos.line if pos else 1
        self.column = pos.column if pos else 1
        super().__init__(f"{self.line}:{self.column}: {message}")


class ParseError(HistoryError):
    def __init__(self, pos: Position, expected: frozenset[str], found: str):
        self.expected = expected
        self.found = found
        shown = ", ".join(repr(e) for e in sorted(expected))
        super().__init__(f"expected one of {shown}, found {found!r}", pos)


class IllFormedHistory(HistoryError):
    pass


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.i = 0
        self.line = 1
        self.line_start = 0

    def pos(self) -> Position:
        return Position(self.i, self.line, self.i - self.line_start + 1)

    def peek(self) -> str:
        return self.text[self.i] if self.i < len(self.text) else ""

    def found(self) -> str:
        c = self.peek()
        return c if c else "end of input"

    def advance(self) -> str:
        c = self.text[self.i]
        self.i += 1
        if c == "\n":
            self.line += 1
            self.line_start = self.i
        return c

    def fail(self, expected: set[str] | frozenset[str]) -> ParseError:
        return ParseError(self.pos(), frozenset(expected), self.found())

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.fail({ch})
        self.advance()

    def word(self, chars: frozenset[str], what: str) -> str:
        start = self.i
        while self.peek() and self.peek() in chars:
            self.advance()
        if self.i == start:
            raise self.fail({what})
        return self.text[start : self.i]

    def skip_blank(self, newlines: bool) -> None:
        while True:
            c = self.peek()
            if c in (" ", "\t", "\r") and c:
                self.advance()
            elif c == "\n" and newlines:
                self.advance()
            elif c == "#":
                while self.peek() and self.peek() != "\n":
                    self.advance()
            else:
                return

    def at_line_start(self) -> bool:
        return not self.text[self.line_start : self.i].strip(" \t\r")


_DELIMS = frozenset(" \t\r\n,#")
_HEADER_KEYS = frozenset({"iso", "mode", "delta", "occ"})


def parse_history(source: Union[str, bytes]) -> History:
    """Parse history text into a well-formed :class:`History`.

    Raises :class:`ParseError` or :class:`IllFormedHistory`, both positioned.
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            text = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            head = bytes(source[: exc.start]).decode("utf-8")
            line = head.count("\n") + 1
            col = len(head) - (head.rfind("\n") + 1) + 1
            raise ParseError(Position(exc.start, line, col), frozenset({"utf-8 text"}), "invalid byte")
    else:
        text = source
    sc = _Scanner(text)
    ops: list[Operation] = []
    decls: dict[str, TxnDecl] = {}
    need_sep = False
    while True:
        sc.skip_blank(newlines=True)
        if not sc.peek():
            break
        if sc.peek() == ",":
            if not need_sep:
                raise sc.fail({"operation"})
            sc.advance()
            need_sep = False
            continue
        if sc.at_line_start() and sc.text.startswith("txn", sc.i) and sc.text[sc.i + 3 : sc.i + 4] in (" ", "\t"):
            decl = _parse_header(sc)
            if decl.txn in decls:
                raise IllFormedHistory(f"transaction {decl.txn} declared twice", decl.pos)
            decls[decl.txn] = decl
            need_sep = False
            continue
        ops.append(_parse_op(sc))
        need_sep = True
        if sc.peek() and sc.peek() not in _DELIMS:
            raise sc.fail({"separator"})
    history = History(tuple(ops), decls)
    check_well_formed(history)
    return history


def _parse_op(sc: _Scanner) -> Operation:
    pos = sc.pos()
    c = sc.peek()
    if c == "t":
        for ch in "tick":
            sc.expect(ch)
        return Operation(OpKind.TICK, pos=pos)
    if c == "v":
        for ch in "val":
            sc.expect(ch)
        return Operation(OpKind.VALIDATE, sc.word(_ALNUM, "transaction id"), pos=pos)
    if c in ("c", "a"):
        sc.advance()
        kind = OpKind.COMMIT if c == "c" else OpKind.ABORT
        return Operation(kind, sc.word(_ALNUM, "transaction id"), pos=pos)
    if c in ("r", "w"):
        sc.advance()
        txn = sc.word(_ALNUM, "transaction id")
        if sc.peek() != "(":
            raise sc.fail({"(", "transaction id"})
        sc.advance()
        item = _item(sc)
        cond = None
        if c == "w" and sc.peek() == ",":
            sc.advance()
            cond = sc.word(_ITEM_CHARS, "condition name")
            sc.expect(")")
        elif sc.peek() != ")":
            raise sc.fail({")", ","} if c == "w" else {")"})
        else:
            sc.advance()
        if c == "r":
            return Operation(OpKind.READ, txn, item, pos=pos)
        if cond is None:
            return Operation(OpKind.WRITE, txn, item, pos=pos)
        return Operation(OpKind.COND_WRITE, txn, item, cond, pos=pos)
    raise sc.fail({"r", "w", "val", "c", "a", "tick", "txn"})


def _item(sc: _Scanner) -> str:
    item = sc.word(_ITEM_CHARS, "item")
    if sc.peek() == ":":
        sc.advance()
        item += ":" + sc.word(_ITEM_CHARS, "item id")
    return item


def _parse_header(sc: _Scanner) -> TxnDecl:
    pos = sc.pos()
    for ch in "txn":
        sc.advance()
    sc.skip_blank(newlines=False)
    txn = sc.word(_ALNUM, "transaction id")
    fields: dict[str, object] = {}
    while True:
        sc.skip_blank(newlines=False)
        if not sc.peek() or sc.peek() == "\n":
            break
        kpos = sc.pos()
        key = sc.word(_ALNUM, "header key")
        if key not in _HEADER_KEYS:
            raise ParseError(kpos, _HEADER_KEYS, key)
        if key in fields:
            raise IllFormedHistory(f"header key {key} repeated", kpos)
        if key == "occ" and sc.peek() != "=":
            fields[key] = True
            continue
        sc.expect("=")
        vpos = sc.pos()
        start = sc.i
        while sc.peek() and sc.peek() not in _DELIMS:
            sc.advance()
        raw = sc.text[start : sc.i]
        try:
            if key == "iso":
                fields[key] = Isolation.parse(raw)
            elif key == "mode":
                fields[key] = CCMode[raw.upper()]
            elif key == "delta":
                if not raw.lstrip("+-").isdigit():
                    raise ValueError(raw)
                fields[key] = int(raw)
            else:
                if raw.lower() not in ("yes", "no", "true", "false", "1", "0"):
                    raise ValueError(raw)
                fields[key] = raw.lower() in ("yes", "true", "1")
        except (ValueError, KeyError):
            choices = {
                "iso": {i.value for i in Isolation},
                "mode": {"LSCC", "MVCC"},
                "delta": {"integer"},
                "occ": {"yes", "no"},
            }[key]
            raise ParseError(vpos, frozenset(choices), raw or "end of line") from None
    return TxnDecl(
        txn,
        fields.get("iso"),
        fields.get("mode"),
        bool(fields.get("occ", False)),
        fields.get("delta"),
        pos=pos,
    )


def check_well_formed(history: History) -> None:
    """Raise :class:`IllFormedHistory` unless every transaction follows its protocol."""
    if not history.operations:
        raise IllFormedHistory("history has no operations", None)
    for decl in history.decls.values():
        if decl.isolation and decl.mode and not decl.isolation.valid_for(decl.mode):
            raise IllFormedHistory(
                f"{decl.isolation.name} is not available under {decl.mode.name}", decl.pos
            )
    terminated: dict[str, Operation] = {}
    read_items: dict[str, set[str]] = {}
    # occ phase per txn: "read" -> "write" (after val) -> "closed" (first non-write after val)
    phase: dict[str, str] = {}
    prev: Optional[Operation] = None
    for op in history.operations:
        t = op.txn
        if t is None:
            prev = op
            continue
        if t in terminated:
            raise IllFormedHistory(f"{op.text()} follows {terminated[t].text()}", op.pos)
        occ = history.is_occ(t)
        if op.kind is OpKind.VALIDATE and not occ:
            raise IllFormedHistory(f"{op.text()}: {t} is not declared optimistic (occ)", op.pos)
        if op.kind is OpKind.COND_WRITE and op.item not in read_items.get(t, set()):
            raise IllFormedHistory(f"{op.text()}: no earlier read of {op.item} by {t}", op.pos)
        if occ:
            state = phase.get(t, "read")
            if op.kind is OpKind.VALIDATE:
                if state != "read":
                    raise IllFormedHistory(f"{t} validates twice", op.pos)
                phase[t] = "write"
            elif op.kind in (OpKind.WRITE, OpKind.COND_WRITE):
                if state != "write":
                    raise IllFormedHistory(f"{op.text()}: optimistic writes must follow val{t}", op.pos)
                if prev is None or prev.txn != t or prev.kind not in (
                    OpKind.VALIDATE,
                    OpKind.WRITE,
                    OpKind.COND_WRITE,
                ):
                    raise IllFormedHistory(
                        f"{op.text()}: the write phase must directly follow val{t}", op.pos
                    )
            elif op.kind is OpKind.READ and state != "read":
                raise IllFormedHistory(f"{op.text()}: read after validation", op.pos)
        if op.kind is OpKind.READ:
            read_items.setdefault(t, set()).add(op.item)
        if op.kind in (OpKind.COMMIT, OpKind.ABORT):
            terminated[t] = op
        prev = op


def format_history(history: History) -> str:
    """Canonical text: headers sorted by transaction id, then the operations."""
    lines = [history.decls[t].text() for t in sorted(history.decls)]
    if history.operations:
        lines.append(" ".join(op.text() for op in history.operations))
    return "".join(line + "\n" for line in lines)
