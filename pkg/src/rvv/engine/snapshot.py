"""Line-oriented text dump of committed store state.

One row per line, sorted by key::

    table|id|col=val,col=val|stampkind:stampvalue

Columns are emitted sorted by name. Names may not contain any of ``|,=:`` or
whitespace.
"""

from __future__ import annotations

import hashlib
import re
from typing import Iterable

from .types import Row, RowKey, VersionStamp

_NAME = re.compile(r"[^|,=:\s]+\Z")


class SnapshotFormatError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _check_name(what: str, name: str) -> str:
    if not _NAME.match(name):
        raise ValueError(f"{what} {name!r} cannot be represented in a snapshot")
    return name


def format_row(row: Row) -> str:
    if row.stamp.is_indeterminate:
        raise ValueError(f"row {row.key} has an indeterminate stamp")
    cols = ",".join(f"{_check_name('column', c)}={row.columns[c]}" for c in sorted(row.columns))
    table = _check_name("table", row.key.table)
    ident = _check_name("id", row.key.id)
    return f"{table}|{ident}|{cols}|{row.stamp}"


def dump_rows(rows: Iterable[Row]) -> str:
    lines = [format_row(r) for r in sorted(rows, key=lambda r: r.key)]
    return "".join(line + "\n" for line in lines)


def parse_row(text: str, line: int = 1) -> Row:
    parts = text.split("|")
    if len(parts) != 4:
        raise SnapshotFormatError(line, f"expected 4 '|'-separated fields, got {len(parts)}")
    table, ident, cols, stamp = parts
    try:
        _check_name("table", table)
        _check_name("id", ident)
        columns: dict[str, int] = {}
        for item in cols.split(","):
            name, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"column entry {item!r} lacks '='")
            _check_name("column", name)
            if name in columns:
                raise ValueError(f"duplicate column {name}")
            columns[name] = int(value)
        parsed = VersionStamp.parse(stamp)
        if parsed.is_indeterminate:
            raise ValueError("stored stamps cannot be indeterminate")
        return Row(RowKey(table, ident), columns, parsed)
    except (ValueError, TypeError) as exc:
        raise SnapshotFormatError(line, str(exc)) from None


def load_rows(text: str) -> list[Row]:
    rows = []
    seen = set()
    for n, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        row = parse_row(raw.strip(), n)
        if row.key in seen:
            raise SnapshotFormatError(n, f"duplicate row {row.key}")
        seen.add(row.key)
        rows.append(row)
    return rows


def digest(rows: Iterable[Row]) -> str:
    return hashlib.sha256(dump_rows(rows).encode()).hexdigest()[:12]
