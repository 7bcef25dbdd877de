"""Relational data model: typed columns, immutable tables, CSV ingest, statistics.

The data model is deliberately small: 64-bit signed integers and fixed-width
ASCII CHAR(n) cells, streamed as flat tuples. Tables are immutable after load
and safe to share across concurrently executing pipelines.

CSV dialect: comma separator, no quoting, no escapes, `\\n` line terminators,
printable ASCII only. The first line is a typed header such as
`orderkey:INT,status:CHAR(1),total:INT`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CharOverflow, HeaderMismatch, MalformedCell

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
CHAR_MAX_WIDTH = 64

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT_CELL_RE = re.compile(r"-?[0-9]+\Z")
_HEADER_COL_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*):(INT|CHAR\(([0-9]+)\))\Z")


class TypeKind(enum.Enum):
    INT = "INT"
    CHAR = "CHAR"


@dataclass(frozen=True)
class ColumnType:
    kind: TypeKind
    width_bytes: int

    def __post_init__(self):
        if self.kind is TypeKind.INT:
            if self.width_bytes != 8:
                raise ValueError("INT columns are always 8 bytes wide")
        elif not 1 <= self.width_bytes <= CHAR_MAX_WIDTH:
            raise ValueError(f"CHAR width must be in [1, {CHAR_MAX_WIDTH}]")

    @staticmethod
    def int64() -> "ColumnType":
        return ColumnType(TypeKind.INT, 8)

    @staticmethod
    def char(width: int) -> "ColumnType":
        return ColumnType(TypeKind.CHAR, width)

    def render(self) -> str:
        if self.kind is TypeKind.INT:
            return "INT"
        return f"CHAR({self.width_bytes})"


@dataclass(frozen=True)
class Schema:
    """Ordered (name, type) columns; names are unique case-insensitively."""

    columns: tuple[tuple[str, ColumnType], ...]

    def __post_init__(self):
        if len(self.columns) < 1:
            raise ValueError("schema needs at least one column")
        seen = set()
        for name, _ in self.columns:
            if not _IDENT_RE.match(name):
                raise ValueError(f"bad column name `{name}`")
            low = name.lower()
            if low in seen:
                raise ValueError(f"duplicate column name `{name}`")
            seen.add(low)

    @property
    def arity(self) -> int:
        return len(self.columns)

    @property
    def tuple_bytes(self) -> int:
        return sum(t.width_bytes for _, t in self.columns)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.columns)

    def index_of(self, name: str) -> int:
        low = name.lower()
        for i, (col, _) in enumerate(self.columns):
            if col.lower() == low:
                return i
        raise KeyError(name)

    def type_of(self, name: str) -> ColumnType:
        return self.columns[self.index_of(name)][1]

    def header_text(self) -> str:
        return ",".join(f"{name}:{ctype.render()}" for name, ctype in self.columns)


def pad_char(value: str, width: int) -> str:
    """Canonical CHAR content: space-padded to the declared width."""
    return value.ljust(width)


def canon_cell(value, ctype: ColumnType):
    """Cell in its comparison domain (CHAR padded, INT as-is)."""
    if ctype.kind is TypeKind.CHAR:
        return pad_char(value, ctype.width_bytes)
    return value


def canon_row(row: tuple, schema: Schema) -> tuple:
    return tuple(canon_cell(v, t) for v, (_, t) in zip(row, schema.columns))


def encode_cell(value, ctype: ColumnType) -> bytes:
    if ctype.kind is TypeKind.INT:
        return (value & ((1 << 64) - 1)).to_bytes(8, "little")
    return pad_char(value, ctype.width_bytes).encode("ascii")


def encode_row(row: tuple, schema: Schema) -> bytes:
    """Fixed-width byte image of a tuple (INT little-endian, CHAR padded)."""
    return b"".join(encode_cell(v, t) for v, (_, t) in zip(row, schema.columns))


@dataclass(frozen=True)
class Table:
    schema: Schema
    rows: tuple[tuple, ...]
    load_warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        arity = self.schema.arity
        for i, row in enumerate(self.rows):
            if len(row) != arity:
                raise ValueError(f"row {i} has {len(row)} cells, schema has {arity}")

    @property
    def row_count(self) -> int:
        return len(self.rows)


def _is_printable_ascii(text: str) -> bool:
    return all(0x20 <= ord(ch) <= 0x7E for ch in text)


def parse_header(line: str) -> Schema:
    """Parse `name:TYPE[,name:TYPE...]`; returns None-equivalent errors as ValueError."""
    cols = []
    for part in line.split(","):
        m = _HEADER_COL_RE.match(part)
        if not m:
            raise ValueError(f"bad header column `{part}`")
        name, spec, width = m.group(1), m.group(2), m.group(3)
        if spec == "INT":
            cols.append((name, ColumnType.int64()))
        else:
            w = int(width)
            if not 1 <= w <= CHAR_MAX_WIDTH:
                raise ValueError(f"CHAR width {w} out of range")
            cols.append((name, ColumnType.char(w)))
    return Schema(tuple(cols))


def _parse_cell(text: str, ctype: ColumnType, line_no: int, col_no: int,
                strict: bool, warnings: list):
    if not _is_printable_ascii(text):
        raise MalformedCell(line_no, col_no, "non-ASCII or control byte in cell")
    if ctype.kind is TypeKind.INT:
        if not _INT_CELL_RE.match(text):
            raise MalformedCell(line_no, col_no, f"`{text}` is not an INT")
        value = int(text)
        if value < INT64_MIN or value > INT64_MAX:
            raise MalformedCell(line_no, col_no, f"`{text}` exceeds 64-bit range")
        return value
    if len(text) > ctype.width_bytes:
        if strict:
            raise CharOverflow(line_no, col_no, ctype.width_bytes, len(text))
        warnings.append(
            f"line {line_no}, column {col_no}: CHAR({ctype.width_bytes}) "
            f"cell truncated from {len(text)} bytes"
        )
        return text[: ctype.width_bytes]
    return text


def load_csv(path, declared_schema: Schema | None = None, strict: bool = True) -> Table:
    """Load a typed CSV file into an immutable Table.

    The first line must be a typed header unless `declared_schema` is given,
    in which case a header line, if present, is validated against it. Strict
    mode (the default) rejects over-width CHAR cells; lenient mode truncates
    them and records a warning on the returned table.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such table file: {p}")
    text = p.read_text(encoding="ascii")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    schema = declared_schema
    data_start = 0  # index into `lines`
    if not lines:
        if schema is None:
            raise MalformedCell(1, 1, "empty file has no header")
        return Table(schema, ())

    header_schema = None
    try:
        header_schema = parse_header(lines[0])
    except ValueError as exc:
        if schema is None:
            raise MalformedCell(1, 1, str(exc)) from exc
    if header_schema is not None:
        if schema is not None and header_schema != schema:
            raise HeaderMismatch(schema.header_text(), lines[0])
        schema = header_schema
        data_start = 1

    warnings: list[str] = []
    rows = []
    arity = schema.arity
    for offset, line in enumerate(lines[data_start:]):
        line_no = data_start + offset + 1  # 1-based, header is line 1
        cells = line.split(",")
        if len(cells) != arity:
            raise MalformedCell(line_no, len(cells), f"expected {arity} cells, got {len(cells)}")
        row = tuple(
            _parse_cell(cell, ctype, line_no, col_no, strict, warnings)
            for col_no, (cell, (_, ctype)) in enumerate(zip(cells, schema.columns), start=1)
        )
        rows.append(row)
    return Table(schema, tuple(rows), tuple(warnings))


def dump_csv(table: Table) -> str:
    """Serialize with a normalized header; inverse of load_csv on the data section."""
    out = [table.schema.header_text()]
    for row in table.rows:
        cells = []
        for value, (_, ctype) in zip(row, table.schema.columns):
            cells.append(str(value) if ctype.kind is TypeKind.INT else value)
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def save_csv(table: Table, path) -> None:
    Path(path).write_text(dump_csv(table), encoding="ascii")


@dataclass(frozen=True)
class ColumnStat:
    name: str
    distinct_count: int
    min_value: object | None
    max_value: object | None


@dataclass(frozen=True)
class ColumnStats:
    """Exact per-table statistics; the planner's selectivity inputs."""

    row_count: int
    columns: tuple[ColumnStat, ...]

    def column(self, name: str) -> ColumnStat:
        low = name.lower()
        for stat in self.columns:
            if stat.name.lower() == low:
                return stat
        raise KeyError(name)


def table_stats(table: Table) -> ColumnStats:
    """Exact counts, no sampling. CHAR min/max compare on padded content."""
    stats = []
    for idx, (name, ctype) in enumerate(table.schema.columns):
        values = [canon_cell(row[idx], ctype) for row in table.rows]
        if values:
            stats.append(ColumnStat(name, len(set(values)), min(values), max(values)))
        else:
            stats.append(ColumnStat(name, 0, None, None))
    return ColumnStats(len(table.rows), tuple(stats))
