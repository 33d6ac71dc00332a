"""File ingestion: CSV/JSON parsing, facet kind detection, dataset loading.

Detection tries kinds in precedence order continuous -> datetime ->
categorical -> text.  A kind is accepted when at least ``accept_threshold``
of the non-empty cells parse under it; categorical additionally requires the
distinct count to stay under ``max(categorical_base, categorical_fraction *
row_count)``.  The thresholds live on :class:`DetectionConfig` so they can be
tuned without touching code.

Cell normalization: surrounding whitespace is stripped; empty (or
whitespace-only) cells, JSON nulls, and unparseable cells become MISSING.
Numbers must be finite and locale-free (integer, decimal, or scientific
notation; no thousands separators).  Datetimes must be ISO-8601 extended
(date or date-time, optional UTC offset, normalized to UTC).  JSON booleans
are treated as the labels "true"/"false".
"""

from __future__ import annotations

import csv
import io
import json
import re
import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    EmptyFacetWarning,
    EncodingError,
    MalformedInput,
    MalformedRow,
    NotFound,
    UnsupportedStructure,
)
from .model import (
    MISSING,
    CategoryColumn,
    Column,
    Dataset,
    DatetimeColumn,
    Facet,
    NumberColumn,
    TextColumn,
    fmt_num,
    fmt_timestamp,
)

Cell = Union[str, float, int, bool, None]

_NUMBER_RE = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")
_DATETIME_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})"
    r"(?:[T ](\d{2}):(\d{2})(?::(\d{2})(?:\.(\d{1,6}))?)?"
    r"(Z|[+-]\d{2}:?\d{2})?)?$"
)


def parse_number(text: str) -> float | None:
    """Parse a finite float, or None. Rejects nan/inf/underscores."""
    if not _NUMBER_RE.match(text):
        return None
    value = float(text)
    if value != value or value in (float("inf"), float("-inf")):
        return None
    return value


def parse_timestamp(text: str) -> int | None:
    """Parse ISO-8601 (extended) to epoch milliseconds UTC, or None."""
    m = _DATETIME_RE.match(text)
    if not m:
        return None
    year, month, day = int(m[1]), int(m[2]), int(m[3])
    hour = int(m[4]) if m[4] else 0
    minute = int(m[5]) if m[5] else 0
    second = int(m[6]) if m[6] else 0
    frac = m[7] or ""
    micros = int(frac.ljust(6, "0")) if frac else 0
    offset = m[8]
    try:
        dt = datetime(year, month, day, hour, minute, second, micros, tzinfo=timezone.utc)
    except ValueError:
        return None
    if offset and offset != "Z":
        sign = 1 if offset[0] == "+" else -1
        hh = int(offset[1:3])
        mm = int(offset[-2:])
        dt -= sign * timedelta(hours=hh, minutes=mm)
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    delta = dt - epoch
    return delta.days * 86_400_000 + delta.seconds * 1000 + delta.microseconds // 1000


def normalize_cell(cell: Cell) -> str | None:
    """Map a raw cell to its canonical text, or None when missing."""
    if cell is None:
        return None
    if isinstance(cell, bool):
        return "true" if cell else "false"
    if isinstance(cell, (int, float)):
        f = float(cell)
        if f != f:
            return None
        return fmt_num(f)
    text = cell.strip()
    return text if text else None


@dataclass
class RawTable:
    """Header plus rows of raw cells; every row is exactly header-width."""

    header: list[str]
    cells: list[list[Cell]]

    @property
    def row_count(self) -> int:
        return len(self.cells)

    def column_cells(self, index: int) -> list[Cell]:
        return [row[index] for row in self.cells]


@dataclass(frozen=True)
class KindGuess:
    """One column's detected kind with its supporting evidence."""

    column: str
    kind: str
    confidence: float
    parse_failures: int


@dataclass(frozen=True)
class DetectionConfig:
    accept_threshold: float = 0.95
    categorical_base: int = 32
    categorical_fraction: float = 0.05


def _decode_utf8(data: bytes) -> str:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise EncodingError(f"input is not valid UTF-8: {e}") from e
    if text.startswith("﻿"):
        text = text[1:]
    return text


def parse_csv(data: bytes, delimiter: str = ",") -> RawTable:
    """Parse RFC-4180 CSV bytes; first row is the header.

    Short rows are padded with missing cells; rows wider than the header are
    rejected with the offending row's index (0-based, data rows only).
    """
    text = _decode_utf8(data)
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedInput("empty input: a header row is required") from None
    width = len(header)
    rows: list[list[Cell]] = []
    for i, row in enumerate(reader):
        if not row:
            continue  # blank line
        if len(row) > width:
            raise MalformedRow(
                f"row {i} has {len(row)} cells but the header has {width}", row_index=i
            )
        padded: list[Cell] = list(row) + [None] * (width - len(row))
        rows.append(padded)
    return RawTable(header=list(header), cells=rows)


def parse_json_records(data: bytes) -> RawTable:
    """Parse a JSON array of flat objects; header is the union of keys."""
    text = _decode_utf8(data)
    try:
        doc = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as e:
        raise MalformedInput(f"invalid JSON: {e}") from e
    if not isinstance(doc, list):
        raise MalformedInput("top level must be a JSON array of objects")
    header: list[str] = []
    seen: set[str] = set()
    records: list[dict] = []
    for i, rec in enumerate(doc):
        if not isinstance(rec, dict):
            raise MalformedInput(f"element {i} is not an object")
        for key, value in rec.items():
            if isinstance(value, (dict, list)):
                raise UnsupportedStructure(
                    f"element {i}, key {key!r}: nested objects/arrays are not supported"
                )
            if key not in seen:
                seen.add(key)
                header.append(key)
        records.append(rec)
    cells = [[rec.get(k) for k in header] for rec in records]
    return RawTable(header=header, cells=cells)


def _detect_column(name: str, cells: Sequence[Cell], row_count: int, cfg: DetectionConfig) -> KindGuess:
    values = [normalize_cell(c) for c in cells]
    non_empty = [v for v in values if v is not None]
    n = len(non_empty)
    if n == 0:
        return KindGuess(name, "text", 0.0, 0)

    numeric = sum(1 for v in non_empty if parse_number(v) is not None)
    if numeric / n >= cfg.accept_threshold:
        return KindGuess(name, "continuous", numeric / n, n - numeric)

    temporal = sum(1 for v in non_empty if parse_timestamp(v) is not None)
    if temporal / n >= cfg.accept_threshold:
        return KindGuess(name, "datetime", temporal / n, n - temporal)

    limit = max(cfg.categorical_base, cfg.categorical_fraction * row_count)
    if len(set(non_empty)) <= limit:
        return KindGuess(name, "categorical", 1.0, 0)

    return KindGuess(name, "text", 1.0, 0)


def detect_facet_kinds(table: RawTable, config: DetectionConfig | None = None) -> list[KindGuess]:
    """Guess a kind per column. Deterministic; row order never matters."""
    if not table.header:
        raise MalformedInput("table has no columns")
    cfg = config or DetectionConfig()
    return [
        _detect_column(name, table.column_cells(i), table.row_count, cfg)
        for i, name in enumerate(table.header)
    ]


def _build_column(kind: str, cells: Sequence[Cell]) -> tuple[Column, bool, int]:
    """Returns (column, all_integral, parsed_count) for the final kind."""
    values = [normalize_cell(c) for c in cells]
    if kind == "continuous":
        parsed = [parse_number(v) if v is not None else None for v in values]
        arr = np.array([np.nan if p is None else p for p in parsed], dtype=np.float64)
        ok = [p for p in parsed if p is not None]
        integral = bool(ok) and all(p == int(p) for p in ok)
        return NumberColumn(arr), integral, len(ok)
    if kind == "datetime":
        parsed = [parse_timestamp(v) if v is not None else None for v in values]
        ms = np.array([0 if p is None else p for p in parsed], dtype=np.int64)
        miss = np.array([p is None for p in parsed], dtype=bool)
        return DatetimeColumn(ms, miss), False, int((~miss).sum())
    if kind == "categorical":
        col = CategoryColumn.from_values([MISSING if v is None else v for v in values])
        return col, False, len(values) - int(col.missing_mask().sum())
    col = TextColumn(values)
    return col, False, len(values) - int(col.missing_mask().sum())


def load_dataset(
    table: RawTable,
    overrides: Mapping[str, str] | None = None,
    *,
    id: str = "dataset",
    name: str = "dataset",
    description: str = "",
    config: DetectionConfig | None = None,
) -> Dataset:
    """Build a Dataset from a RawTable, honoring per-column kind overrides.

    Cells unparseable under a column's final kind become missing.  Forcing a
    numeric/temporal kind onto a column with no parseable cells keeps the
    facet (all missing) and emits :class:`EmptyFacetWarning`.
    """
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(table.header)
    if unknown:
        raise NotFound(f"override references unknown columns: {sorted(unknown)}")
    for col, kind in overrides.items():
        if kind not in ("continuous", "categorical", "datetime", "text"):
            raise MalformedInput(f"unknown kind {kind!r} for column {col!r}")

    guesses = detect_facet_kinds(table, config)
    facets: list[Facet] = []
    columns: dict[str, Column] = {}
    for i, guess in enumerate(guesses):
        kind = overrides.get(guess.column, guess.kind)
        column, integral, parsed = _build_column(kind, table.column_cells(i))
        non_empty = sum(1 for c in table.column_cells(i) if normalize_cell(c) is not None)
        if kind in ("continuous", "datetime") and parsed == 0 and non_empty > 0:
            warnings.warn(
                f"column {guess.column!r} forced to {kind} has no parseable values",
                EmptyFacetWarning,
                stacklevel=2,
            )
        facets.append(Facet(guess.column, kind, integer_valued=integral))
        columns[guess.column] = column
    return Dataset(id=id, name=name, description=description, facets=facets, columns=columns)


def serialize_csv(dataset: Dataset, delimiter: str = ",") -> bytes:
    """Render a dataset back to canonical CSV (UTF-8, "\\n" line ends)."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow([f.name for f in dataset.facets])
    iters = [dataset.columns[f.name] for f in dataset.facets]
    kinds = [f.kind for f in dataset.facets]
    for i in range(dataset.row_count):
        row = []
        for kind, col in zip(kinds, iters):
            v = col.value_at(i)
            if v is MISSING:
                row.append("")
            elif kind == "continuous":
                row.append(fmt_num(v))
            elif kind == "datetime":
                row.append(fmt_timestamp(col.ms[i]))
            else:
                row.append(v)
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def load_file(
    path: str,
    overrides: Mapping[str, str] | None = None,
    *,
    id: str | None = None,
    name: str | None = None,
    description: str = "",
    delimiter: str = ",",
) -> Dataset:
    """Convenience: parse a .csv or .json file and load it as a Dataset."""
    from pathlib import Path

    p = Path(path)
    data = p.read_bytes()
    if p.suffix.lower() == ".json":
        table = parse_json_records(data)
    else:
        table = parse_csv(data, delimiter=delimiter)
    stem = p.stem
    return load_dataset(
        table,
        overrides,
        id=id or stem,
        name=name or stem,
        description=description,
    )
