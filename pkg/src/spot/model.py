"""Core data model: datasets, facets, value domains, and facet statistics.

Values are one of four things: a finite 64-bit float, a category label
(string), a UTC timestamp with millisecond precision, or the explicit
``MISSING`` sentinel.  ``MISSING`` is distinguishable from 0.0 and from the
empty string; NaN never survives ingestion (it becomes ``MISSING``).

Columns are stored columnar (numpy-backed where that pays off) and are
immutable after construction, so datasets are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import IncompatibleDatasets, NotFound

KINDS = ("continuous", "categorical", "datetime", "text")

# Categorical stats keep at most this many (label, frequency) pairs.
SAMPLE_CATEGORY_LIMIT = 256


class _Missing:
    """Singleton sentinel for an absent value."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __bool__(self) -> bool:
        return False


MISSING = _Missing()

Value = Union[float, str, datetime, _Missing]


def utc(dt: datetime) -> datetime:
    """Normalize a datetime to an aware UTC datetime (naive = assumed UTC)."""
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def to_epoch_ms(dt: datetime) -> int:
    """Millisecond Unix timestamp of a datetime; sub-ms precision is floored."""
    dt = utc(dt)
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    delta = dt - epoch
    return delta.days * 86_400_000 + delta.seconds * 1000 + delta.microseconds // 1000


def from_epoch_ms(ms: int) -> datetime:
    """Inverse of :func:`to_epoch_ms`; always aware UTC."""
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    days, rem = divmod(int(ms), 86_400_000)
    secs, msecs = divmod(rem, 1000)
    from datetime import timedelta

    return epoch + timedelta(days=days, seconds=secs, milliseconds=msecs)


def fmt_num(x: float) -> str:
    """Canonical shortest rendering of a finite float ("4", "0.5", "1e+20")."""
    x = float(x)
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def fmt_timestamp(ms: int) -> str:
    """ISO-8601 UTC rendering; milliseconds only when nonzero."""
    dt = from_epoch_ms(ms)
    base = dt.strftime("%Y-%m-%dT%H:%M:%S")
    if ms % 1000:
        return f"{base}.{ms % 1000:03d}Z"
    return base + "Z"


@dataclass(frozen=True)
class Facet:
    """A named, typed column of a dataset.

    ``kind`` is fixed once the dataset is loaded; every stored value conforms
    to it or is missing.  ``integer_valued`` is display metadata only:
    continuous facets are always stored as 64-bit floats.
    """

    name: str
    kind: str
    description: str = ""
    units: str | None = None
    integer_valued: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValueError("facet name must be non-empty")
        if self.kind not in KINDS:
            raise ValueError(f"unknown facet kind {self.kind!r}")


class NumberColumn:
    """Continuous values as a float64 array; NaN encodes MISSING."""

    kind = "continuous"

    def __init__(self, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def from_values(cls, values: Iterable[Value]) -> "NumberColumn":
        out = []
        for v in values:
            if v is MISSING or v is None:
                out.append(np.nan)
            else:
                f = float(v)
                out.append(np.nan if f != f else f)
        return cls(np.array(out, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.values)

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def value_at(self, i: int) -> Value:
        v = self.values[i]
        return MISSING if np.isnan(v) else float(v)

    def iter_values(self) -> Iterator[Value]:
        for v in self.values:
            yield MISSING if np.isnan(v) else float(v)


class DatetimeColumn:
    """Timestamps as int64 epoch milliseconds plus an explicit missing mask."""

    kind = "datetime"

    def __init__(self, ms: np.ndarray, missing: np.ndarray):
        self.ms = np.asarray(ms, dtype=np.int64)
        self.missing = np.asarray(missing, dtype=bool)
        if self.ms.shape != self.missing.shape:
            raise ValueError("ms/missing length mismatch")
        self.ms.setflags(write=False)
        self.missing.setflags(write=False)

    @classmethod
    def from_values(cls, values: Iterable[Value]) -> "DatetimeColumn":
        ms, miss = [], []
        for v in values:
            if v is MISSING or v is None:
                ms.append(0)
                miss.append(True)
            else:
                ms.append(to_epoch_ms(v))
                miss.append(False)
        return cls(np.array(ms, dtype=np.int64), np.array(miss, dtype=bool))

    def __len__(self) -> int:
        return len(self.ms)

    def missing_mask(self) -> np.ndarray:
        return self.missing

    def value_at(self, i: int) -> Value:
        return MISSING if self.missing[i] else from_epoch_ms(int(self.ms[i]))

    def iter_values(self) -> Iterator[Value]:
        for i in range(len(self.ms)):
            yield self.value_at(i)


class CategoryColumn:
    """Dictionary-encoded labels: int32 codes (-1 = MISSING) + category list."""

    kind = "categorical"

    def __init__(self, codes: np.ndarray, categories: Sequence[str]):
        self.codes = np.asarray(codes, dtype=np.int32)
        self.categories = tuple(categories)
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("duplicate category labels")
        if len(self.codes) and self.codes.max(initial=-1) >= len(self.categories):
            raise ValueError("code out of range")
        self.codes.setflags(write=False)

    @classmethod
    def from_values(cls, values: Iterable[Value]) -> "CategoryColumn":
        vals = list(values)
        labels = sorted({v for v in vals if not isinstance(v, _Missing) and v is not None})
        index = {lab: i for i, lab in enumerate(labels)}
        codes = np.array(
            [-1 if (isinstance(v, _Missing) or v is None) else index[v] for v in vals],
            dtype=np.int32,
        )
        return cls(codes, labels)

    def __len__(self) -> int:
        return len(self.codes)

    def missing_mask(self) -> np.ndarray:
        return self.codes < 0

    def value_at(self, i: int) -> Value:
        c = self.codes[i]
        return MISSING if c < 0 else self.categories[c]

    def iter_values(self) -> Iterator[Value]:
        for c in self.codes:
            yield MISSING if c < 0 else self.categories[c]


class TextColumn:
    """Free text stored as-is; None encodes MISSING."""

    kind = "text"

    def __init__(self, values: Sequence[str | None]):
        self.values = tuple(values)

    @classmethod
    def from_values(cls, values: Iterable[Value]) -> "TextColumn":
        return cls(
            tuple(None if (isinstance(v, _Missing) or v is None) else str(v) for v in values)
        )

    def __len__(self) -> int:
        return len(self.values)

    def missing_mask(self) -> np.ndarray:
        return np.array([v is None for v in self.values], dtype=bool)

    def value_at(self, i: int) -> Value:
        v = self.values[i]
        return MISSING if v is None else v

    def iter_values(self) -> Iterator[Value]:
        for v in self.values:
            yield MISSING if v is None else v


Column = Union[NumberColumn, DatetimeColumn, CategoryColumn, TextColumn]

_COLUMN_KIND = {
    "continuous": NumberColumn,
    "datetime": DatetimeColumn,
    "categorical": CategoryColumn,
    "text": TextColumn,
}


@dataclass(frozen=True)
class DatasetInfo:
    """Row-free description of a dataset (what sessions and servers list)."""

    id: str
    name: str
    description: str
    facets: tuple[Facet, ...]

    def facet(self, name: str) -> Facet:
        for f in self.facets:
            if f.name == name:
                return f
        raise NotFound(f"no facet named {name!r}")

    def kind_of(self, name: str) -> str:
        return self.facet(name).kind


class Dataset:
    """An immutable table: ordered facets plus equal-length columns."""

    def __init__(
        self,
        id: str,
        name: str,
        facets: Sequence[Facet],
        columns: Mapping[str, Column],
        description: str = "",
    ):
        names = [f.name for f in facets]
        if len(set(names)) != len(names):
            raise ValueError("facet names must be unique")
        if set(columns) != set(names):
            raise ValueError("columns must match facets exactly")
        lengths = {len(c) for c in columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths: {sorted(lengths)}")
        for f in facets:
            if not isinstance(columns[f.name], _COLUMN_KIND[f.kind]):
                raise ValueError(f"column {f.name!r} does not store kind {f.kind!r}")
        self.id = id
        self.name = name
        self.description = description
        self.facets = tuple(facets)
        self.columns = dict(columns)
        self.row_count = lengths.pop() if lengths else 0

    @property
    def info(self) -> DatasetInfo:
        return DatasetInfo(self.id, self.name, self.description, self.facets)

    def facet(self, name: str) -> Facet:
        return self.info.facet(name)

    def column(self, name: str) -> Column:
        try:
            return self.columns[name]
        except KeyError:
            raise NotFound(f"no facet named {name!r}") from None


@dataclass(frozen=True)
class FacetStats:
    """Summary of a facet's non-missing values.

    ``min``/``max`` are None when every value is missing.  For categorical and
    text facets they are the lexicographically smallest/largest labels.
    ``sample_categories`` is populated for categorical facets only: up to
    SAMPLE_CATEGORY_LIMIT (label, frequency) pairs, most frequent first.
    """

    min: Value | None
    max: Value | None
    distinct_count: int
    missing_count: int
    sample_categories: tuple[tuple[str, int], ...] = ()


def facet_stats(dataset: Dataset, facet_name: str) -> FacetStats:
    """Compute FacetStats by a plain scan of the column's values.

    Deterministic, and intentionally free of the vectorized kernels in the
    execution engine so the two routes can check each other.
    """
    facet = dataset.facet(facet_name)
    column = dataset.column(facet_name)

    missing = 0
    seen: set = set()
    lo = hi = None
    freq: dict[str, int] = {}
    for v in column.iter_values():
        if isinstance(v, _Missing):
            missing += 1
            continue
        seen.add(v)
        if lo is None or v < lo:
            lo = v
        if hi is None or v > hi:
            hi = v
        if facet.kind == "categorical":
            freq[v] = freq.get(v, 0) + 1

    samples: tuple[tuple[str, int], ...] = ()
    if facet.kind == "categorical":
        ordered = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
        samples = tuple(ordered[:SAMPLE_CATEGORY_LIMIT])
    return FacetStats(
        min=lo,
        max=hi,
        distinct_count=len(seen),
        missing_count=missing,
        sample_categories=samples,
    )


PROVENANCE_FACET = "_dataset"


def combine_datasets(datasets: Sequence[Dataset]) -> Dataset:
    """Union datasets over their shared facets, tagging rows with their source.

    Shared facets are matched by exact name and kind (case-sensitive).  The
    result keeps the first dataset's facet order, appends a synthetic
    categorical facet "_dataset" holding each row's source dataset name, and
    concatenates all rows, so its row count is the sum of the inputs'.
    """
    if len(datasets) < 2:
        raise IncompatibleDatasets("need at least two datasets to combine")
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise IncompatibleDatasets(f"duplicate dataset names: {names}")

    shared = set(f.name for f in datasets[0].facets)
    for d in datasets[1:]:
        shared &= {f.name for f in d.facets}
    if not shared:
        raise IncompatibleDatasets("datasets share no facet names")
    if PROVENANCE_FACET in shared:
        raise IncompatibleDatasets(f"inputs already contain a {PROVENANCE_FACET!r} facet")
    for fname in shared:
        kinds = {d.facet(fname).kind for d in datasets}
        if len(kinds) > 1:
            raise IncompatibleDatasets(
                f"facet {fname!r} has conflicting kinds across datasets: {sorted(kinds)}"
            )

    # Keep the first dataset's ordering (and its facet metadata) for shared facets.
    kept = [f for f in datasets[0].facets if f.name in shared]
    columns: dict[str, Column] = {}
    for f in kept:
        parts = [d.column(f.name) for d in datasets]
        columns[f.name] = _concat_columns(f.kind, parts)

    src_labels = tuple(names)
    codes = np.concatenate(
        [np.full(d.row_count, i, dtype=np.int32) for i, d in enumerate(datasets)]
    )
    columns[PROVENANCE_FACET] = CategoryColumn(codes, src_labels)

    facets = tuple(kept) + (
        Facet(PROVENANCE_FACET, "categorical", description="source dataset name"),
    )
    return Dataset(
        id="combined:" + "+".join(d.id for d in datasets),
        name=" + ".join(names),
        description="union of " + ", ".join(names),
        facets=facets,
        columns=columns,
    )


def _concat_columns(kind: str, parts: Sequence[Column]) -> Column:
    if kind == "continuous":
        return NumberColumn(np.concatenate([p.values for p in parts]))
    if kind == "datetime":
        return DatetimeColumn(
            np.concatenate([p.ms for p in parts]),
            np.concatenate([p.missing for p in parts]),
        )
    if kind == "categorical":
        labels = sorted({lab for p in parts for lab in p.categories})
        index = {lab: i for i, lab in enumerate(labels)}
        chunks = []
        for p in parts:
            remap = np.array([index[lab] for lab in p.categories], dtype=np.int32)
            out = np.where(p.codes >= 0, remap[np.maximum(p.codes, 0)], -1).astype(np.int32)
            chunks.append(out)
        return CategoryColumn(np.concatenate(chunks) if chunks else np.array([], np.int32), labels)
    return TextColumn([v for p in parts for v in p.values])
