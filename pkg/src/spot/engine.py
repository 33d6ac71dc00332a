"""In-memory columnar execution: partitioning, aggregation, selections.

Binning contract for continuous partitions over [lo, hi) with B bins:

    index(v) = floor((v - lo) * B / (hi - lo)), clamped so that v == hi
    (and any floating-point overshoot) lands in bin B-1; values outside
    [lo, hi] belong to no bin.  Bin edges are edge[i] = lo + i*(hi-lo)/B
    with edge[0] = lo and edge[B] = hi exactly, and labels render as
    "[edge[i],edge[i+1])".

Aggregation emits one row per group, sorted ascending by key tuple.  The
emitted key domain is the cross product of per-partition domains: continuous
partitions contribute *all* their bins (dense histograms, empty bins carry
count 0), categorical and datetime partitions contribute only the keys
observed among surviving rows.  A row with a missing value in any partition
facet, or failing the selection predicate, contributes to no group.  Standard
deviation is the population form (divide by n).  Aggregate values over a
group with no non-missing inputs are None, never 0 or +/-inf; the group count
is always present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import InvalidSpec, InvalidSelection, KindMismatch, LimitExceeded, NotFound
from .model import (
    MISSING,
    CategoryColumn,
    Column,
    Dataset,
    DatetimeColumn,
    Facet,
    FacetStats,
    NumberColumn,
    TextColumn,
    _Missing,
    fmt_num,
    from_epoch_ms,
    to_epoch_ms,
)

AGGREGATE_OPS = ("count", "sum", "avg", "min", "max", "stddev")
TIME_INTERVALS = ("year", "month", "day", "hour", "minute")

MAX_PARTITIONS = 3
MAX_AGGREGATES = 4
MAX_BINS = 10_000
DEFAULT_BIN_COUNT = 20

# Guard against pathological dense cross products (e.g. 3 x 10k-bin axes).
MAX_GROUPS = 1 << 22

_INTERVAL_MS = {"minute": 60_000, "hour": 3_600_000, "day": 86_400_000}


@dataclass(frozen=True)
class ContinuousBins:
    lo: float
    hi: float
    bin_count: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidSpec("bin range must be finite")
        if not self.lo < self.hi:
            raise InvalidSpec(f"bin range requires lo < hi, got [{self.lo}, {self.hi}]")
        if not 1 <= self.bin_count <= MAX_BINS:
            raise InvalidSpec(f"bin_count must be in 1..{MAX_BINS}, got {self.bin_count}")


@dataclass(frozen=True)
class CategoryList:
    """Explicit category list, or None to accept any observed label."""

    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.categories is not None:
            cats = tuple(self.categories)
            if len(set(cats)) != len(cats):
                raise InvalidSpec("explicit category list contains duplicates")
            object.__setattr__(self, "categories", cats)


@dataclass(frozen=True)
class TimeInterval:
    interval: str

    def __post_init__(self):
        if self.interval not in TIME_INTERVALS:
            raise InvalidSpec(f"interval must be one of {TIME_INTERVALS}")


Grouping = Union[ContinuousBins, CategoryList, TimeInterval]

_GROUPING_KIND = {ContinuousBins: "continuous", CategoryList: "categorical", TimeInterval: "datetime"}


@dataclass(frozen=True)
class PartitionSpec:
    facet: str
    grouping: Grouping

    @property
    def kind(self) -> str:
        return _GROUPING_KIND[type(self.grouping)]


@dataclass(frozen=True)
class AggregateSpec:
    op: str
    facet: str | None = None

    def __post_init__(self):
        if self.op not in AGGREGATE_OPS:
            raise InvalidSpec(f"unknown aggregate op {self.op!r}")
        if self.op == "count" and self.facet is not None:
            raise InvalidSpec("count takes no facet")
        if self.op != "count" and not self.facet:
            raise InvalidSpec(f"{self.op} requires a facet")


@dataclass(frozen=True)
class RangeSelection:
    """Half-open range [lo, hi) over a continuous or datetime partition."""

    lo: Union[float, datetime]
    hi: Union[float, datetime]

    def __post_init__(self):
        if type(self.lo) is not type(self.hi) and not (
            isinstance(self.lo, (int, float)) and isinstance(self.hi, (int, float))
        ):
            raise InvalidSelection("range endpoints must have one type")
        if not self.lo < self.hi:
            raise InvalidSelection(f"range requires lo < hi, got [{self.lo}, {self.hi})")


@dataclass(frozen=True)
class CategorySelection:
    labels: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "labels", frozenset(self.labels))
        if not self.labels:
            raise InvalidSelection("category selection must name at least one label")


Selection = Union[RangeSelection, CategorySelection]
Predicate = Sequence[tuple[PartitionSpec, Selection]]


class BinKey(NamedTuple):
    index: int
    label: str


GroupKey = Union[BinKey, str, datetime]


@dataclass(frozen=True)
class GroupRow:
    keys: tuple[GroupKey, ...]
    count: int
    values: tuple[Union[float, None], ...] = ()


def bin_edge(bins: ContinuousBins, i: int) -> float:
    if i <= 0:
        return bins.lo
    if i >= bins.bin_count:
        return bins.hi
    return bins.lo + i * (bins.hi - bins.lo) / bins.bin_count


def bin_label(bins: ContinuousBins, i: int) -> str:
    return f"[{fmt_num(bin_edge(bins, i))},{fmt_num(bin_edge(bins, i + 1))})"


def truncate_ms(ms: int, interval: str) -> int:
    """Floor an epoch-millisecond timestamp to the start of its interval."""
    if interval in _INTERVAL_MS:
        unit = _INTERVAL_MS[interval]
        return ms - (ms % unit)  # Python % floors, so pre-1970 works too
    dt = from_epoch_ms(ms)
    if interval == "month":
        dt = dt.replace(day=1, hour=0, minute=0, second=0, microsecond=0)
    elif interval == "year":
        dt = dt.replace(month=1, day=1, hour=0, minute=0, second=0, microsecond=0)
    else:
        raise InvalidSpec(f"interval must be one of {TIME_INTERVALS}")
    return to_epoch_ms(dt)


def _truncate_ms_array(ms: np.ndarray, interval: str) -> np.ndarray:
    if interval in _INTERVAL_MS:
        unit = _INTERVAL_MS[interval]
        return ms - np.mod(ms, unit)
    unit_code = {"month": "M", "year": "Y"}[interval]
    stamped = ms.astype("datetime64[ms]")
    return stamped.astype(f"datetime64[{unit_code}]").astype("datetime64[ms]").astype(np.int64)


def partition_key(value, spec: PartitionSpec):
    """Map one value to its group key, or None when it belongs to no group.

    Total over the partition's value kind: missing values and values outside
    a continuous range / category list yield None.  A value of the wrong kind
    raises KindMismatch.
    """
    if value is MISSING or value is None or isinstance(value, _Missing):
        return None
    g = spec.grouping
    if isinstance(g, ContinuousBins):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise KindMismatch(f"continuous partition got {type(value).__name__}")
        v = float(value)
        if math.isnan(v) or v < g.lo or v > g.hi:
            return None
        i = int(math.floor((v - g.lo) * g.bin_count / (g.hi - g.lo)))
        if i >= g.bin_count:
            i = g.bin_count - 1
        return BinKey(i, bin_label(g, i))
    if isinstance(g, CategoryList):
        if not isinstance(value, str):
            raise KindMismatch(f"categorical partition got {type(value).__name__}")
        if g.categories is None or value in g.categories:
            return value
        return None
    if isinstance(g, TimeInterval):
        if not isinstance(value, datetime):
            raise KindMismatch(f"datetime partition got {type(value).__name__}")
        return from_epoch_ms(truncate_ms(to_epoch_ms(value), g.interval))
    raise InvalidSpec(f"unknown grouping {type(g).__name__}")


def validate_selection(spec: PartitionSpec, sel: Selection) -> None:
    """Check that a selection's shape fits the partition it brushes."""
    g = spec.grouping
    if isinstance(sel, RangeSelection):
        if isinstance(g, ContinuousBins):
            if isinstance(sel.lo, datetime):
                raise KindMismatch(f"range over {spec.facet!r} must use numbers")
        elif isinstance(g, TimeInterval):
            if not isinstance(sel.lo, datetime):
                raise KindMismatch(f"range over {spec.facet!r} must use datetimes")
        else:
            raise KindMismatch(f"categorical partition {spec.facet!r} takes category selections")
    elif isinstance(sel, CategorySelection):
        if not isinstance(g, CategoryList):
            raise KindMismatch(f"{spec.kind} partition {spec.facet!r} takes range selections")
    else:
        raise InvalidSelection(f"unknown selection {type(sel).__name__}")


def _check_partition_column(spec: PartitionSpec, column: Column) -> None:
    if column.kind != spec.kind:
        raise KindMismatch(
            f"partition on {spec.facet!r} expects a {spec.kind} facet, found {column.kind}"
        )


def _selection_mask(column: Column, spec: PartitionSpec, sel: Selection) -> np.ndarray:
    if isinstance(sel, RangeSelection):
        if isinstance(column, NumberColumn):
            if isinstance(sel.lo, datetime):
                raise KindMismatch(f"range over {spec.facet!r} must use numbers")
            v = column.values
            return (v >= float(sel.lo)) & (v < float(sel.hi))
        if isinstance(column, DatetimeColumn):
            if not isinstance(sel.lo, datetime):
                raise KindMismatch(f"range over {spec.facet!r} must use datetimes")
            lo, hi = to_epoch_ms(sel.lo), to_epoch_ms(sel.hi)
            return ~column.missing & (column.ms >= lo) & (column.ms < hi)
        raise KindMismatch(f"range selection needs a continuous or datetime facet, not {column.kind}")
    if isinstance(sel, CategorySelection):
        if not isinstance(column, CategoryColumn):
            raise KindMismatch(f"category selection needs a categorical facet, not {column.kind}")
        codes = column.codes
        if not column.categories:
            return np.zeros(len(codes), dtype=bool)
        allowed = np.zeros(len(column.categories), dtype=bool)
        for i, lab in enumerate(column.categories):
            if lab in sel.labels:
                allowed[i] = True
        return (codes >= 0) & allowed[np.maximum(codes, 0)]
    raise InvalidSelection(f"unknown selection {type(sel).__name__}")


class _Axis:
    """One partition resolved against a dataset: per-row ids + key domain."""

    __slots__ = ("valid", "row_ids", "domain")

    def __init__(self, valid: np.ndarray, row_ids: np.ndarray, domain):
        self.valid = valid
        self.row_ids = row_ids  # meaningful only where valid
        self.domain = domain  # None until finalized for cat/datetime axes


def _resolve_axis(dataset: Dataset, spec: PartitionSpec) -> tuple[_Axis, object]:
    column = dataset.column(spec.facet)
    _check_partition_column(spec, column)
    g = spec.grouping
    if isinstance(g, ContinuousBins):
        v = column.values
        valid = (v >= g.lo) & (v <= g.hi)
        with np.errstate(invalid="ignore", over="ignore"):
            e = np.floor((v - g.lo) * g.bin_count / (g.hi - g.lo))
            e = np.where(e >= g.bin_count, g.bin_count - 1, e)
        ids = np.where(valid, e, 0.0).astype(np.int64)
        domain = [BinKey(i, bin_label(g, i)) for i in range(g.bin_count)]
        return _Axis(valid, ids, domain), None
    if isinstance(g, CategoryList):
        codes = column.codes
        if g.categories is None:
            valid = codes >= 0
        elif not column.categories:
            valid = np.zeros(len(codes), dtype=bool)
        else:
            allowed = np.array([lab in g.categories for lab in column.categories], dtype=bool)
            valid = (codes >= 0) & allowed[np.maximum(codes, 0)]
        return _Axis(valid, codes.astype(np.int64), None), column
    assert isinstance(g, TimeInterval)
    valid = ~column.missing
    ids = _truncate_ms_array(column.ms, g.interval)
    return _Axis(valid, ids, None), None


def aggregate(
    dataset: Dataset,
    partitions: Sequence[PartitionSpec],
    aggregates: Sequence[AggregateSpec] = (),
    predicate: Predicate = (),
) -> list[GroupRow]:
    """Group the dataset by 1-3 partitions and reduce 0-4 aggregates per group.

    ``predicate`` is a conjunction of selections (each tied to the partition
    it came from); rows failing it are excluded before grouping.
    """
    if not 1 <= len(partitions) <= MAX_PARTITIONS:
        raise LimitExceeded(f"need 1..{MAX_PARTITIONS} partitions, got {len(partitions)}")
    if len(aggregates) > MAX_AGGREGATES:
        raise LimitExceeded(f"at most {MAX_AGGREGATES} aggregates, got {len(aggregates)}")
    for agg in aggregates:
        if agg.op != "count":
            col = dataset.column(agg.facet)
            if not isinstance(col, NumberColumn):
                raise KindMismatch(f"{agg.op} needs a continuous facet, {agg.facet!r} is {col.kind}")

    n = dataset.row_count
    mask = np.ones(n, dtype=bool)
    for pspec, sel in predicate:
        column = dataset.column(pspec.facet)
        _check_partition_column(pspec, column)
        mask &= _selection_mask(column, pspec, sel)

    axes = []
    cat_columns = []
    for spec in partitions:
        axis, cat_col = _resolve_axis(dataset, spec)
        axes.append(axis)
        cat_columns.append(cat_col)
        mask &= axis.valid

    rows = np.nonzero(mask)[0]

    # Finalize per-axis domains and survivor-aligned domain indices.
    sizes: list[int] = []
    domains: list[list] = []
    dom_ids: list[np.ndarray] = []
    for spec, axis, cat_col in zip(partitions, axes, cat_columns):
        ids = axis.row_ids[rows]
        if axis.domain is not None:  # continuous: dense, all bins
            domain = axis.domain
        elif isinstance(cat_col, CategoryColumn):
            observed = np.unique(ids)
            labels = [cat_col.categories[int(c)] for c in observed]
            order = np.argsort(np.array(labels, dtype=object), kind="stable")
            observed = observed[order]
            domain = [labels[int(i)] for i in order]
            pos = np.full(len(cat_col.categories) or 1, -1, dtype=np.int64)
            pos[observed] = np.arange(len(observed))
            ids = pos[ids]
        else:  # datetime: observed interval starts, already sortable ints
            observed = np.unique(ids)
            domain = [from_epoch_ms(int(t)) for t in observed]
            ids = np.searchsorted(observed, ids)
        sizes.append(len(domain))
        domains.append(domain)
        dom_ids.append(ids)

    total = 1
    for s in sizes:
        total *= s
    if total == 0:
        return []
    if total > MAX_GROUPS:
        raise LimitExceeded(f"dense group domain has {total} cells (limit {MAX_GROUPS})")

    gid = dom_ids[0]
    for s, ids in zip(sizes[1:], dom_ids[1:]):
        gid = gid * s + ids
    counts = np.bincount(gid, minlength=total)

    agg_values: list[np.ndarray] = []
    agg_present: list[np.ndarray] = []
    for spec_a in aggregates:
        if spec_a.op == "count":
            agg_values.append(counts.astype(np.float64))
            agg_present.append(np.ones(total, dtype=bool))
            continue
        x = dataset.column(spec_a.facet).values[rows]
        ok = ~np.isnan(x)
        gx = gid[ok]
        xs = x[ok]
        nb = np.bincount(gx, minlength=total)
        present = nb > 0
        nb_safe = np.where(present, nb, 1)
        if spec_a.op == "sum":
            out = np.bincount(gx, weights=xs, minlength=total)
        elif spec_a.op == "avg":
            out = np.bincount(gx, weights=xs, minlength=total) / nb_safe
        elif spec_a.op == "min":
            out = np.full(total, np.inf)
            np.minimum.at(out, gx, xs)
        elif spec_a.op == "max":
            out = np.full(total, -np.inf)
            np.maximum.at(out, gx, xs)
        else:  # population stddev, two-pass for stability
            mu = np.bincount(gx, weights=xs, minlength=total) / nb_safe
            dev = xs - mu[gx]
            out = np.sqrt(np.bincount(gx, weights=dev * dev, minlength=total) / nb_safe)
        agg_values.append(out)
        agg_present.append(present)

    index_grids = np.unravel_index(np.arange(total), sizes)
    result: list[GroupRow] = []
    for g in range(total):
        keys = tuple(domains[p][int(index_grids[p][g])] for p in range(len(partitions)))
        values = tuple(
            float(agg_values[a][g]) if agg_present[a][g] else None
            for a in range(len(aggregates))
        )
        result.append(GroupRow(keys=keys, count=int(counts[g]), values=values))
    return result


def scan_stats(dataset: Dataset, facet_name: str) -> FacetStats:
    """Vectorized FacetStats with the same contract as model.facet_stats."""
    from .model import SAMPLE_CATEGORY_LIMIT

    facet = dataset.facet(facet_name)
    column = dataset.column(facet_name)
    if isinstance(column, NumberColumn):
        v = column.values
        miss = np.isnan(v)
        nm = v[~miss]
        if nm.size == 0:
            return FacetStats(None, None, 0, int(miss.sum()))
        return FacetStats(
            float(nm.min()), float(nm.max()), int(np.unique(nm).size), int(miss.sum())
        )
    if isinstance(column, DatetimeColumn):
        nm = column.ms[~column.missing]
        missing = int(column.missing.sum())
        if nm.size == 0:
            return FacetStats(None, None, 0, missing)
        return FacetStats(
            from_epoch_ms(int(nm.min())),
            from_epoch_ms(int(nm.max())),
            int(np.unique(nm).size),
            missing,
        )
    if isinstance(column, CategoryColumn):
        codes = column.codes
        missing = int((codes < 0).sum())
        ncat = len(column.categories)
        counts = np.bincount(codes[codes >= 0], minlength=ncat) if ncat else np.array([], int)
        observed = [(column.categories[i], int(c)) for i, c in enumerate(counts) if c > 0]
        if not observed:
            return FacetStats(None, None, 0, missing)
        labels = [lab for lab, _ in observed]
        samples = tuple(sorted(observed, key=lambda kv: (-kv[1], kv[0]))[:SAMPLE_CATEGORY_LIMIT])
        return FacetStats(min(labels), max(labels), len(observed), missing, samples)
    assert isinstance(column, TextColumn)
    present = [v for v in column.values if v is not None]
    missing = len(column.values) - len(present)
    if not present:
        return FacetStats(None, None, 0, missing)
    return FacetStats(min(present), max(present), len(set(present)), missing)


def default_partition(facet: Facet, stats: FacetStats) -> PartitionSpec:
    """The partition a chart gets when the user configures nothing.

    Continuous facets get DEFAULT_BIN_COUNT bins over [min, max] (widened by
    one unit when the facet holds a single value); categorical facets accept
    every observed label; datetime facets pick the calendar interval matching
    the observed span.
    """
    if facet.kind == "continuous":
        lo = float(stats.min) if stats.min is not None else 0.0
        hi = float(stats.max) if stats.max is not None else 1.0
        if lo == hi:
            hi = lo + 1.0
        return PartitionSpec(facet.name, ContinuousBins(lo, hi, DEFAULT_BIN_COUNT))
    if facet.kind == "categorical":
        return PartitionSpec(facet.name, CategoryList(None))
    if facet.kind == "datetime":
        if stats.min is None or stats.max is None:
            return PartitionSpec(facet.name, TimeInterval("day"))
        span = to_epoch_ms(stats.max) - to_epoch_ms(stats.min)
        if span > 3 * 365 * 86_400_000:
            interval = "year"
        elif span > 90 * 86_400_000:
            interval = "month"
        elif span > 3 * 86_400_000:
            interval = "day"
        elif span > 3 * 3_600_000:
            interval = "hour"
        else:
            interval = "minute"
        return PartitionSpec(facet.name, TimeInterval(interval))
    raise KindMismatch(f"text facet {facet.name!r} cannot be partitioned")


class InMemoryBackend:
    """Execution backend over an in-process Dataset (shareable, immutable)."""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset

    @property
    def info(self):
        return self.dataset.info

    def aggregate(
        self,
        partitions: Sequence[PartitionSpec],
        aggregates: Sequence[AggregateSpec] = (),
        predicate: Predicate = (),
    ) -> list[GroupRow]:
        return aggregate(self.dataset, partitions, aggregates, predicate)

    def stats(self, facet_name: str) -> FacetStats:
        return scan_stats(self.dataset, facet_name)
