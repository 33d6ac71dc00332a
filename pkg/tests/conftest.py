"""Shared fixtures and converters between oracle rows and package types.

The oracle (tests/oracle.py) works on lists of plain dicts; the package
works on column arrays. The helpers here translate inputs both ways and
compare outputs under the pinned tolerance. Conversion is plumbing; all
arithmetic under test lives on exactly one side of the comparison.
"""

from __future__ import annotations

import math
import random
import sqlite3
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from spot.engine import (
    AggregateSpec,
    CategoryList,
    CategorySelection,
    ContinuousBins,
    PartitionSpec,
    RangeSelection,
    TimeInterval,
)
from spot.model import (
    CategoryColumn,
    Dataset,
    DatetimeColumn,
    Facet,
    NumberColumn,
    TextColumn,
)
from spot.sqlbackend import ConnectionPool, SqlTableBackend, TableBinding, create_table_sql

import oracle

TOL = 1e-9
EXACT_OPS = {"count", "min", "max"}


def close(a, b, tol: float = TOL) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


# ---------------------------------------------------------------------------
# oracle rows -> Dataset

def build_dataset(rows, kinds, *, dataset_id="d", name="test data") -> Dataset:
    """Column-ify oracle rows. kinds maps facet name -> kind string."""
    n = len(rows)
    facets = tuple(Facet(fname, kind) for fname, kind in kinds.items())
    columns = {}
    for fname, kind in kinds.items():
        cells = [row.get(fname) for row in rows]
        if kind == "continuous":
            arr = np.array(
                [math.nan if v is None else float(v) for v in cells], dtype=np.float64
            )
            columns[fname] = NumberColumn(arr)
        elif kind == "categorical":
            labels = sorted({v for v in cells if v is not None})
            index = {v: i for i, v in enumerate(labels)}
            codes = np.array(
                [-1 if v is None else index[v] for v in cells], dtype=np.int32
            )
            columns[fname] = CategoryColumn(codes, tuple(labels))
        elif kind == "datetime":
            ms = np.array(
                [0 if v is None else oracle.to_ms(v) for v in cells], dtype=np.int64
            )
            missing = np.array([v is None for v in cells], dtype=bool)
            columns[fname] = DatetimeColumn(ms, missing)
        elif kind == "text":
            columns[fname] = TextColumn(["" if v is None else str(v) for v in cells])
        else:
            raise ValueError(kind)
    assert n == 0 or all(len(c) == n for c in columns.values())
    return Dataset(dataset_id, name, facets, columns)


# ---------------------------------------------------------------------------
# oracle dict specs -> engine specs

def to_partition(spec) -> PartitionSpec:
    kind = spec["kind"]
    if kind == "continuous":
        grouping = ContinuousBins(spec["lo"], spec["hi"], spec["bins"])
    elif kind == "categorical":
        cats = spec["categories"]
        grouping = CategoryList(None if cats is None else tuple(cats))
    elif kind == "datetime":
        grouping = TimeInterval(spec["interval"])
    else:
        raise ValueError(kind)
    return PartitionSpec(spec["facet"], grouping)


def to_selection(sel):
    if sel["type"] == "range":
        return RangeSelection(sel["lo"], sel["hi"])
    return CategorySelection(frozenset(sel["labels"]))


def to_aggregates(pairs) -> tuple[AggregateSpec, ...]:
    return tuple(AggregateSpec(op, facet) for op, facet in pairs)


def to_predicate(selections, partitions):
    """Pair each oracle selection with the partition spec it belongs to."""
    by_facet = {p["facet"]: to_partition(p) for p in partitions}
    return tuple((by_facet[sel["facet"]], to_selection(sel)) for sel in selections)


# ---------------------------------------------------------------------------
# engine output -> comparable shape

def plain_key(key):
    if isinstance(key, tuple):  # BinKey
        return (key.index, key.label)
    return key


def comparable(group_rows):
    return [
        (tuple(plain_key(k) for k in r.keys), r.count, tuple(r.values))
        for r in group_rows
    ]


def assert_rows_match(got_rows, want, ops=(), tol=TOL):
    """got_rows: engine/bridge GroupRows. want: oracle (keys, count, values)."""
    got = comparable(got_rows)
    assert len(got) == len(want), f"{len(got)} groups != oracle {len(want)}"
    for (gk, gc, gv), (wk, wc, wv) in zip(got, want):
        assert gk == wk, f"keys {gk!r} != {wk!r}"
        assert gc == wc, f"count {gc} != {wc} at {gk!r}"
        assert len(gv) == len(wv)
        for (op, _), a, b in zip(ops, gv, wv):
            if op in EXACT_OPS:
                assert a == b or (a is None and b is None), f"{op} {a!r} != {b!r} at {gk!r}"
            else:
                assert close(a, b, tol), f"{op} {a!r} !~ {b!r} at {gk!r}"


# ---------------------------------------------------------------------------
# sqlite seeding

def seed_sqlite(dataset: Dataset, url: str, table: str = "data"):
    """Create and populate a table mirroring the dataset; returns a backend."""
    binding = TableBinding(dataset.info, table)
    conn = sqlite3.connect(url[len("sqlite:///"):] if url.startswith("sqlite:///") else url)
    conn.execute(create_table_sql(binding))
    names = [f.name for f in dataset.info.facets]
    rows = []
    for i in range(dataset.row_count):
        row = []
        for fname in names:
            col = dataset.columns[fname]
            if isinstance(col, NumberColumn):
                v = float(col.values[i])
                row.append(None if math.isnan(v) else v)
            elif isinstance(col, CategoryColumn):
                code = int(col.codes[i])
                row.append(None if code < 0 else col.categories[code])
            elif isinstance(col, DatetimeColumn):
                row.append(None if col.missing[i] else int(col.ms[i]))
            else:
                row.append(col.values[i])
        rows.append(tuple(row))
    placeholders = ", ".join("?" for _ in names)
    quoted = ", ".join('"%s"' % n.replace('"', '""') for n in names)
    qtable = '"%s"' % table.replace('"', '""')
    conn.executemany(
        f"INSERT INTO {qtable} ({quoted}) VALUES ({placeholders})", rows
    )
    conn.commit()
    conn.close()
    pool = ConnectionPool(url, size=2)
    return SqlTableBackend(binding, pool), pool


@pytest.fixture
def sqlite_backend_factory(tmp_path):
    """Yields a function(dataset) -> SqlTableBackend over a temp file DB."""
    pools = []
    counter = [0]

    def factory(dataset: Dataset) -> SqlTableBackend:
        counter[0] += 1
        url = f"sqlite:///{tmp_path}/db{counter[0]}.sqlite"
        backend, pool = seed_sqlite(dataset, url)
        pools.append(pool)
        return backend

    yield factory
    for pool in pools:
        pool.close()


# ---------------------------------------------------------------------------
# randomized cases (seeded; shared by property tests and the acceptance gate)

CATEGORY_POOL = ("alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta")
_T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)
_T1 = datetime(2024, 1, 1, tzinfo=timezone.utc)
_SPAN_MS = (_T1 - _T0) // timedelta(milliseconds=1)


def _quarter(rng: random.Random, lo: float, hi: float) -> float:
    """Grid float: an exact multiple of 0.25 in [lo, hi]."""
    return rng.randrange(int(lo * 4), int(hi * 4) + 1) / 4.0


def random_rows(rng: random.Random, n: int, missing_p: float = 0.12):
    rows = []
    for _ in range(n):
        rows.append({
            "x": None if rng.random() < missing_p else _quarter(rng, -100, 100),
            "y": None if rng.random() < missing_p else _quarter(rng, 0, 50),
            "c": None if rng.random() < missing_p else rng.choice(CATEGORY_POOL),
            "t": None if rng.random() < missing_p
            else _T0 + timedelta(milliseconds=rng.randrange(_SPAN_MS)),
        })
    return rows


KINDS = {"x": "continuous", "y": "continuous", "c": "categorical", "t": "datetime"}


def random_partition(rng: random.Random, facet: str):
    kind = KINDS[facet]
    if kind == "continuous":
        lo = _quarter(rng, -110, 90)
        hi = lo + _quarter(rng, 0.25, 60)
        return {"facet": facet, "kind": kind, "lo": lo, "hi": hi,
                "bins": rng.randint(1, 25)}
    if kind == "categorical":
        if rng.random() < 0.5:
            cats = None
        else:
            k = rng.randint(1, len(CATEGORY_POOL))
            cats = rng.sample(CATEGORY_POOL, k)
            if rng.random() < 0.3:
                cats.append("ghost")
        return {"facet": facet, "kind": kind, "categories": cats}
    return {"facet": facet, "kind": kind,
            "interval": rng.choice(("minute", "hour", "day", "month", "year"))}


def random_selection(rng: random.Random, spec):
    if spec["kind"] == "continuous":
        lo = _quarter(rng, spec["lo"] - 10, spec["hi"])
        hi = lo + _quarter(rng, 0.25, 20)
        return {"facet": spec["facet"], "type": "range", "lo": lo, "hi": hi}
    if spec["kind"] == "datetime":
        start = rng.randrange(_SPAN_MS)
        lo = _T0 + timedelta(milliseconds=start)
        hi = lo + timedelta(milliseconds=rng.randrange(1, _SPAN_MS // 4))
        return {"facet": spec["facet"], "type": "range", "lo": lo, "hi": hi}
    labels = set(rng.sample(CATEGORY_POOL, rng.randint(1, 4)))
    return {"facet": spec["facet"], "type": "categories", "labels": labels}


def random_case(rng: random.Random, max_rows: int = 10_000):
    """One randomized scenario: rows, partitions, aggregates, selections."""
    rows = random_rows(rng, rng.randrange(0, max_rows + 1))
    facets = rng.sample(list(KINDS), rng.randint(1, 3))
    partitions = [random_partition(rng, f) for f in facets]
    # cap the dense grid so a 25-bin triple does not dominate runtime
    while _grid_size(partitions) > 4000:
        partitions.pop()
    aggregates = [
        ("count", None) if rng.random() < 0.25
        else (rng.choice(("sum", "avg", "min", "max", "stddev")), rng.choice("xy"))
        for _ in range(rng.randint(0, 4))
    ]
    selections = [
        random_selection(rng, spec)
        for spec in rng.sample(partitions, rng.randint(0, min(2, len(partitions))))
    ]
    return rows, partitions, aggregates, selections


def _grid_size(partitions) -> int:
    size = 1
    for p in partitions:
        if p["kind"] == "continuous":
            size *= p["bins"]
        elif p["kind"] == "categorical":
            size *= len(p["categories"] or CATEGORY_POOL)
        else:
            size *= 40
    return size


def run_both(dataset, rows, partitions, aggregates, selections, backend=None):
    """Aggregate via the engine (or a given backend) and via the oracle."""
    from spot.engine import InMemoryBackend

    engine_backend = backend or InMemoryBackend(dataset)
    got = engine_backend.aggregate(
        [to_partition(p) for p in partitions],
        to_aggregates(aggregates),
        to_predicate(selections, partitions),
    )
    want = oracle.aggregate(rows, partitions, aggregates, selections)
    return got, want
