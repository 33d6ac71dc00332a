"""SQL bridge: compiles partition/aggregate/selection requests to one grouped
query per filter and runs them over a connection pool.

Only group rows cross the wire, never raw rows.  The continuous-bin
expression mirrors the in-memory engine exactly, including evaluation order
(``(col - lo) * bins / (hi - lo)``, left-associative IEEE doubles) and the
hi-clamps-to-last-bin rule, so both backends land every value in the same
bin.  Rows with NULL in any partition column are excluded by the WHERE
clause; NULL aggregate inputs are skipped by SQL aggregate semantics, which
matches the engine's missing-value rule.  Dense empty continuous bins are
backfilled bridge-side so output shape is identical to the in-memory
backend; SQL series generation is deliberately avoided to keep the generated
text portable.

User data values (range endpoints, category labels) always travel as bind
parameters; identifiers are double-quote escaped; structural constants (bin
counts, interval sizes) are inlined.  Identical inputs compile to
byte-identical SQL.

Datetime columns are bound as BIGINT epoch milliseconds.  Minute/hour/day
truncation uses floor-mod integer arithmetic (SQL's native % / MOD truncates
toward zero, which differs on negative timestamps); month/year truncation
goes through each dialect's calendar functions assuming UTC sessions.
"""

from __future__ import annotations

import itertools
import math
import queue
import re
import warnings
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .dataview import DataView, Filter, UpdateEvent
from .engine import (
    AggregateSpec,
    BinKey,
    CategoryList,
    CategorySelection,
    ContinuousBins,
    GroupRow,
    PartitionSpec,
    Predicate,
    RangeSelection,
    TimeInterval,
    bin_label,
    validate_selection,
)
from .errors import BackendError, IndexSkippedWarning, KindMismatch, NotFound
from .model import DatasetInfo, FacetStats, from_epoch_ms, to_epoch_ms

DEFAULT_POOL_SIZE = 8

_INTERVAL_MS = {"minute": 60_000, "hour": 3_600_000, "day": 86_400_000}


def quote_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


class Dialect(ABC):
    """Expression-generation seam; add a subclass to target another engine."""

    name: str = ""

    @abstractmethod
    def placeholder(self) -> str: ...

    @abstractmethod
    def floor_nonneg(self, expr: str) -> str:
        """Floor of an expression known to be >= 0 at evaluation time."""

    @abstractmethod
    def least(self, a: str, b: str) -> str: ...

    @abstractmethod
    def mod(self, a: str, b: str) -> str:
        """Truncating modulo (dialect-native); callers build floor-mod on top."""

    @abstractmethod
    def trunc_month_year(self, col: str, interval: str) -> str: ...

    @abstractmethod
    def connect(self, url: str): ...

    @abstractmethod
    def list_indexes(self, conn, table: str) -> set[str]: ...

    def floor_mod(self, a: str, b: int) -> str:
        inner = self.mod(a, str(b))
        return self.mod(f"({inner} + {b})", str(b))

    def trunc_datetime(self, col: str, interval: str) -> str:
        if interval in _INTERVAL_MS:
            unit = _INTERVAL_MS[interval]
            return f"({col} - {self.floor_mod(col, unit)})"
        return self.trunc_month_year(col, interval)

    def run(self, conn, sql: str, params: Sequence) -> list[tuple]:
        cur = conn.cursor()
        try:
            cur.execute(sql, tuple(params))
            return [tuple(row) for row in cur.fetchall()]
        finally:
            cur.close()

    def execute(self, conn, sql: str, params: Sequence = ()) -> None:
        cur = conn.cursor()
        try:
            cur.execute(sql, tuple(params))
            conn.commit()
        finally:
            cur.close()


class _WelfordStddev:
    """Population stddev UDF for SQLite (matches STDDEV_POP elsewhere)."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def step(self, value):
        if value is None:
            return
        v = float(value)
        self.n += 1
        delta = v - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (v - self.mean)

    def finalize(self):
        if self.n == 0:
            return None
        return math.sqrt(max(self.m2, 0.0) / self.n)


class SqliteDialect(Dialect):
    """Used for disposable local databases and the test suite."""

    name = "sqlite"

    def placeholder(self) -> str:
        return "?"

    def floor_nonneg(self, expr: str) -> str:
        # CAST truncates toward zero, which equals floor for non-negative
        # arguments; the WHERE clause guarantees col >= lo here.
        return f"CAST({expr} AS INTEGER)"

    def least(self, a: str, b: str) -> str:
        return f"MIN({a}, {b})"  # two-argument scalar MIN, not the aggregate

    def mod(self, a: str, b: str) -> str:
        return f"({a} % {b})"

    def trunc_month_year(self, col: str, interval: str) -> str:
        # Exact floor-division to whole seconds (the numerator is a multiple
        # of 1000, so truncating division is already exact).
        secs = f"(({col} - {self.floor_mod(col, 1000)}) / 1000)"
        start = {"month": "start of month", "year": "start of year"}[interval]
        return f"CAST(strftime('%s', datetime({secs}, 'unixepoch', '{start}')) AS INTEGER) * 1000"

    def connect(self, url: str):
        import sqlite3

        path = url
        if url.startswith("sqlite:///"):
            path = url[len("sqlite:///") :]
        elif url.startswith("sqlite://"):
            path = url[len("sqlite://") :]
        conn = sqlite3.connect(path or ":memory:", check_same_thread=False)
        conn.create_aggregate("stddev_pop", 1, _WelfordStddev)
        return conn

    def list_indexes(self, conn, table: str) -> set[str]:
        rows = self.run(
            conn,
            "SELECT name FROM sqlite_master WHERE type = 'index' AND tbl_name = ?",
            (table,),
        )
        return {r[0] for r in rows}


class PostgresDialect(Dialect):
    """Targets the PostgreSQL wire protocol (driver imported lazily).

    Sessions are assumed to run with UTC timezone and C collation; datetime
    truncation and label ordering are specified against that.
    """

    name = "postgresql"

    def placeholder(self) -> str:
        return "%s"

    def floor_nonneg(self, expr: str) -> str:
        # PostgreSQL CAST(float AS int) rounds half-even; FLOOR is required.
        return f"CAST(FLOOR({expr}) AS BIGINT)"

    def least(self, a: str, b: str) -> str:
        return f"LEAST({a}, {b})"

    def mod(self, a: str, b: str) -> str:
        # MOD() instead of % so generated text never needs %-escaping in
        # drivers that reserve % for placeholders.
        return f"MOD({a}, {b})"

    def trunc_month_year(self, col: str, interval: str) -> str:
        return (
            f"CAST(EXTRACT(EPOCH FROM DATE_TRUNC('{interval}', "
            f"TO_TIMESTAMP({col} / 1000.0) AT TIME ZONE 'UTC')) * 1000 AS BIGINT)"
        )

    def connect(self, url: str):
        try:
            import psycopg
        except ImportError as exc:
            raise BackendError(
                "PostgreSQL support needs the optional 'postgres' extra (psycopg)"
            ) from exc
        return psycopg.connect(url)

    def list_indexes(self, conn, table: str) -> set[str]:
        rows = self.run(
            conn, "SELECT indexname FROM pg_indexes WHERE tablename = %s", (table,)
        )
        return {r[0] for r in rows}


def dialect_for_url(url: str) -> Dialect:
    if url.startswith("sqlite:") or url == ":memory:" or not re.match(r"^[a-z+]+://", url):
        return SqliteDialect()
    if url.startswith(("postgresql:", "postgres:")):
        return PostgresDialect()
    raise BackendError(f"no dialect for database URL {url!r}")


class ConnectionPool:
    """Fixed-size pool; each query borrows one connection for its duration."""

    def __init__(self, url: str, size: int = DEFAULT_POOL_SIZE, dialect: Optional[Dialect] = None):
        if size < 1:
            raise BackendError("pool size must be at least 1")
        self.dialect = dialect or dialect_for_url(url)
        self.url = url
        # Every connection to a plain ":memory:" URL would get its own empty
        # database, so collapse to a single shared connection there.
        if self.dialect.name == "sqlite" and url.rstrip("/").endswith(":memory:"):
            size = 1
        self.size = size
        self._q: queue.Queue = queue.Queue()
        self._conns = [self.dialect.connect(url) for _ in range(size)]
        for conn in self._conns:
            self._q.put(conn)

    @contextmanager
    def connection(self):
        conn = self._q.get()
        try:
            yield conn
        finally:
            self._q.put(conn)

    def close(self) -> None:
        for conn in self._conns:
            try:
                conn.close()
            except Exception:
                pass
        self._conns = []


_SQL_TYPES = {"continuous": "DOUBLE PRECISION", "categorical": "TEXT", "datetime": "BIGINT", "text": "TEXT"}


@dataclass(frozen=True)
class TableBinding:
    """Maps a dataset's facets onto columns of one existing table."""

    info: DatasetInfo
    table: str
    columns: dict[str, str] = field(default_factory=dict)

    def column_for(self, facet_name: str) -> str:
        self.info.facet(facet_name)  # raises NotFound for unknown facets
        return self.columns.get(facet_name, facet_name)

    def sql_type(self, facet_name: str) -> str:
        return _SQL_TYPES[self.info.facet(facet_name).kind]


def create_table_sql(binding: TableBinding) -> str:
    """DDL matching the binding's column layout (tests seed databases with it)."""
    cols = ", ".join(
        f"{quote_ident(binding.column_for(f.name))} {binding.sql_type(f.name)}"
        for f in binding.info.facets
    )
    return f"CREATE TABLE {quote_ident(binding.table)} ({cols})"


@dataclass(frozen=True)
class CompiledQuery:
    sql: str
    params: tuple
    arity: int  # key columns + count + aggregate columns


def _key_expr(dialect: Dialect, binding: TableBinding, spec: PartitionSpec, params: list) -> str:
    col = quote_ident(binding.column_for(spec.facet))
    facet = binding.info.facet(spec.facet)
    if facet.kind != spec.kind:
        raise KindMismatch(
            f"partition on {spec.facet!r} expects a {spec.kind} facet, found {facet.kind}"
        )
    g = spec.grouping
    p = dialect.placeholder()
    if isinstance(g, ContinuousBins):
        params.extend([g.lo, g.hi, g.lo])
        raw = f"(({col} - {p}) * {g.bin_count} / ({p} - {p}))"
        return dialect.least(dialect.floor_nonneg(raw), str(g.bin_count - 1))
    if isinstance(g, CategoryList):
        return col
    assert isinstance(g, TimeInterval)
    return dialect.trunc_datetime(col, g.interval)


def _validity_sql(dialect: Dialect, binding: TableBinding, spec: PartitionSpec, params: list) -> str:
    col = quote_ident(binding.column_for(spec.facet))
    g = spec.grouping
    p = dialect.placeholder()
    if isinstance(g, ContinuousBins):
        params.extend([g.lo, g.hi])
        return f"({col} >= {p} AND {col} <= {p})"
    if isinstance(g, CategoryList):
        if g.categories is None:
            return f"{col} IS NOT NULL"
        if not g.categories:
            return "1 = 0"
        marks = ", ".join(p for _ in g.categories)
        params.extend(g.categories)
        return f"{col} IN ({marks})"
    return f"{col} IS NOT NULL"


def _selection_sql(
    dialect: Dialect, binding: TableBinding, spec: PartitionSpec, sel, params: list
) -> str:
    validate_selection(spec, sel)
    facet = binding.info.facet(spec.facet)
    if facet.kind != spec.kind:
        raise KindMismatch(
            f"selection on {spec.facet!r} expects a {spec.kind} facet, found {facet.kind}"
        )
    col = quote_ident(binding.column_for(spec.facet))
    p = dialect.placeholder()
    if isinstance(sel, RangeSelection):
        if isinstance(sel.lo, (int, float)):
            params.extend([float(sel.lo), float(sel.hi)])
        else:
            params.extend([to_epoch_ms(sel.lo), to_epoch_ms(sel.hi)])
        return f"({col} >= {p} AND {col} < {p})"
    assert isinstance(sel, CategorySelection)
    labels = sorted(sel.labels)  # stable parameter order for determinism
    marks = ", ".join(p for _ in labels)
    params.extend(labels)
    return f"{col} IN ({marks})"


def compile_aggregation(
    binding: TableBinding,
    partitions: Sequence[PartitionSpec],
    aggregates: Sequence[AggregateSpec] = (),
    predicate: Predicate = (),
    dialect: Optional[Dialect] = None,
) -> CompiledQuery:
    dialect = dialect or PostgresDialect()
    if not 1 <= len(partitions) <= 3:
        raise KindMismatch(f"need 1..3 partitions, got {len(partitions)}")
    params: list = []
    select_parts: list[str] = []
    for spec in partitions:
        select_parts.append(_key_expr(dialect, binding, spec, params))
    select_parts.append("COUNT(*)")
    for agg in aggregates:
        if agg.op == "count":
            select_parts.append("COUNT(*)")
            continue
        facet = binding.info.facet(agg.facet)
        if facet.kind != "continuous":
            raise KindMismatch(f"{agg.op} needs a continuous facet, {agg.facet!r} is {facet.kind}")
        col = quote_ident(binding.column_for(agg.facet))
        fn = {"sum": "SUM", "avg": "AVG", "min": "MIN", "max": "MAX", "stddev": "STDDEV_POP"}[agg.op]
        select_parts.append(f"{fn}({col})")

    where_parts: list[str] = []
    for pspec, sel in predicate:
        where_parts.append(_selection_sql(dialect, binding, pspec, sel, params))
    for spec in partitions:
        where_parts.append(_validity_sql(dialect, binding, spec, params))

    ordinals = ", ".join(str(i + 1) for i in range(len(partitions)))
    sql = (
        "SELECT "
        + ", ".join(select_parts)
        + " FROM "
        + quote_ident(binding.table)
        + " WHERE "
        + " AND ".join(where_parts)
        + f" GROUP BY {ordinals} ORDER BY {ordinals}"
    )
    return CompiledQuery(sql=sql, params=tuple(params), arity=len(partitions) + 1 + len(aggregates))


def _decode_key(spec: PartitionSpec, raw):
    g = spec.grouping
    if isinstance(g, ContinuousBins):
        i = int(raw)
        return BinKey(i, bin_label(g, i))
    if isinstance(g, CategoryList):
        return str(raw)
    return from_epoch_ms(int(raw))


def _backfill(
    partitions: Sequence[PartitionSpec],
    aggregates: Sequence[AggregateSpec],
    rows: list[tuple],
) -> list[GroupRow]:
    """Expand sparse SQL groups to the engine's dense, canonically sorted shape."""
    k = len(partitions)
    decoded: dict[tuple, tuple[int, tuple]] = {}
    observed: list[set] = [set() for _ in range(k)]
    for row in rows:
        keys = tuple(_decode_key(spec, row[i]) for i, spec in enumerate(partitions))
        for i, key in enumerate(keys):
            observed[i].add(key)
        count = int(row[k])
        values = tuple(None if v is None else float(v) for v in row[k + 1 :])
        decoded[keys] = (count, values)

    domains: list[list] = []
    for i, spec in enumerate(partitions):
        if isinstance(spec.grouping, ContinuousBins):
            g = spec.grouping
            domains.append([BinKey(j, bin_label(g, j)) for j in range(g.bin_count)])
        else:
            domains.append(sorted(observed[i]))
    if any(not d for d in domains):
        return []

    empty_values = tuple(0.0 if a.op == "count" else None for a in aggregates)
    out: list[GroupRow] = []
    for keys in itertools.product(*domains):
        count, values = decoded.get(keys, (0, empty_values))
        out.append(GroupRow(keys=keys, count=count, values=values))
    return out


class SqlTableBackend:
    """Backend protocol implementation over one bound table."""

    def __init__(self, binding: TableBinding, pool: ConnectionPool):
        self.binding = binding
        self.pool = pool
        self.dialect = pool.dialect
        probe = f"SELECT * FROM {quote_ident(binding.table)} WHERE 1 = 0"
        try:
            with self.pool.connection() as conn:
                self.dialect.run(conn, probe, ())
        except Exception as exc:
            raise NotFound(f"table {binding.table!r} is not reachable: {exc}") from exc

    @property
    def info(self) -> DatasetInfo:
        return self.binding.info

    def aggregate(
        self,
        partitions: Sequence[PartitionSpec],
        aggregates: Sequence[AggregateSpec] = (),
        predicate: Predicate = (),
    ) -> list[GroupRow]:
        if len(aggregates) > 4:
            raise KindMismatch(f"at most 4 aggregates, got {len(aggregates)}")
        compiled = compile_aggregation(
            self.binding, partitions, aggregates, predicate, dialect=self.dialect
        )
        try:
            with self.pool.connection() as conn:
                raw = self.dialect.run(conn, compiled.sql, compiled.params)
        except Exception as exc:
            raise BackendError(f"query failed: {exc}") from exc
        return _backfill(partitions, aggregates, raw)

    def stats(self, facet_name: str) -> FacetStats:
        facet = self.binding.info.facet(facet_name)
        col = quote_ident(self.binding.column_for(facet_name))
        table = quote_ident(self.binding.table)
        base = (
            f"SELECT MIN({col}), MAX({col}), COUNT(DISTINCT {col}), COUNT(*) - COUNT({col}) "
            f"FROM {table}"
        )
        with self.pool.connection() as conn:
            mn, mx, distinct, missing = self.dialect.run(conn, base, ())[0]
            samples: tuple = ()
            if facet.kind == "categorical" and distinct:
                rows = self.dialect.run(
                    conn,
                    f"SELECT {col}, COUNT(*) FROM {table} WHERE {col} IS NOT NULL "
                    f"GROUP BY {col} ORDER BY COUNT(*) DESC, {col} ASC LIMIT 256",
                    (),
                )
                samples = tuple((str(lab), int(n)) for lab, n in rows)
        if distinct == 0 or mn is None:
            return FacetStats(None, None, 0, int(missing))
        if facet.kind == "datetime":
            mn, mx = from_epoch_ms(int(mn)), from_epoch_ms(int(mx))
        elif facet.kind == "continuous":
            mn, mx = float(mn), float(mx)
        return FacetStats(mn, mx, int(distinct), int(missing), samples)

    def ensure_indices(self, facet_names: Sequence[str]) -> list[str]:
        """Idempotently create one single-column index per facet."""
        created: list[str] = []
        with self.pool.connection() as conn:
            existing = self.dialect.list_indexes(conn, self.binding.table)
            for name in facet_names:
                col = self.binding.column_for(name)
                safe = re.sub(r"[^A-Za-z0-9_]", "_", f"{self.binding.table}_{col}")[:48]
                index_name = f"spot_idx_{safe}"
                if index_name in existing:
                    continue
                ddl = (
                    f"CREATE INDEX {quote_ident(index_name)} ON "
                    f"{quote_ident(self.binding.table)} ({quote_ident(col)})"
                )
                try:
                    self.dialect.execute(conn, ddl)
                except Exception as exc:
                    warnings.warn(
                        f"index on {name!r} skipped: {exc}", IndexSkippedWarning, stacklevel=2
                    )
                    continue
                created.append(index_name)
        return created

    def close(self) -> None:
        self.pool.close()


def ensure_indices(backend: SqlTableBackend, facet_names: Sequence[str]) -> list[str]:
    return backend.ensure_indices(facet_names)


def execute_view(
    backend: SqlTableBackend,
    filters: Sequence[Filter],
    *,
    include_self: bool = False,
    max_workers: Optional[int] = None,
    timeout: Optional[float] = 120.0,
):
    """Run every filter's query concurrently, yielding UpdateEvents as they land.

    Parallelism is bounded by the connection pool: each in-flight query holds
    one pooled connection.  Per-filter failures become error events; the
    other filters are unaffected.
    """
    workers = max_workers if max_workers is not None else backend.pool.size
    view = DataView(backend, include_self=include_self, max_workers=max(workers, 1))
    try:
        for filt in filters:
            view.add_filter(filt)
        yield from view.update_all(timeout=timeout)
    finally:
        view.close()
