"""Linked views: every filter's result reacts to every other filter's brush.

Semantics (crossfilter-style self-exclusion): filter F is computed under the
conjunction of the selections of all filters EXCEPT F, so a brushed histogram
keeps showing its own full distribution while everything else narrows.  Pass
include_self=True to a DataView to make each filter honor its own selection
too.

Concurrency: mutations (add/remove/set_selection) are serialized by a single
reentrant lock and bump the revision by exactly one.  Each mutation launches
one recompute job per live filter on a thread pool; jobs snapshot their
predicate at launch.  A delivery gate drops results whose revision is no
longer current and deduplicates per (filter, revision), so observers never
see revision r after r+1 for the same filter and see at most one event per
filter per revision.  Subscriber callbacks run under the delivery lock: keep
them fast and never block in them waiting for another event.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Protocol, Sequence

from .errors import (
    Conflict,
    InvalidSpec,
    KindMismatch,
    LimitExceeded,
    NotFound,
    SessionStateError,
)
from .model import DatasetInfo, FacetStats
from .engine import (
    MAX_AGGREGATES,
    MAX_PARTITIONS,
    AggregateSpec,
    GroupRow,
    PartitionSpec,
    Predicate,
    Selection,
    validate_selection,
)


class Backend(Protocol):
    """What a DataView needs from an execution backend."""

    @property
    def info(self) -> DatasetInfo: ...

    def aggregate(
        self,
        partitions: Sequence[PartitionSpec],
        aggregates: Sequence[AggregateSpec] = (),
        predicate: Predicate = (),
    ) -> list[GroupRow]: ...

    def stats(self, facet_name: str) -> FacetStats: ...


@dataclass
class Filter:
    """One chart's data demand: partitions to group by, aggregates to reduce.

    ``selections`` maps a partition facet name to the current brush on that
    axis; it is owned by the DataView once added (mutate via set_selection).
    ``chart_kind`` is opaque here, the dashboard interprets it.
    """

    id: str
    partitions: tuple[PartitionSpec, ...]
    aggregates: tuple[AggregateSpec, ...] = ()
    selections: dict[str, Selection] = field(default_factory=dict)
    chart_kind: str = ""

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise InvalidSpec("filter id must be a non-empty string")
        self.partitions = tuple(self.partitions)
        self.aggregates = tuple(self.aggregates)
        if not 1 <= len(self.partitions) <= MAX_PARTITIONS:
            raise LimitExceeded(
                f"filter needs 1..{MAX_PARTITIONS} partitions, got {len(self.partitions)}"
            )
        if len(self.aggregates) > MAX_AGGREGATES:
            raise LimitExceeded(
                f"filter takes at most {MAX_AGGREGATES} aggregates, got {len(self.aggregates)}"
            )
        self.selections = dict(self.selections)
        for facet, sel in self.selections.items():
            validate_selection(self._partition_for(facet), sel)

    def _partition_for(self, facet: str) -> PartitionSpec:
        for p in self.partitions:
            if p.facet == facet:
                return p
        raise NotFound(f"filter {self.id!r} has no partition on facet {facet!r}")


@dataclass(frozen=True)
class UpdateEvent:
    """One filter's recomputed result (or failure) at one revision."""

    revision: int
    filter_id: str
    rows: Optional[tuple[GroupRow, ...]]
    error: Optional[str] = None
    seq: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None


class DataView:
    def __init__(
        self,
        backend: Backend,
        *,
        include_self: bool = False,
        executor: Optional[ThreadPoolExecutor] = None,
        max_workers: int = 4,
    ):
        self.backend = backend
        self.include_self = include_self
        self._own_executor = executor is None
        self._executor = executor or ThreadPoolExecutor(
            max_workers=max_workers, thread_name_prefix="spot-view"
        )
        self._lock = threading.RLock()
        self._cond = threading.Condition(self._lock)
        self._filters: dict[str, Filter] = {}
        self.revision = 0
        self._delivered: set[tuple[str, int]] = set()
        self._launched: set[tuple[str, int]] = set()
        self._seq = 0
        self._last: dict[str, UpdateEvent] = {}
        self._subscribers: list[Callable[[UpdateEvent], None]] = []
        self._closed = False
        # Called under the lock right after each revision bump, before any
        # event of that revision can be delivered (the server acks here).
        self.mutation_listener: Optional[Callable[[int], None]] = None

    # -- introspection ----------------------------------------------------

    @property
    def filters(self) -> tuple[Filter, ...]:
        with self._lock:
            return tuple(self._filters.values())

    def filter(self, filter_id: str) -> Filter:
        with self._lock:
            try:
                return self._filters[filter_id]
            except KeyError:
                raise NotFound(f"no filter {filter_id!r}") from None

    def results(self) -> dict[str, UpdateEvent]:
        """Last delivered event per live filter (possibly from an older revision)."""
        with self._lock:
            return dict(self._last)

    def state_snapshot(self) -> tuple[int, tuple[Filter, ...], dict[str, UpdateEvent]]:
        """Revision, filters, and last events read under one lock acquisition."""
        with self._lock:
            return self.revision, tuple(self._filters.values()), dict(self._last)

    # -- mutations (single-writer) ----------------------------------------

    def add_filter(self, filt: Filter) -> int:
        with self._cond:
            self._check_open()
            if filt.id in self._filters:
                raise Conflict(f"filter id {filt.id!r} already in view")
            self._validate_filter(filt)
            self._filters[filt.id] = filt
            return self._bump_and_launch()

    def remove_filter(self, filter_id: str) -> int:
        with self._cond:
            self._check_open()
            if filter_id not in self._filters:
                raise NotFound(f"no filter {filter_id!r}")
            del self._filters[filter_id]
            self._last.pop(filter_id, None)
            return self._bump_and_launch()

    def set_selection(
        self, filter_id: str, selection: Optional[Selection], facet: Optional[str] = None
    ) -> int:
        """Brush one partition axis of a filter; selection=None clears it."""
        with self._cond:
            self._check_open()
            filt = self.filter(filter_id)
            if selection is None:
                if facet is None:
                    filt.selections.clear()
                else:
                    filt.selections.pop(facet, None)
            else:
                facet = facet if facet is not None else filt.partitions[0].facet
                pspec = filt._partition_for(facet)
                validate_selection(pspec, selection)
                filt.selections[facet] = selection
            return self._bump_and_launch()

    def clear_selection(self, filter_id: str, facet: Optional[str] = None) -> int:
        return self.set_selection(filter_id, None, facet)

    # -- streaming --------------------------------------------------------

    def subscribe(self, callback: Callable[[UpdateEvent], None]) -> Callable[[], None]:
        with self._lock:
            self._subscribers.append(callback)

        def unsubscribe() -> None:
            with self._lock:
                if callback in self._subscribers:
                    self._subscribers.remove(callback)

        return unsubscribe

    def update_all(self, timeout: Optional[float] = 60.0) -> Iterator[UpdateEvent]:
        """Yield one event per live filter for the current revision.

        Replays already-delivered current-revision results first, launches
        whatever is missing, then streams fresh deliveries.  If the revision
        advances mid-stream the iterator keeps going until the newest
        revision is fully delivered (abandoned older events are simply never
        seen, matching the delivery gate).
        """
        end = None if timeout is None else time.monotonic() + timeout
        yielded: set[tuple[str, int]] = set()
        launched_once = False
        while True:
            with self._cond:
                self._check_open()
                if not launched_once:
                    self._launch_all()
                    launched_once = True
                cur = self.revision
                fresh = [
                    ev
                    for fid, ev in self._last.items()
                    if fid in self._filters
                    and ev.revision == cur
                    and (fid, ev.revision) not in yielded
                ]
                complete = all(
                    fid in self._last and self._last[fid].revision == cur
                    for fid in self._filters
                )
                if not fresh and not complete:
                    remaining = None if end is None else end - time.monotonic()
                    if remaining is not None and remaining <= 0:
                        raise TimeoutError("update_all timed out waiting for filter results")
                    self._cond.wait(remaining)
                    continue
            for ev in sorted(fresh, key=lambda e: e.seq):
                yielded.add((ev.filter_id, ev.revision))
                yield ev
            if complete:
                return

    # -- lifecycle ---------------------------------------------------------

    def close(self, wait: bool = True) -> None:
        with self._cond:
            if self._closed:
                return
            self._closed = True
            self._cond.notify_all()
        if self._own_executor:
            self._executor.shutdown(wait=wait, cancel_futures=True)

    def __enter__(self) -> "DataView":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- internals ---------------------------------------------------------

    def _check_open(self) -> None:
        if self._closed:
            raise SessionStateError("view is closed")

    def _validate_filter(self, filt: Filter) -> None:
        info = self.backend.info
        for p in filt.partitions:
            facet = info.facet(p.facet)
            if facet.kind != p.kind:
                raise KindMismatch(
                    f"partition on {p.facet!r} expects a {p.kind} facet, found {facet.kind}"
                )
        for a in filt.aggregates:
            if a.op != "count":
                facet = info.facet(a.facet)
                if facet.kind != "continuous":
                    raise KindMismatch(
                        f"{a.op} needs a continuous facet, {a.facet!r} is {facet.kind}"
                    )

    def _bump_and_launch(self) -> int:
        self.revision += 1
        self._seq = 0
        self._delivered.clear()
        self._launched.clear()
        if self.mutation_listener is not None:
            self.mutation_listener(self.revision)
        self._launch_all()
        self._cond.notify_all()
        return self.revision

    def _launch_all(self) -> None:
        rev = self.revision
        for filt in self._filters.values():
            key = (filt.id, rev)
            if key in self._launched or key in self._delivered:
                continue
            last = self._last.get(filt.id)
            if last is not None and last.revision == rev:
                continue
            self._launched.add(key)
            self._executor.submit(
                self._job,
                filt.id,
                rev,
                filt.partitions,
                filt.aggregates,
                self._predicate_for(filt),
            )

    def _predicate_for(self, target: Filter) -> tuple[tuple[PartitionSpec, Selection], ...]:
        pred: list[tuple[PartitionSpec, Selection]] = []
        for filt in self._filters.values():
            if filt.id == target.id and not self.include_self:
                continue
            for facet, sel in filt.selections.items():
                pred.append((filt._partition_for(facet), sel))
        return tuple(pred)

    def _job(self, filter_id, rev, partitions, aggregates, predicate) -> None:
        with self._lock:
            if self.revision != rev or self._closed:
                return  # abandoned before compute
        try:
            rows = tuple(self.backend.aggregate(partitions, aggregates, predicate))
            err = None
        except Exception as exc:  # delivered as a per-filter error event
            rows, err = None, f"{type(exc).__name__}: {exc}"
        self._deliver(filter_id, rev, rows, err)

    def _deliver(self, filter_id, rev, rows, err) -> None:
        with self._cond:
            if self._closed or self.revision != rev:
                return
            if (filter_id, rev) in self._delivered or filter_id not in self._filters:
                return
            event = UpdateEvent(
                revision=rev, filter_id=filter_id, rows=rows, error=err, seq=self._seq
            )
            self._seq += 1
            self._delivered.add((filter_id, rev))
            self._last[filter_id] = event
            self._cond.notify_all()
            for callback in list(self._subscribers):
                callback(event)
