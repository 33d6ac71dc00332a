"""DataView: linked filters, self-exclusion, revisions, event delivery."""

from __future__ import annotations

import random
import threading
import time

import pytest

from conftest import KINDS, build_dataset, random_rows
from spot.dataview import DataView, Filter, UpdateEvent
from spot.engine import (
    AggregateSpec,
    CategoryList,
    CategorySelection,
    ContinuousBins,
    InMemoryBackend,
    PartitionSpec,
    RangeSelection,
)
from spot.errors import (
    Conflict,
    InvalidSelection,
    InvalidSpec,
    KindMismatch,
    LimitExceeded,
    NotFound,
    SessionStateError,
)


def three_row_backend():
    ds = build_dataset(
        [{"x": 1.0, "y": 1.0}, {"x": 2.0, "y": 2.0}, {"x": 3.0, "y": 3.0}],
        {"x": "continuous", "y": "continuous"},
    )
    return InMemoryBackend(ds)


def unit_bins(facet):
    return PartitionSpec(facet, ContinuousBins(1.0, 4.0, 3))


def filter_a():
    return Filter(id="A", partitions=(unit_bins("x"),))


def filter_b():
    return Filter(id="B", partitions=(unit_bins("y"),))


def drain(view, timeout=10.0):
    return {e.filter_id: e for e in view.update_all(timeout=timeout)}


class WrappedBackend:
    """Pass-through backend with per-facet delay or failure injection."""

    def __init__(self, inner, *, delay_facet=None, delay=0.0, fail_facet=None,
                 release=None):
        self.inner = inner
        self.delay_facet = delay_facet
        self.delay = delay
        self.fail_facet = fail_facet
        self.release = release  # optional threading.Event gating the delay
        self.finished = []

    @property
    def info(self):
        return self.inner.info

    def aggregate(self, partitions, aggregates=(), predicate=()):
        facet = partitions[0].facet
        if facet == self.fail_facet:
            raise RuntimeError(f"injected failure for {facet}")
        if facet == self.delay_facet:
            if self.release is not None:
                self.release.wait(timeout=30)
            else:
                time.sleep(self.delay)
        out = self.inner.aggregate(partitions, aggregates, predicate)
        self.finished.append(facet)
        return out

    def stats(self, facet_name):
        return self.inner.stats(facet_name)


# ---------------------------------------------------------------------------
# Filter validation

def test_filter_limits():
    p = unit_bins("x")
    with pytest.raises(LimitExceeded):
        Filter(id="f", partitions=(p,) * 4)
    with pytest.raises(LimitExceeded):
        Filter(id="f", partitions=())
    with pytest.raises(LimitExceeded):
        Filter(id="f", partitions=(p,), aggregates=(AggregateSpec("count"),) * 5)
    with pytest.raises(InvalidSpec):
        Filter(id="", partitions=(p,))


def test_filter_selection_must_match_a_partition():
    with pytest.raises(NotFound):
        Filter(id="f", partitions=(unit_bins("x"),),
               selections={"y": RangeSelection(1.0, 2.0)})
    with pytest.raises(KindMismatch):
        Filter(id="f", partitions=(unit_bins("x"),),
               selections={"x": CategorySelection(frozenset({"a"}))})


# ---------------------------------------------------------------------------
# mutations and revisions

def test_add_filter_bumps_revision_once():
    view = DataView(three_row_backend())
    seen = []
    view.mutation_listener = seen.append
    view.add_filter(filter_a())
    assert seen == [1]
    view.add_filter(filter_b())
    assert seen == [1, 2]
    view.close()


def test_add_duplicate_filter_conflicts():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        with pytest.raises(Conflict):
            view.add_filter(filter_a())


def test_remove_unknown_filter():
    with DataView(three_row_backend()) as view:
        with pytest.raises(NotFound):
            view.remove_filter("ghost")


def test_remove_only_filter_then_update_is_empty():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        drain(view)
        view.remove_filter("A")
        events = list(view.update_all(timeout=5))
        assert events == []


def test_set_selection_validation():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        with pytest.raises(NotFound):
            view.set_selection("ghost", RangeSelection(1.0, 2.0))
        with pytest.raises(NotFound):
            view.set_selection("A", RangeSelection(1.0, 2.0), facet="y")
        with pytest.raises(InvalidSelection):
            RangeSelection(2.0, 2.0)
        with pytest.raises(KindMismatch):
            view.set_selection("A", CategorySelection(frozenset({"a"})))


# ---------------------------------------------------------------------------
# crossfilter semantics

def test_three_row_self_exclusion_example():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        view.add_filter(filter_b())
        view.set_selection("B", RangeSelection(2.0, 4.0))
        results = drain(view)
        assert [r.count for r in results["A"].rows] == [0, 1, 1]
        assert [r.count for r in results["B"].rows] == [1, 1, 1]

        view.clear_selection("B")
        results = drain(view)
        assert [r.count for r in results["A"].rows] == [1, 1, 1]
        assert [r.count for r in results["B"].rows] == [1, 1, 1]


def test_include_self_applies_own_selection():
    view = DataView(three_row_backend(), include_self=True)
    view.add_filter(filter_a())
    view.set_selection("A", RangeSelection(2.0, 4.0))
    results = drain(view)
    assert [r.count for r in results["A"].rows] == [0, 1, 1]
    view.close()


def test_single_chart_ignores_its_own_selection():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        view.set_selection("A", RangeSelection(2.0, 4.0))
        results = drain(view)
        assert [r.count for r in results["A"].rows] == [1, 1, 1]


def test_set_then_clear_matches_never_selected():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        view.add_filter(filter_b())
        virgin = {fid: e.rows for fid, e in drain(view).items()}
        view.set_selection("B", RangeSelection(2.0, 3.0))
        drain(view)
        view.set_selection("B", None)
        after = {fid: e.rows for fid, e in drain(view).items()}
        assert after == virgin


def test_empty_selection_zeroes_other_filters():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        view.add_filter(filter_b())
        view.set_selection("B", RangeSelection(3.5, 3.75))  # selects nothing
        results = drain(view)
        assert [r.count for r in results["A"].rows] == [0, 0, 0]
        assert [r.count for r in results["B"].rows] == [1, 1, 1]


def test_selections_conjoin_across_filters():
    ds = build_dataset(random_rows(random.Random(9), 300), KINDS)
    with DataView(InMemoryBackend(ds)) as view:
        px = PartitionSpec("x", ContinuousBins(-100.0, 100.0, 4))
        py = PartitionSpec("y", ContinuousBins(0.0, 50.0, 4))
        pc = PartitionSpec("c", CategoryList(None))
        view.add_filter(Filter(id="X", partitions=(px,)))
        view.add_filter(Filter(id="Y", partitions=(py,)))
        view.add_filter(Filter(id="C", partitions=(pc,)))
        view.set_selection("Y", RangeSelection(10.0, 30.0))
        view.set_selection("C", CategorySelection(frozenset({"alpha", "beta"})))
        results = drain(view)
        # X runs under both foreign selections
        want = InMemoryBackend(ds).aggregate(
            [px],
            predicate=[
                (py, RangeSelection(10.0, 30.0)),
                (pc, CategorySelection(frozenset({"alpha", "beta"}))),
            ],
        )
        assert results["X"].rows == tuple(want)


# ---------------------------------------------------------------------------
# event stream mechanics

def test_update_all_exactly_one_event_per_filter():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        view.add_filter(filter_b())
        events = list(view.update_all(timeout=10))
        assert sorted(e.filter_id for e in events) == ["A", "B"]
        assert {e.revision for e in events} == {2}
        assert sorted(e.seq for e in events) == [0, 1]


def test_update_all_no_filters_returns_immediately():
    with DataView(three_row_backend()) as view:
        assert list(view.update_all(timeout=1)) == []


def test_update_all_replays_current_revision_to_late_consumers():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        first = list(view.update_all(timeout=10))
        second = list(view.update_all(timeout=10))  # cached, no recompute
        assert [e.rows for e in first] == [e.rows for e in second]
        assert [e.revision for e in first] == [e.revision for e in second]


def test_results_exposes_latest_event_per_filter():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        drain(view)
        res = view.results()
        assert [r.count for r in res["A"].rows] == [1, 1, 1]
        assert isinstance(res["A"].rows, tuple)  # immutable event payload


def test_subscriber_receives_events_and_unsubscribes():
    with DataView(three_row_backend()) as view:
        seen = []
        unsubscribe = view.subscribe(seen.append)
        view.add_filter(filter_a())
        drain(view)
        assert any(e.filter_id == "A" and e.revision == 1 for e in seen)
        count = len(seen)
        unsubscribe()
        view.set_selection("A", RangeSelection(1.0, 2.0))
        drain(view)
        assert len(seen) == count


def test_mutation_listener_runs_before_that_revisions_events():
    with DataView(three_row_backend()) as view:
        order = []
        lock = threading.Lock()
        view.mutation_listener = lambda rev: order.append(("ack", rev))

        def on_event(e: UpdateEvent):
            with lock:
                order.append(("event", e.revision))

        view.subscribe(on_event)
        view.add_filter(filter_a())
        view.add_filter(filter_b())
        view.set_selection("A", RangeSelection(1.0, 2.0))
        drain(view)
        for rev in (1, 2, 3):
            ack = order.index(("ack", rev))
            events = [i for i, item in enumerate(order) if item == ("event", rev)]
            assert all(ack < i for i in events), order


def test_no_stale_revision_after_newer_event_per_filter():
    ds = build_dataset(random_rows(random.Random(1), 400), KINDS)
    with DataView(InMemoryBackend(ds)) as view:
        px = PartitionSpec("x", ContinuousBins(-100.0, 100.0, 8))
        py = PartitionSpec("y", ContinuousBins(0.0, 50.0, 8))
        view.add_filter(Filter(id="X", partitions=(px,)))
        view.add_filter(Filter(id="Y", partitions=(py,)))
        seen = {}
        bad = []

        def on_event(e):
            if seen.get(e.filter_id, -1) > e.revision:
                bad.append(e)
            seen[e.filter_id] = e.revision

        view.subscribe(on_event)
        for i in range(15):
            lo = float(i)
            view.set_selection("X", RangeSelection(lo, lo + 5.0))
        drain(view)
        assert not bad


def test_events_seq_orders_within_revision():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        view.add_filter(filter_b())
        events = list(view.update_all(timeout=10))
        seqs = [e.seq for e in events]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)


# ---------------------------------------------------------------------------
# failures and timeouts

def test_backend_failure_becomes_error_event():
    backend = WrappedBackend(three_row_backend(), fail_facet="x")
    with DataView(backend) as view:
        view.add_filter(filter_a())  # partitions x: will fail
        view.add_filter(filter_b())
        results = drain(view)
        assert results["A"].error is not None
        assert "injected failure" in results["A"].error
        assert results["A"].rows is None
        assert results["B"].error is None
        assert [r.count for r in results["B"].rows] == [1, 1, 1]
        assert not results["A"].ok and results["B"].ok


def test_update_all_timeout():
    release = threading.Event()
    backend = WrappedBackend(three_row_backend(), delay_facet="x", release=release)
    view = DataView(backend)
    view.add_filter(filter_a())
    with pytest.raises(TimeoutError):
        list(view.update_all(timeout=0.2))
    release.set()
    view.close()


def test_delayed_filter_does_not_block_others():
    release = threading.Event()
    backend = WrappedBackend(three_row_backend(), delay_facet="x", release=release)
    view = DataView(backend)
    got_b = threading.Event()
    view.subscribe(lambda e: got_b.set() if e.filter_id == "B" else None)
    view.add_filter(filter_a())  # will hang until released
    view.add_filter(filter_b())
    assert got_b.wait(timeout=5), "fast filter should deliver while slow one runs"
    assert "x" not in backend.finished  # the delayed call has not completed
    release.set()
    drain(view)
    view.close()


# ---------------------------------------------------------------------------
# lifecycle

def test_close_then_use_raises():
    view = DataView(three_row_backend())
    view.add_filter(filter_a())
    view.close()
    view.close()  # idempotent
    with pytest.raises(SessionStateError):
        view.add_filter(filter_b())
    with pytest.raises(SessionStateError):
        list(view.update_all(timeout=1))


def test_context_manager_closes():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
    with pytest.raises(SessionStateError):
        view.set_selection("A", RangeSelection(1.0, 2.0))


def test_state_snapshot_consistent():
    with DataView(three_row_backend()) as view:
        view.add_filter(filter_a())
        drain(view)
        revision, filters, last = view.state_snapshot()
        assert revision == 1
        assert [f.id for f in filters] == ["A"]
        assert last["A"].revision == 1


# ---------------------------------------------------------------------------
# concurrency stress

def test_concurrent_mutations_settle():
    ds = build_dataset(random_rows(random.Random(4), 500), KINDS)
    with DataView(InMemoryBackend(ds), max_workers=4) as view:
        px = PartitionSpec("x", ContinuousBins(-100.0, 100.0, 10))
        py = PartitionSpec("y", ContinuousBins(0.0, 50.0, 10))
        pc = PartitionSpec("c", CategoryList(None))
        view.add_filter(Filter(id="X", partitions=(px,)))
        view.add_filter(Filter(id="Y", partitions=(py,)))
        view.add_filter(Filter(id="C", partitions=(pc,)))

        def hammer(seed):
            rng = random.Random(seed)
            for _ in range(20):
                lo = rng.uniform(0.0, 40.0)
                view.set_selection("Y", RangeSelection(lo, lo + 5.0))

        threads = [threading.Thread(target=hammer, args=(s,)) for s in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        results = drain(view, timeout=30)
        assert set(results) == {"X", "Y", "C"}
        final_revision, _, last = view.state_snapshot()
        assert {e.revision for e in last.values()} == {final_revision}
        # settled state equals a fresh computation under the final selections
        y_sel = view.filter("Y").selections["y"]
        want = InMemoryBackend(ds).aggregate([px], predicate=[(py, y_sel)])
        assert list(results["X"].rows) == want
