"""Shareable session documents: one UTF-8 JSON file holding a whole analysis.

A session contains dataset descriptors (never raw rows), chart definitions
with their selections and layout geometry, and the last aggregated results
per chart.  That makes the file self-describing: a recipient without the
data still sees every chart (frozen replay), and one with the data gets a
live, recomputing view.

Serialization is canonical: object keys sorted, no spaces, floats rendered
shortest-round-trip, UTF-8, newline-terminated.  Saving the same state twice
yields byte-identical files.  The field names used here are frozen in
data/session.schema.json; the server's wire messages reuse the same shapes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Optional, Sequence, Union

from .dataview import Backend, DataView, Filter
from .engine import (
    AggregateSpec,
    BinKey,
    CategoryList,
    CategorySelection,
    ContinuousBins,
    GroupRow,
    PartitionSpec,
    RangeSelection,
    Selection,
    TimeInterval,
)
from .errors import (
    EncodingError,
    InvalidSelection,
    InvalidSpec,
    ParseError,
    UnsupportedVersion,
    ValidationError,
)
from .ingest import parse_timestamp
from .model import DatasetInfo, Facet, fmt_timestamp, from_epoch_ms, to_epoch_ms

FORMAT_VERSION = 1
SESSION_EXTENSION = ".spot.json"


# -- canonical JSON ---------------------------------------------------------


def canonical_json_bytes(obj) -> bytes:
    try:
        text = json.dumps(
            obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
        )
    except ValueError as exc:
        raise EncodingError(f"session contains a non-finite number: {exc}") from exc
    return (text + "\n").encode("utf-8")


# -- wire codecs (shared with the server) -----------------------------------


def facet_to_json(facet: Facet) -> dict:
    return {
        "name": facet.name,
        "kind": facet.kind,
        "description": facet.description,
        "units": facet.units,
        "integerValued": facet.integer_valued,
    }


def facet_from_json(obj, path: str) -> Facet:
    name = _req(obj, "name", str, path)
    kind = _req(obj, "kind", str, path)
    try:
        return Facet(
            name=name,
            kind=kind,
            description=_opt(obj, "description", str, path, ""),
            units=_opt(obj, "units", str, path, None),
            integer_valued=_opt(obj, "integerValued", bool, path, False),
        )
    except InvalidSpec as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def dataset_info_to_json(info: DatasetInfo) -> dict:
    return {
        "id": info.id,
        "name": info.name,
        "description": info.description,
        "facets": [facet_to_json(f) for f in info.facets],
    }


def dataset_info_from_json(obj, path: str) -> DatasetInfo:
    facets = _req(obj, "facets", list, path)
    return DatasetInfo(
        id=_req(obj, "id", str, path),
        name=_req(obj, "name", str, path),
        description=_opt(obj, "description", str, path, ""),
        facets=tuple(
            facet_from_json(_as(f, dict, f"{path}.facets[{i}]"), f"{path}.facets[{i}]")
            for i, f in enumerate(facets)
        ),
    )


def partition_to_json(spec: PartitionSpec) -> dict:
    g = spec.grouping
    if isinstance(g, ContinuousBins):
        grouping = {"type": "bins", "lo": g.lo, "hi": g.hi, "binCount": g.bin_count}
    elif isinstance(g, CategoryList):
        grouping = {
            "type": "categories",
            "categories": None if g.categories is None else list(g.categories),
        }
    else:
        grouping = {"type": "interval", "interval": g.interval}
    return {"facet": spec.facet, "grouping": grouping}


def partition_from_json(obj, path: str) -> PartitionSpec:
    facet = _req(obj, "facet", str, path)
    gobj = _req(obj, "grouping", dict, path)
    gtype = _req(gobj, "type", str, f"{path}.grouping")
    try:
        if gtype == "bins":
            grouping = ContinuousBins(
                lo=_num(gobj, "lo", f"{path}.grouping"),
                hi=_num(gobj, "hi", f"{path}.grouping"),
                bin_count=_req(gobj, "binCount", int, f"{path}.grouping"),
            )
        elif gtype == "categories":
            cats = gobj.get("categories")
            if cats is not None:
                cats = tuple(
                    _as(c, str, f"{path}.grouping.categories[{i}]") for i, c in enumerate(_as(cats, list, f"{path}.grouping.categories"))
                )
            grouping = CategoryList(cats)
        elif gtype == "interval":
            grouping = TimeInterval(_req(gobj, "interval", str, f"{path}.grouping"))
        else:
            raise ParseError(f"unknown grouping type {gtype!r}", f"{path}.grouping.type")
    except InvalidSpec as exc:
        raise ValidationError(f"{path}.grouping: {exc}") from exc
    return PartitionSpec(facet=facet, grouping=grouping)


def aggregate_to_json(spec: AggregateSpec) -> dict:
    out: dict = {"op": spec.op}
    if spec.facet is not None:
        out["facet"] = spec.facet
    return out


def aggregate_from_json(obj, path: str) -> AggregateSpec:
    op = _req(obj, "op", str, path)
    facet = _opt(obj, "facet", str, path, None)
    try:
        return AggregateSpec(op=op, facet=facet)
    except InvalidSpec as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def selection_to_json(sel: Selection) -> dict:
    if isinstance(sel, RangeSelection):
        return {"type": "range", "lo": _endpoint_to_json(sel.lo), "hi": _endpoint_to_json(sel.hi)}
    return {"type": "categories", "labels": sorted(sel.labels)}


def _endpoint_to_json(v: Union[float, datetime]) -> Union[float, str]:
    if isinstance(v, datetime):
        return fmt_timestamp(to_epoch_ms(v))
    return float(v)


def _endpoint_from_json(v, path: str) -> Union[float, datetime]:
    if isinstance(v, bool):
        raise ParseError("range endpoint must be a number or ISO timestamp", path)
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        ms = parse_timestamp(v)
        if ms is None:
            raise ParseError(f"not an ISO timestamp: {v!r}", path)
        return from_epoch_ms(ms)
    raise ParseError("range endpoint must be a number or ISO timestamp", path)


def selection_from_json(obj, path: str) -> Selection:
    stype = _req(obj, "type", str, path)
    try:
        if stype == "range":
            return RangeSelection(
                lo=_endpoint_from_json(_req_any(obj, "lo", path), f"{path}.lo"),
                hi=_endpoint_from_json(_req_any(obj, "hi", path), f"{path}.hi"),
            )
        if stype == "categories":
            labels = _req(obj, "labels", list, path)
            return CategorySelection(
                frozenset(_as(l, str, f"{path}.labels[{i}]") for i, l in enumerate(labels))
            )
    except InvalidSelection as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    raise ParseError(f"unknown selection type {stype!r}", f"{path}.type")


def group_key_to_json(key):
    if isinstance(key, BinKey):
        return {"index": key.index, "label": key.label}
    if isinstance(key, datetime):
        return fmt_timestamp(to_epoch_ms(key))
    return key


def group_key_from_json(obj, path: str, kind: Optional[str] = None):
    """Decode one group key.  ``kind`` is the partition's kind when the
    caller knows it; without it, strings that parse as ISO timestamps are
    taken for datetimes (a bare label can be ambiguous otherwise)."""
    if isinstance(obj, dict):
        if kind not in (None, "continuous"):
            raise ParseError(f"a {kind} partition key must be a string", path)
        return BinKey(_req(obj, "index", int, path), _req(obj, "label", str, path))
    if isinstance(obj, str):
        if kind == "categorical":
            return obj
        ms = parse_timestamp(obj)
        if ms is not None:
            return from_epoch_ms(ms)
        if kind == "datetime":
            raise ParseError(f"not an ISO timestamp: {obj!r}", path)
        return obj
    raise ParseError("group key must be a bin object or string", path)


def group_row_to_json(row: GroupRow) -> dict:
    return {
        "keys": [group_key_to_json(k) for k in row.keys],
        "count": row.count,
        "values": list(row.values),
    }


def group_row_from_json(
    obj, path: str, partitions: Optional[Sequence[PartitionSpec]] = None
) -> GroupRow:
    keys = _req(obj, "keys", list, path)
    count = _req(obj, "count", int, path)
    values = _req(obj, "values", list, path)
    vals = []
    for i, v in enumerate(values):
        if v is None:
            vals.append(None)
        elif isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError("aggregate value must be a number or null", f"{path}.values[{i}]")
        else:
            vals.append(float(v))
    kinds = [p.kind for p in partitions] if partitions is not None else []
    return GroupRow(
        keys=tuple(
            group_key_from_json(k, f"{path}.keys[{i}]", kinds[i] if i < len(kinds) else None)
            for i, k in enumerate(keys)
        ),
        count=count,
        values=tuple(vals),
    )


# -- validation helpers ------------------------------------------------------


def _as(value, typ, path: str):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, typ) or (typ is not bool and isinstance(value, bool)):
        raise ParseError(f"expected {typ.__name__}, got {type(value).__name__}", path)
    return value


def _req(obj: dict, key: str, typ, path: str):
    if not isinstance(obj, dict):
        raise ParseError(f"expected object, got {type(obj).__name__}", path)
    if key not in obj:
        raise ParseError(f"missing required key {key!r}", path)
    return _as(obj[key], typ, f"{path}.{key}")


def _req_any(obj: dict, key: str, path: str):
    if key not in obj:
        raise ParseError(f"missing required key {key!r}", path)
    return obj[key]


def _opt(obj: dict, key: str, typ, path: str, default):
    if key not in obj or obj[key] is None:
        return default
    return _as(obj[key], typ, f"{path}.{key}")


def _num(obj: dict, key: str, path: str) -> float:
    v = _req_any(obj, key, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected number, got {type(v).__name__}", f"{path}.{key}")
    return float(v)


# -- session model -----------------------------------------------------------


@dataclass(frozen=True)
class ChartState:
    id: str
    dataset_id: str
    chart_kind: str
    partitions: tuple[PartitionSpec, ...]
    aggregates: tuple[AggregateSpec, ...] = ()
    selections: Mapping[str, Selection] = field(default_factory=dict)
    layout: Mapping = field(default_factory=dict)

    def to_filter(self) -> Filter:
        return Filter(
            id=self.id,
            partitions=self.partitions,
            aggregates=self.aggregates,
            selections=dict(self.selections),
            chart_kind=self.chart_kind,
        )


@dataclass(frozen=True)
class CachedResult:
    revision: int
    rows: tuple[GroupRow, ...]


@dataclass(frozen=True)
class Session:
    format_version: int
    datasets: tuple[DatasetInfo, ...]
    charts: tuple[ChartState, ...]
    revision: int
    stale: bool
    results: Mapping[str, CachedResult] = field(default_factory=dict)


class FrozenView:
    """Read-only replay of a session's cached results.

    Has no backend reference at all, so rendering from it can never trigger
    recomputation; this is what makes a shared link viewable without data.
    """

    def __init__(self, session: Session, mismatch: Optional[str] = None):
        self.session = session
        self.mismatch = mismatch

    @property
    def charts(self) -> tuple[ChartState, ...]:
        return self.session.charts

    @property
    def revision(self) -> int:
        return self.session.revision

    @property
    def stale(self) -> bool:
        return self.session.stale

    def results(self) -> dict[str, tuple[GroupRow, ...]]:
        return {fid: cached.rows for fid, cached in self.session.results.items()}


# -- save --------------------------------------------------------------------


def session_to_json(session: Session) -> dict:
    charts = []
    for chart in session.charts:
        charts.append(
            {
                "id": chart.id,
                "datasetId": chart.dataset_id,
                "chartKind": chart.chart_kind,
                "partitions": [partition_to_json(p) for p in chart.partitions],
                "aggregates": [aggregate_to_json(a) for a in chart.aggregates],
                "selections": {
                    facet: selection_to_json(sel) for facet, sel in chart.selections.items()
                },
                "layout": dict(chart.layout),
            }
        )
    results = {
        fid: {
            "revision": cached.revision,
            "rows": [group_row_to_json(r) for r in cached.rows],
        }
        for fid, cached in session.results.items()
    }
    return {
        "formatVersion": session.format_version,
        "datasets": [dataset_info_to_json(d) for d in session.datasets],
        "charts": charts,
        "cachedResults": {
            "revision": session.revision,
            "stale": session.stale,
            "results": results,
        },
    }


def serialize_session(session: Session) -> bytes:
    return canonical_json_bytes(session_to_json(session))


def save_session(view: DataView, layout: Optional[Mapping[str, Mapping]] = None) -> bytes:
    """Serialize a live view.  If an update is still in flight, the document
    is still written but flagged stale inside cachedResults."""
    layout = layout or {}
    revision, filters, last = view.state_snapshot()
    info = view.backend.info
    charts = []
    results = {}
    stale = False
    for filt in filters:
        charts.append(
            ChartState(
                id=filt.id,
                dataset_id=info.id,
                chart_kind=filt.chart_kind,
                partitions=filt.partitions,
                aggregates=filt.aggregates,
                selections=dict(filt.selections),
                layout=dict(layout.get(filt.id, {})),
            )
        )
        event = last.get(filt.id)
        if event is None or event.error is not None:
            stale = True
            continue
        if event.revision != revision:
            stale = True
        results[filt.id] = CachedResult(revision=event.revision, rows=tuple(event.rows))
    session = Session(
        format_version=FORMAT_VERSION,
        datasets=(info,),
        charts=tuple(charts),
        revision=revision,
        stale=stale,
        results=results,
    )
    return serialize_session(session)


# -- load --------------------------------------------------------------------


def load_session(data: bytes) -> Session:
    """Parse and validate a session document.

    Structural problems raise ParseError with a JSON path; semantic problems
    (dangling references, out-of-range selections) raise ValidationError
    naming the offending chart; newer formatVersions raise
    UnsupportedVersion.  Nothing is partially applied on failure.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}", "$") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"$ (line {exc.lineno})") from exc
    if not isinstance(doc, dict):
        raise ParseError("session document must be a JSON object", "$")

    version = _req(doc, "formatVersion", int, "$")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(
            f"session formatVersion {version} not supported (reader supports {FORMAT_VERSION})"
        )

    datasets = tuple(
        dataset_info_from_json(_as(d, dict, f"$.datasets[{i}]"), f"$.datasets[{i}]")
        for i, d in enumerate(_req(doc, "datasets", list, "$"))
    )
    by_id = {d.id: d for d in datasets}
    if len(by_id) != len(datasets):
        raise ValidationError("duplicate dataset ids in session")

    charts = []
    chart_ids = set()
    for i, cobj in enumerate(_req(doc, "charts", list, "$")):
        path = f"$.charts[{i}]"
        cobj = _as(cobj, dict, path)
        chart_id = _req(cobj, "id", str, path)
        if chart_id in chart_ids:
            raise ValidationError(f"duplicate chart id {chart_id!r}")
        chart_ids.add(chart_id)
        dataset_id = _req(cobj, "datasetId", str, path)
        if dataset_id not in by_id:
            raise ValidationError(f"chart {chart_id!r} references unknown dataset {dataset_id!r}")
        info = by_id[dataset_id]
        partitions = tuple(
            partition_from_json(_as(p, dict, f"{path}.partitions[{j}]"), f"{path}.partitions[{j}]")
            for j, p in enumerate(_req(cobj, "partitions", list, path))
        )
        aggregates = tuple(
            aggregate_from_json(_as(a, dict, f"{path}.aggregates[{j}]"), f"{path}.aggregates[{j}]")
            for j, a in enumerate(_opt(cobj, "aggregates", list, path, []))
        )
        selections = {}
        for facet, sobj in _opt(cobj, "selections", dict, path, {}).items():
            selections[facet] = selection_from_json(
                _as(sobj, dict, f"{path}.selections.{facet}"), f"{path}.selections.{facet}"
            )
        chart = ChartState(
            id=chart_id,
            dataset_id=dataset_id,
            chart_kind=_opt(cobj, "chartKind", str, path, ""),
            partitions=partitions,
            aggregates=aggregates,
            selections=selections,
            layout=_opt(cobj, "layout", dict, path, {}),
        )
        _validate_chart(chart, info)
        charts.append(chart)

    cr = _req(doc, "cachedResults", dict, "$")
    revision = _req(cr, "revision", int, "$.cachedResults")
    stale = _req(cr, "stale", bool, "$.cachedResults")
    results = {}
    charts_by_id = {c.id: c for c in charts}
    for fid, robj in _req(cr, "results", dict, "$.cachedResults").items():
        path = f"$.cachedResults.results.{fid}"
        if fid not in charts_by_id:
            raise ValidationError(f"cached results for unknown chart {fid!r}")
        robj = _as(robj, dict, path)
        cached_rev = _req(robj, "revision", int, path)
        if cached_rev > revision:
            raise ValidationError(
                f"chart {fid!r} cached revision {cached_rev} exceeds session revision {revision}"
            )
        chart = charts_by_id[fid]
        rows = tuple(
            group_row_from_json(
                _as(r, dict, f"{path}.rows[{j}]"), f"{path}.rows[{j}]", chart.partitions
            )
            for j, r in enumerate(_req(robj, "rows", list, path))
        )
        for j, row in enumerate(rows):
            if len(row.keys) != len(chart.partitions) or len(row.values) != len(chart.aggregates):
                raise ValidationError(
                    f"chart {fid!r} cached row {j} arity does not match its partitions/aggregates"
                )
        results[fid] = CachedResult(revision=cached_rev, rows=rows)

    return Session(
        format_version=version,
        datasets=datasets,
        charts=tuple(charts),
        revision=revision,
        stale=stale,
        results=results,
    )


def _validate_chart(chart: ChartState, info: DatasetInfo) -> None:
    if not 1 <= len(chart.partitions) <= 3:
        raise ValidationError(f"chart {chart.id!r} needs 1..3 partitions")
    if len(chart.aggregates) > 4:
        raise ValidationError(f"chart {chart.id!r} takes at most 4 aggregates")
    specs = {}
    for p in chart.partitions:
        facet = _facet_or_invalid(info, p.facet, chart.id)
        if facet.kind != p.kind:
            raise ValidationError(
                f"chart {chart.id!r} partitions {p.facet!r} as {p.kind}, dataset says {facet.kind}"
            )
        specs[p.facet] = p
    for a in chart.aggregates:
        if a.op == "count":
            continue
        facet = _facet_or_invalid(info, a.facet, chart.id)
        if facet.kind != "continuous":
            raise ValidationError(
                f"chart {chart.id!r} aggregates {a.op} over non-continuous facet {a.facet!r}"
            )
    for facet_name, sel in chart.selections.items():
        if facet_name not in specs:
            raise ValidationError(
                f"chart {chart.id!r} selection on {facet_name!r} has no matching partition"
            )
        _validate_selection_range(chart.id, specs[facet_name], sel)


def _facet_or_invalid(info: DatasetInfo, name: str, chart_id: str) -> Facet:
    for f in info.facets:
        if f.name == name:
            return f
    raise ValidationError(f"chart {chart_id!r} references unknown facet {name!r}")


def _validate_selection_range(chart_id: str, spec: PartitionSpec, sel: Selection) -> None:
    g = spec.grouping
    if isinstance(g, ContinuousBins):
        if not isinstance(sel, RangeSelection) or isinstance(sel.lo, datetime):
            raise ValidationError(
                f"chart {chart_id!r} selection on {spec.facet!r} must be a numeric range"
            )
        if sel.hi <= g.lo or sel.lo >= g.hi:
            raise ValidationError(
                f"chart {chart_id!r} selection [{sel.lo},{sel.hi}) lies outside "
                f"partition range [{g.lo},{g.hi}]"
            )
    elif isinstance(g, CategoryList):
        if not isinstance(sel, CategorySelection):
            raise ValidationError(
                f"chart {chart_id!r} selection on {spec.facet!r} must be a category selection"
            )
        if g.categories is not None and not sel.labels <= set(g.categories):
            extra = sorted(sel.labels - set(g.categories))
            raise ValidationError(
                f"chart {chart_id!r} selects labels outside its category list: {extra}"
            )
    else:
        if not isinstance(sel, RangeSelection) or not isinstance(sel.lo, datetime):
            raise ValidationError(
                f"chart {chart_id!r} selection on {spec.facet!r} must be a datetime range"
            )


# -- restore -----------------------------------------------------------------


def _compatible(live: DatasetInfo, saved: DatasetInfo) -> Optional[str]:
    """None if the live dataset can serve the saved charts, else a reason.
    The live dataset may have extra facets (superset rule)."""
    live_by_name = {f.name: f for f in live.facets}
    for f in saved.facets:
        actual = live_by_name.get(f.name)
        if actual is None:
            return f"live dataset {live.id!r} lacks facet {f.name!r}"
        if actual.kind != f.kind:
            return (
                f"facet {f.name!r} is {actual.kind} in the live dataset, "
                f"session expects {f.kind}"
            )
    return None


def restore(
    session: Session,
    available: Mapping[str, Backend],
    *,
    include_self: bool = False,
    executor=None,
    update_timeout: Optional[float] = 60.0,
) -> Union[DataView, FrozenView]:
    """Bring a session back to life if its dataset is available, else replay.

    The live path rebuilds a DataView, re-adds every chart's filter and runs
    one full update before returning.  Any mismatch (dataset absent, facet
    missing, kind changed) falls back to a FrozenView carrying the reason.
    """
    dataset_ids = {c.dataset_id for c in session.charts} or {d.id for d in session.datasets}
    if len(dataset_ids) != 1:
        return FrozenView(session, mismatch="session spans multiple datasets" if dataset_ids else None)
    (dataset_id,) = dataset_ids
    backend = available.get(dataset_id)
    if backend is None:
        return FrozenView(session, mismatch=None)
    saved = next((d for d in session.datasets if d.id == dataset_id), None)
    if saved is not None:
        reason = _compatible(backend.info, saved)
        if reason is not None:
            return FrozenView(session, mismatch=reason)
    view = DataView(backend, include_self=include_self, executor=executor)
    try:
        for chart in session.charts:
            view.add_filter(chart.to_filter())
        for _ in view.update_all(timeout=update_timeout):
            pass
    except Exception:
        view.close()
        raise
    return view
