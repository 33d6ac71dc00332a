"""HTTP/WebSocket service: dataset metadata, uploads, live views, sessions.

Transport model: plain request/response for metadata, uploads, and session
hosting; one WebSocket per view for deltas and pushed updates.  Wire message
bodies reuse the session module's JSON shapes, so a chart definition looks
the same in a socket frame and in a .spot.json file.

Every mutation gets an immediate ack carrying the new revision, before any
result of that revision is pushed; per-filter event delivery is
revision-monotone (stale events are dropped by the dataview gate, a client
may never see some events of a superseded revision).  View ids are random
128-bit capability tokens: knowing one is the only way to touch that view,
which is what isolates concurrent clients from each other's selections.

File-sourced datasets are ingested at startup and served by the in-memory
backend; table-sourced datasets ride the SQL bridge using the connection URL
from SPOT_DATABASE_URL.  A source that fails at startup leaves its entry
listed as degraded: visible in /api/datasets, but refusing view creation.
"""

import asyncio
import json
import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .dataview import DataView, Filter, UpdateEvent
from .engine import InMemoryBackend
from .errors import (
    InvalidSpec,
    NotFound,
    ParseError,
    SpotError,
    UnsupportedVersion,
    ValidationError,
)
from .ingest import load_file, parse_csv, parse_json_records, load_dataset
from .model import DatasetInfo, Facet, FacetStats, fmt_timestamp, to_epoch_ms
from .session import (
    aggregate_from_json,
    facet_to_json,
    group_row_to_json,
    load_session,
    partition_from_json,
    selection_from_json,
    _as,
    _opt,
    _req,
)

DEFAULT_LISTEN = "127.0.0.1:8080"
DEFAULT_UPLOAD_LIMIT = 256 * 1024 * 1024
DEFAULT_POOL_SIZE = 8
DEFAULT_WORKERS = 8


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class DatasetEntry:
    id: str
    name: str
    description: str = ""
    file: Optional[str] = None
    table: Optional[str] = None
    columns: dict = field(default_factory=dict)
    facets: tuple[Facet, ...] = ()


@dataclass(frozen=True)
class ServerConfig:
    listen: str = DEFAULT_LISTEN
    pool_size: int = DEFAULT_POOL_SIZE
    workers: int = DEFAULT_WORKERS
    upload_limit: int = DEFAULT_UPLOAD_LIMIT
    datasets: tuple[DatasetEntry, ...] = ()


def load_config(path) -> ServerConfig:
    """Parse and validate a config file, reporting every offending entry."""
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"config is not valid JSON: {exc}", "$") from exc
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object", "$")

    problems: list[str] = []
    entries: list[DatasetEntry] = []
    seen: set[str] = set()
    for i, eobj in enumerate(doc.get("datasets", [])):
        where = f"datasets[{i}]"
        if not isinstance(eobj, dict):
            problems.append(f"{where}: entry must be an object")
            continue
        entry_id = eobj.get("id")
        if not isinstance(entry_id, str) or not entry_id:
            problems.append(f"{where}: missing id")
            continue
        if entry_id in seen:
            problems.append(f"{where}: duplicate dataset id {entry_id!r}")
            continue
        seen.add(entry_id)
        has_file = isinstance(eobj.get("file"), str)
        has_table = isinstance(eobj.get("table"), str)
        if has_file == has_table:
            problems.append(f"{where} ({entry_id!r}): exactly one of file/table required")
            continue
        facets: list[Facet] = []
        for j, fobj in enumerate(eobj.get("facets", [])):
            try:
                facets.append(
                    Facet(
                        name=fobj["name"],
                        kind=fobj["kind"],
                        description=fobj.get("description", ""),
                        units=fobj.get("units"),
                    )
                )
            except (KeyError, TypeError, InvalidSpec) as exc:
                problems.append(f"{where}.facets[{j}]: {exc}")
        if has_table and not facets:
            problems.append(f"{where} ({entry_id!r}): table sources must declare facets")
            continue
        entries.append(
            DatasetEntry(
                id=entry_id,
                name=eobj.get("name", entry_id),
                description=eobj.get("description", ""),
                file=eobj.get("file") if has_file else None,
                table=eobj.get("table") if has_table else None,
                columns=dict(eobj.get("columns", {})),
                facets=tuple(facets),
            )
        )
    if problems:
        raise InvalidSpec("config rejected: " + "; ".join(problems))
    return ServerConfig(
        listen=doc.get("listen", DEFAULT_LISTEN),
        pool_size=int(doc.get("poolSize", DEFAULT_POOL_SIZE)),
        workers=int(doc.get("workers", DEFAULT_WORKERS)),
        upload_limit=int(doc.get("uploadLimitBytes", DEFAULT_UPLOAD_LIMIT)),
        datasets=tuple(entries),
    )


# -- runtime state -----------------------------------------------------------


@dataclass
class _Source:
    entry: DatasetEntry
    backend: Optional[object] = None  # Backend protocol
    status: str = "ok"  # ok | degraded
    reason: str = ""


class ServerState:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.executor = ThreadPoolExecutor(
            max_workers=max(config.workers, 2), thread_name_prefix="spot-server"
        )
        self.sources: dict[str, _Source] = {}
        self.views: dict[str, DataView] = {}
        self.view_dataset: dict[str, str] = {}
        self.sessions: dict[str, bytes] = {}
        self.pools: list = []

    def load_sources(self, database_url: Optional[str]) -> None:
        shared_pool = None
        for entry in self.config.datasets:
            source = _Source(entry=entry)
            try:
                if entry.file is not None:
                    dataset = load_file(
                        entry.file, id=entry.id, name=entry.name, description=entry.description
                    )
                    source.backend = InMemoryBackend(dataset)
                else:
                    if not database_url:
                        raise NotFound(
                            f"dataset {entry.id!r} needs SPOT_DATABASE_URL for table "
                            f"{entry.table!r}"
                        )
                    from .sqlbackend import ConnectionPool, SqlTableBackend, TableBinding

                    if shared_pool is None:
                        shared_pool = ConnectionPool(database_url, self.config.pool_size)
                        self.pools.append(shared_pool)
                    info = DatasetInfo(
                        id=entry.id,
                        name=entry.name,
                        description=entry.description,
                        facets=entry.facets,
                    )
                    source.backend = SqlTableBackend(
                        TableBinding(info=info, table=entry.table, columns=entry.columns),
                        shared_pool,
                    )
            except Exception as exc:
                source.status = "degraded"
                source.reason = str(exc)
            self.sources[entry.id] = source

    def add_memory_dataset(self, dataset) -> _Source:
        source = _Source(
            entry=DatasetEntry(id=dataset.id, name=dataset.name, description=dataset.description),
            backend=InMemoryBackend(dataset),
        )
        self.sources[dataset.id] = source
        return source

    def shutdown(self) -> None:
        for view in list(self.views.values()):
            view.close(wait=False)
        self.executor.shutdown(wait=True)  # drain in-flight updates
        for pool in self.pools:
            pool.close()


# -- JSON helpers ------------------------------------------------------------


def _stats_json(stats: FacetStats, kind: str) -> dict:
    def endpoint(v):
        if v is None:
            return None
        if kind == "datetime":
            return fmt_timestamp(to_epoch_ms(v))
        if kind == "continuous":
            return float(v)
        return str(v)

    return {
        "min": endpoint(stats.min),
        "max": endpoint(stats.max),
        "distinctCount": stats.distinct_count,
        "missingCount": stats.missing_count,
        "sampleCategories": [[label, count] for label, count in stats.sample_categories],
    }


def _dataset_listing(state: ServerState) -> list[dict]:
    out = []
    for source in state.sources.values():
        item = {
            "id": source.entry.id,
            "name": source.entry.name,
            "description": source.entry.description,
            "status": source.status,
        }
        if source.status != "ok":
            item["reason"] = source.reason
        if source.backend is not None:
            item["facetCount"] = len(source.backend.info.facets)
        out.append(item)
    return out


def filter_from_json(obj) -> Filter:
    path = "$.filter"
    partitions = tuple(
        partition_from_json(_as(p, dict, f"{path}.partitions[{i}]"), f"{path}.partitions[{i}]")
        for i, p in enumerate(_req(obj, "partitions", list, path))
    )
    aggregates = tuple(
        aggregate_from_json(_as(a, dict, f"{path}.aggregates[{i}]"), f"{path}.aggregates[{i}]")
        for i, a in enumerate(_opt(obj, "aggregates", list, path, []))
    )
    selections = {
        facet: selection_from_json(
            _as(s, dict, f"{path}.selections.{facet}"), f"{path}.selections.{facet}"
        )
        for facet, s in _opt(obj, "selections", dict, path, {}).items()
    }
    return Filter(
        id=_req(obj, "id", str, path),
        partitions=partitions,
        aggregates=aggregates,
        selections=selections,
        chart_kind=_opt(obj, "chartKind", str, path, ""),
    )


def _update_json(event: UpdateEvent) -> dict:
    msg = {
        "type": "update",
        "filterId": event.filter_id,
        "revision": event.revision,
        "seq": event.seq,
    }
    if event.error is not None:
        msg["error"] = event.error
    else:
        msg["rows"] = [group_row_to_json(r) for r in event.rows]
    return msg


# -- application -------------------------------------------------------------


def create_app(config: ServerConfig, *, database_url: Optional[str] = None):
    import os
    from contextlib import asynccontextmanager

    from fastapi import FastAPI, HTTPException, Request, UploadFile, File, Form, WebSocket
    from fastapi.responses import Response
    from starlette.websockets import WebSocketDisconnect

    state = ServerState(config)
    state.load_sources(
        database_url if database_url is not None else os.environ.get("SPOT_DATABASE_URL")
    )

    @asynccontextmanager
    async def lifespan(app):
        yield
        state.shutdown()

    app = FastAPI(title="spot", lifespan=lifespan)
    app.state.spot = state

    def source_or_404(dataset_id: str) -> _Source:
        source = state.sources.get(dataset_id)
        if source is None:
            raise HTTPException(status_code=404, detail=f"no dataset {dataset_id!r}")
        return source

    @app.get("/api/datasets")
    def list_datasets():
        return _dataset_listing(state)

    @app.get("/api/datasets/{dataset_id}/facets")
    def dataset_facets(dataset_id: str):
        source = source_or_404(dataset_id)
        if source.backend is None:
            raise HTTPException(status_code=409, detail=f"dataset {dataset_id!r} is degraded")
        info = source.backend.info
        facets = []
        for facet in info.facets:
            entry = facet_to_json(facet)
            try:
                entry["stats"] = _stats_json(source.backend.stats(facet.name), facet.kind)
            except SpotError as exc:
                entry["stats"] = None
                entry["statsError"] = str(exc)
            facets.append(entry)
        return {"id": info.id, "name": info.name, "facets": facets}

    @app.post("/api/datasets", status_code=201)
    async def upload_dataset(
        file: UploadFile = File(...),
        name: str = Form(default=""),
        description: str = Form(default=""),
    ):
        limit = config.upload_limit
        buf = bytearray()
        while True:
            chunk = await file.read(1 << 20)
            if not chunk:
                break
            buf.extend(chunk)
            if len(buf) > limit:
                raise HTTPException(status_code=413, detail=f"upload exceeds {limit} bytes")
        filename = file.filename or "upload.csv"
        dataset_id = f"upload-{secrets.token_hex(8)}"
        dataset_name = name or Path(filename).stem
        try:
            if filename.lower().endswith(".json"):
                table = parse_json_records(bytes(buf))
            else:
                table = parse_csv(bytes(buf))
            dataset = load_dataset(
                table, id=dataset_id, name=dataset_name, description=description
            )
        except SpotError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        source = state.add_memory_dataset(dataset)
        return {
            "id": dataset.id,
            "name": dataset.name,
            "status": source.status,
            "facets": [facet_to_json(f) for f in dataset.info.facets],
        }

    @app.post("/api/views", status_code=201)
    async def create_view(request: Request):
        try:
            body = json.loads((await request.body()) or b"{}")
        except json.JSONDecodeError as exc:
            raise HTTPException(status_code=400, detail=f"invalid JSON: {exc}") from exc
        if not isinstance(body, dict) or not isinstance(body.get("datasetId"), str):
            raise HTTPException(status_code=400, detail="body must carry datasetId")
        source = source_or_404(body["datasetId"])
        if source.backend is None:
            raise HTTPException(
                status_code=409,
                detail=f"dataset {body['datasetId']!r} is degraded: {source.reason}",
            )
        view_id = secrets.token_hex(16)
        state.views[view_id] = DataView(
            source.backend,
            include_self=bool(body.get("includeSelf", False)),
            executor=state.executor,
        )
        state.view_dataset[view_id] = body["datasetId"]
        return {"viewId": view_id, "datasetId": body["datasetId"]}

    @app.websocket("/api/views/{view_id}/stream")
    async def view_stream(ws: WebSocket, view_id: str):
        view = state.views.get(view_id)
        if view is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue = asyncio.Queue()

        def on_event(event: UpdateEvent) -> None:
            loop.call_soon_threadsafe(outbox.put_nowait, _update_json(event))

        unsubscribe = view.subscribe(on_event)

        async def sender():
            while True:
                await ws.send_json(await outbox.get())

        send_task = asyncio.create_task(sender())
        try:
            while True:
                message = await ws.receive_json()
                reply = _apply_delta(view, message, outbox)
                if reply is not None:
                    outbox.put_nowait(reply)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            unsubscribe()

    def _apply_delta(view: DataView, message, outbox: asyncio.Queue):
        """Apply one delta; acks are enqueued by the mutation hook so they
        always precede that revision's update events."""
        if not isinstance(message, dict) or "type" not in message:
            return {"type": "error", "error": "ParseError", "message": "message needs a type"}
        kind = message.get("type")

        def ack(revision: int) -> None:
            outbox.put_nowait({"type": "ack", "revision": revision})

        view.mutation_listener = ack
        try:
            if kind == "addFilter":
                view.add_filter(filter_from_json(_req(message, "filter", dict, "$")))
            elif kind == "removeFilter":
                view.remove_filter(_req(message, "filterId", str, "$"))
            elif kind == "setSelection":
                facet = _opt(message, "facet", str, "$", None)
                raw = message.get("selection")
                selection = (
                    None
                    if raw is None
                    else selection_from_json(_as(raw, dict, "$.selection"), "$.selection")
                )
                view.set_selection(_req(message, "filterId", str, "$"), selection, facet)
            elif kind == "clearSelection":
                view.clear_selection(
                    _req(message, "filterId", str, "$"), _opt(message, "facet", str, "$", None)
                )
            else:
                return {"type": "error", "error": "ParseError", "message": f"unknown type {kind!r}"}
        except SpotError as exc:
            return {"type": "error", "error": type(exc).__name__, "message": str(exc)}
        finally:
            view.mutation_listener = None
        return None

    @app.post("/api/sessions", status_code=201)
    async def host_session(request: Request):
        data = await request.body()
        try:
            load_session(data)
        except (ParseError, ValidationError, UnsupportedVersion) as exc:
            raise HTTPException(
                status_code=400, detail=f"{type(exc).__name__}: {exc}"
            ) from exc
        session_id = secrets.token_hex(16)
        state.sessions[session_id] = bytes(data)
        return {"id": session_id, "url": f"/sessions/{session_id}"}

    @app.get("/sessions/{session_id}")
    def fetch_session(session_id: str):
        data = state.sessions.get(session_id)
        if data is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return Response(content=data, media_type="application/json")

    return app


def serve(config: ServerConfig, *, database_url: Optional[str] = None) -> None:
    """Run the service until interrupted (used by the CLI's serve command)."""
    import uvicorn

    host, _, port = config.listen.rpartition(":")
    app = create_app(config, database_url=database_url)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080))
