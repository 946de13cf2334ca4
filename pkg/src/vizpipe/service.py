"""HTTP + WebSocket service over the execution engine.

Routes:
    POST  /api/pipelines                 create, run, return {pipeline_id}
    GET   /api/pipelines                 list live pipeline ids
    GET   /api/pipelines/{id}/scenes     current scene list
    PATCH /api/pipelines/{id}/params     one reactive edit {path, value}
    GET   /api/pipelines/{id}/params     editable paths + algorithm registry
    GET   /api/pipelines/{id}/frame      binary frame, ?columns=a,b projects
    GET   /api/pipelines/{id}/results/{name}  analysis / model export
    POST  /api/uploads                   CSV body -> source token
    WS    /api/pipelines/{id}/events     {type, views, revision} per edit

Sessions live in process memory; edits on one pipeline are serialized by the
engine lock, and a failed edit leaves scenes and frame byte-identical.
"""

from __future__ import annotations

import asyncio
import os
import uuid
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, JSONResponse
from starlette.concurrency import run_in_threadpool

from . import engine
from .catalog import DEFAULT_CATALOG, Catalog
from .codec import encode
from .errors import (
    ExecutionError,
    NotYetExecuted,
    SchemaError,
    SpecSyntaxError,
    UnknownColumn,
    UnknownOperation,
    UnknownPath,
)
from .ingest import SourceResolver
from .scene import PluginRegistry
from .speclang import parse_pipeline, validate_pipeline

DEFAULT_PORT = 8646
DEFAULT_UPLOAD_MB = 64.0

_PLACEHOLDER = """<!doctype html>
<html><head><title>vizpipe</title></head>
<body><h1>vizpipe service</h1>
<p>The API lives under <code>/api</code>. No dashboard bundle is installed;
point the server at one with <code>--static</code>.</p></body></html>
"""


@dataclass
class Session:
    graph: engine.DepGraph
    revision: int = 0
    queues: list = dc_field(default_factory=list)

    def push(self, views: list[int]) -> dict:
        self.revision += 1
        event = {"type": "scenes-updated", "views": views,
                 "revision": self.revision}
        for queue in list(self.queues):
            queue.put_nowait(event)
        return event


def _finding_response(status: int, findings) -> JSONResponse:
    return JSONResponse(status_code=status, content={"findings": findings})


def _parse_failure(exc) -> list[dict]:
    if isinstance(exc, SchemaError):
        return [{"severity": "error", "path": exc.path, "code": "SchemaError",
                 "message": str(exc).split(": ", 1)[-1]}]
    return [{"severity": "error", "path": "/", "code": "SyntaxError",
             "message": str(exc)}]


def _execution_report(exc: ExecutionError) -> dict:
    return {"node": exc.node_id, "context": exc.context,
            "message": str(exc.cause)}


def _editable_paths(graph: engine.DepGraph, catalog: Catalog) -> list[dict]:
    """Every spec location a control can patch, with its current value."""
    spec = graph.raw_spec
    out = []

    def leaf(path, value, **meta):
        out.append({"path": path, "value": value} | meta)

    for a in spec.analyses:
        base = f"/analyses/{a.output_name}"
        leaf(f"{base}/algorithm", a.algorithm,
             choices=sorted(catalog.describe()["algorithms"]))
        leaf(f"{base}/features", list(a.features), kind="field-list")
        leaf(f"{base}/scaling", a.scaling, choices=sorted(catalog.scaling_methods))
        entry = catalog.algorithm(a.algorithm)
        for name, info in (entry.params.items() if entry else ()):
            current = a.parameters.get(name, info.default)
            leaf(f"{base}/parameters/{name}", current, kind=info.kind)
    for m in spec.models:
        base = f"/models/{m.name}"
        leaf(f"{base}/method", m.method,
             choices=sorted(catalog.model_methods))
        leaf(f"{base}/features", list(m.features), kind="field-list")
        for name, value in m.parameters.items():
            leaf(f"{base}/parameters/{name}", value)
    for v in graph.expanded.concrete_views():
        base = f"/visualizations/{v.view_id}"
        leaf(f"{base}/mark", v.mark_type)
        for channel, value in v.encodings.items():
            leaf(f"{base}/encodings/{channel}", value, kind="encoding")
    layout = spec.view_layout
    if layout is not None:
        for attr in ("rows", "cols", "width", "height", "padding"):
            leaf(f"/view-layout/{attr}", getattr(layout, attr), kind="int")
    return out


def create_app(
    base_dir=None,
    catalog: Catalog | None = None,
    plugins: PluginRegistry | None = None,
    max_upload_mb: float | None = None,
    static_dir=None,
) -> FastAPI:
    catalog = catalog or DEFAULT_CATALOG
    app = FastAPI(title="vizpipe", docs_url=None, redoc_url=None)
    sessions: dict[str, Session] = {}
    uploads: dict[str, bytes] = {}
    if max_upload_mb is None:
        max_upload_mb = float(os.environ.get("P6_MAX_UPLOAD_MB", DEFAULT_UPLOAD_MB))
    app.state.sessions = sessions
    app.state.uploads = uploads

    def build(doc) -> engine.DepGraph:
        resolver = SourceResolver(base_dir=base_dir)
        resolver.uploads = uploads
        graph = engine.build_graph(doc, catalog=catalog, plugins=plugins,
                                   resolver=resolver)
        engine.execute(graph)
        return graph

    def session_of(pipeline_id: str) -> Session | None:
        return sessions.get(pipeline_id)

    @app.post("/api/pipelines", status_code=201)
    async def create_pipeline(request: Request):
        body = await request.body()
        try:
            spec = parse_pipeline(body.decode("utf-8"))
        except (SpecSyntaxError, SchemaError) as exc:
            return _finding_response(400, _parse_failure(exc))
        report = validate_pipeline(spec, catalog)
        if not report.ok:
            return _finding_response(400, report.to_json())
        try:
            graph = await run_in_threadpool(build, spec)
        except ExecutionError as exc:
            return JSONResponse(status_code=422, content=_execution_report(exc))
        pipeline_id = uuid.uuid4().hex[:12]
        sessions[pipeline_id] = Session(graph=graph)
        return {"pipeline_id": pipeline_id}

    @app.get("/api/pipelines")
    def list_pipelines():
        return {"pipelines": sorted(sessions)}

    @app.patch("/api/pipelines/{pipeline_id}/params")
    async def patch_parameter(pipeline_id: str, request: Request):
        session = session_of(pipeline_id)
        if session is None:
            return JSONResponse(status_code=404, content={"error": "unknown pipeline"})
        body = await request.json()
        if not isinstance(body, dict) or "path" not in body:
            return JSONResponse(status_code=400,
                                content={"error": "body must be {path, value}"})
        try:
            change = await run_in_threadpool(
                engine.set_parameter, session.graph,
                str(body["path"]), body.get("value"))
        except (UnknownPath, TypeError, SchemaError, SpecSyntaxError) as exc:
            return JSONResponse(status_code=400, content={
                "error": type(exc).__name__, "message": str(exc)})
        except ExecutionError as exc:
            return JSONResponse(status_code=422, content=_execution_report(exc))
        event = session.push(change.views)
        return {"path": change.path, "value": change.value,
                "dirty": change.dirty, "recomputed": change.recomputed,
                "views": change.views, "revision": event["revision"]}

    @app.get("/api/pipelines/{pipeline_id}/scenes")
    def get_scenes(pipeline_id: str):
        session = session_of(pipeline_id)
        if session is None:
            return JSONResponse(status_code=404, content={"error": "unknown pipeline"})
        with session.graph.lock:
            return session.graph.scenes()

    @app.get("/api/pipelines/{pipeline_id}/params")
    def get_params(pipeline_id: str):
        session = session_of(pipeline_id)
        if session is None:
            return JSONResponse(status_code=404, content={"error": "unknown pipeline"})
        with session.graph.lock:
            editable = _editable_paths(session.graph, catalog)
        return {"editable": editable} | catalog.describe()

    @app.get("/api/pipelines/{pipeline_id}/frame")
    def stream_frame(pipeline_id: str, columns: str | None = None):
        session = session_of(pipeline_id)
        if session is None:
            return JSONResponse(status_code=404, content={"error": "unknown pipeline"})
        with session.graph.lock:
            frame = session.graph.frame()
        if columns:
            try:
                frame = frame.project([c for c in columns.split(",") if c])
            except UnknownColumn as exc:
                return JSONResponse(status_code=400, content={
                    "error": "UnknownColumn", "message": str(exc)})
        return Response(content=encode(frame),
                        media_type="application/octet-stream")

    @app.get("/api/pipelines/{pipeline_id}/results/{name}")
    def get_result(pipeline_id: str, name: str):
        session = session_of(pipeline_id)
        if session is None:
            return JSONResponse(status_code=404, content={"error": "unknown pipeline"})
        try:
            with session.graph.lock:
                return engine.export_result(session.graph, name)
        except UnknownOperation as exc:
            return JSONResponse(status_code=404, content={
                "error": "UnknownOperation", "message": str(exc)})
        except NotYetExecuted as exc:
            return JSONResponse(status_code=409, content={
                "error": "NotYetExecuted", "message": str(exc)})

    @app.post("/api/uploads")
    async def upload_data(request: Request):
        body = await request.body()
        if len(body) > max_upload_mb * 2 ** 20:
            return JSONResponse(status_code=413, content={
                "error": "TooLarge",
                "message": f"body exceeds {max_upload_mb} MB"})
        token = f"upload:{uuid.uuid4().hex[:12]}"
        uploads[token] = body
        return {"token": token}

    @app.websocket("/api/pipelines/{pipeline_id}/events")
    async def events(websocket: WebSocket, pipeline_id: str):
        session = session_of(pipeline_id)
        await websocket.accept()
        if session is None:
            await websocket.close(code=4004)
            return
        queue: asyncio.Queue = asyncio.Queue()
        session.queues.append(queue)
        try:
            while True:
                await websocket.send_json(await queue.get())
        except WebSocketDisconnect:
            pass
        finally:
            if queue in session.queues:
                session.queues.remove(queue)

    static_path = Path(static_dir) if static_dir else None
    if static_path and static_path.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_path, html=True))
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return _PLACEHOLDER

    return app


def preload(app: FastAPI, docs, base_dir=None, catalog=None, plugins=None) -> list[str]:
    """Build and register pipelines before serving; returns their ids."""
    catalog = catalog or DEFAULT_CATALOG
    ids = []
    for doc in docs:
        resolver = SourceResolver(base_dir=base_dir)
        resolver.uploads = app.state.uploads
        graph = engine.build_graph(doc, catalog=catalog, plugins=plugins,
                                   resolver=resolver)
        engine.execute(graph)
        pipeline_id = uuid.uuid4().hex[:12]
        app.state.sessions[pipeline_id] = Session(graph=graph)
        ids.append(pipeline_id)
    return ids
