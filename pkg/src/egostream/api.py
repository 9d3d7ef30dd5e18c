"""HTTP/WebSocket surface over the stream manager.

JSON for structured data, media by reference under /media/{id}, frames
and events pushed over WebSockets with per-connection bounded buffering:
a consumer that cannot keep up is disconnected instead of holding the
pipeline's memory hostage.
"""
from __future__ import annotations

import asyncio
import base64
import io
import json
import math
import tempfile
from concurrent.futures import TimeoutError as FutureTimeoutError
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, Query, UploadFile, WebSocket
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field
from starlette.websockets import WebSocketDisconnect

from .config import Config
from .errors import ConnectFailed
from .ingest import CLOSED, StreamSource
from .orchestrator import DuplicateSource, StreamManager, SubscriberQueue, UnknownStream
from .timeline import format_timestamp

WS_UNKNOWN_STREAM = 4404
WS_SLOW_CONSUMER = 1013


class SourceBody(BaseModel):
    kind: str = Field(pattern="^(rtmp|file|synthetic)$")
    uri: str = Field(min_length=1)
    rate: float = Field(default=1.0, gt=0)


class CreateStreamBody(BaseModel):
    source: SourceBody
    caption_outages: list[tuple[float, float]] = Field(default_factory=list)


class QueryBody(BaseModel):
    text: str


def pump_step(q: SubscriberQueue):
    """One poll of an event subscriber queue, as a decision the socket loop
    executes: ("close", code, reason) | ("send", event) | ("idle",) | ("end",).
    Overflow wins over anything still queued, so a consumer never sees a
    silent gap; it sees a disconnect."""
    if q.overflowed:
        return ("close", WS_SLOW_CONSUMER, "slow_consumer")
    item = q.get(timeout=0)
    if item is CLOSED:
        return ("end",)
    if item is None:
        return ("idle",)
    return ("send", item)


def create_app(config: Config | None = None, manager: StreamManager | None = None) -> FastAPI:
    config = config or Config()
    manager = manager or StreamManager(config)
    upload_dir = Path(tempfile.mkdtemp(prefix="egostream-uploads-"))
    upload_counter = {"n": 0}

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        manager.stop_all()

    app = FastAPI(title="egostream", lifespan=lifespan)
    app.state.manager = manager
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(DuplicateSource)
    async def on_duplicate(request, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(UnknownStream)
    async def on_unknown(request, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ConnectFailed)
    async def on_connect_failed(request, exc):
        return JSONResponse(
            status_code=502, content={"detail": str(exc), "code": "connect_failed"}
        )

    # --- streams -------------------------------------------------------------

    @app.post("/streams")
    def create_stream(body: CreateStreamBody) -> dict:
        try:
            source = StreamSource(kind=body.source.kind, uri=body.source.uri, rate=body.source.rate)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        worker = manager.create_stream(source, caption_outages=tuple(body.caption_outages))
        return {"stream_id": worker.stream_id}

    @app.get("/streams")
    def list_streams() -> dict:
        return {"streams": manager.list_streams()}

    @app.get("/streams/{stream_id}")
    def stream_status(stream_id: str) -> dict:
        return manager.get(stream_id).status()

    @app.delete("/streams/{stream_id}", status_code=204)
    def delete_stream(stream_id: str) -> Response:
        manager.remove_stream(stream_id)
        return Response(status_code=204)

    # --- queries --------------------------------------------------------------

    @app.post("/streams/{stream_id}/query")
    def query_stream(stream_id: str, body: QueryBody) -> dict:
        worker = manager.get(stream_id)
        text = body.text.strip()
        if not text:
            raise HTTPException(status_code=400, detail="query text must be non-empty")
        future = worker.submit_text_query(text)
        wait_s = config.session.processing_deadline_s + 5.0
        try:
            response = future.result(timeout=wait_s)
        except FutureTimeoutError:
            raise HTTPException(status_code=408, detail="processing deadline exceeded")
        except UnknownStream as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        payload = response.to_payload()
        if response.error_code == "deadline_exceeded":
            return JSONResponse(status_code=408, content=payload)
        return payload

    # --- memory ------------------------------------------------------------------

    @app.get("/streams/{stream_id}/memory")
    def memory_page(
        stream_id: str,
        from_t: float | None = Query(default=None, alias="from"),
        to_t: float | None = Query(default=None, alias="to"),
        page: int = Query(default=0, ge=0),
        page_size: int | None = Query(default=None, ge=1, le=1000),
    ) -> dict:
        worker = manager.get(stream_id)
        lo = 0.0 if from_t is None else from_t
        hi = math.inf if to_t is None else to_t
        if hi < lo:
            raise HTTPException(status_code=400, detail=f"inverted range [{lo}, {hi}]")
        size = page_size or config.api.page_size
        entries = worker.memory.query_by_time(lo, hi)
        window = entries[page * size : (page + 1) * size]
        return {
            "entries": [
                {
                    "id": e.entry_id,
                    "t_start": e.t_start,
                    "t_end": e.t_end,
                    "description": e.description,
                    "timestamp": format_timestamp(e.midpoint),
                }
                for e in window
            ],
            "page": page,
            "page_size": size,
            "total": len(entries),
        }

    # --- media ----------------------------------------------------------------------

    @app.get("/media/{media_id}")
    def get_media(media_id: str) -> Response:
        obj = manager.store.get(media_id)
        if obj is None:
            raise HTTPException(status_code=404, detail=f"no media {media_id!r}")
        return Response(content=obj.data, media_type=obj.content_type)

    # --- upload -----------------------------------------------------------------------

    @app.post("/upload")
    async def upload(file: UploadFile = File(...), rate: float = Form(default=1.0)) -> dict:
        if rate <= 0:
            raise HTTPException(status_code=400, detail="rate must be positive")
        data = await file.read()
        if len(data) > config.api.upload_max_bytes:
            raise HTTPException(
                status_code=413,
                detail=f"upload exceeds {config.api.upload_max_bytes} bytes",
            )
        if not data:
            raise HTTPException(status_code=400, detail="empty upload")
        suffix = Path(file.filename or "upload.mp4").suffix or ".mp4"
        upload_counter["n"] += 1
        path = upload_dir / f"u-{upload_counter['n']}{suffix}"
        path.write_bytes(data)

        import cv2

        cap = cv2.VideoCapture(str(path))
        ok = cap.isOpened() and cap.read()[0]
        cap.release()
        if not ok:
            path.unlink(missing_ok=True)
            raise HTTPException(status_code=400, detail="upload is not a decodable video")

        worker = manager.create_stream(StreamSource(kind="file", uri=str(path), rate=rate))
        return {"stream_id": worker.stream_id}

    # --- websockets ----------------------------------------------------------------------

    @app.websocket("/streams/{stream_id}/events")
    async def events_socket(websocket: WebSocket, stream_id: str):
        try:
            manager.get(stream_id)
        except UnknownStream:
            await websocket.accept()
            await websocket.close(code=WS_UNKNOWN_STREAM, reason="unknown_stream")
            return
        q = manager.bus.subscribe(stream_id)
        await websocket.accept()
        try:
            while True:
                decision = pump_step(q)
                if decision[0] == "close":
                    await websocket.close(code=decision[1], reason=decision[2])
                    return
                if decision[0] == "end":
                    await websocket.close()
                    return
                if decision[0] == "idle":
                    await asyncio.sleep(0.02)
                    continue
                await websocket.send_json(decision[1].to_payload())
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            manager.bus.unsubscribe(stream_id, q)

    @app.websocket("/streams/{stream_id}/frames")
    async def frames_socket(websocket: WebSocket, stream_id: str):
        try:
            worker = manager.get(stream_id)
        except UnknownStream:
            await websocket.accept()
            await websocket.close(code=WS_UNKNOWN_STREAM, reason="unknown_stream")
            return
        await websocket.accept()
        interval = 1.0 / config.api.display_fps
        last_seq = -1
        try:
            while True:
                frame = worker.tracker.latest()
                if frame is not None and frame.sequence_no != last_seq:
                    last_seq = frame.sequence_no
                    await websocket.send_bytes(_frame_message(frame))
                elif worker._ended.is_set():
                    await websocket.close()  # end of stream, nothing more to send
                    return
                await asyncio.sleep(interval)
        except (WebSocketDisconnect, RuntimeError):
            pass

    # web client assets live under /app so API routes keep the root namespace
    if config.api.static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=config.api.static_dir, html=True), name="app")

    return app


def _frame_message(frame) -> bytes:
    from PIL import Image
    import numpy as np

    buf = io.BytesIO()
    Image.fromarray(np.asarray(frame.pixel_data, dtype=np.uint8)).save(buf, format="JPEG")
    return json.dumps(
        {
            "media_time": frame.media_time,
            "seq": frame.sequence_no,
            "jpeg_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
        }
    ).encode("utf-8")
