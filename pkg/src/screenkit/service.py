"""HTTP facade over the review queue and dataset store.

Read-mostly JSON API; the only mutation is verdict submission, which funnels
through the orchestrator's single-writer path. Optional static token auth
(one shared reviewer token) and optional static file serving for a bundled
review UI.
"""

from __future__ import annotations

import mimetypes
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .sourcing import (
    ConflictError,
    LeaseError,
    Orchestrator,
    UnknownItemError,
    Verdict,
)
from .sourcing.queue import QueueItem
from .store import DatasetStore, record_to_dict

TOKEN_HEADER = "x-reviewer-token"


def _queue_item_payload(item: QueueItem) -> dict:
    return {
        "image_id": item.image_id,
        "predicted_class": item.predicted_class,
        "confidence": item.confidence,
        "round": item.round,
        "lease_expires": item.lease_expires,
        "verdict": item.verdict,
    }


def create_app(
    orchestrator: Orchestrator,
    store: Optional[DatasetStore] = None,
    reviewer_token: Optional[str] = None,
    static_dir: Optional[str | Path] = None,
) -> FastAPI:
    app = FastAPI(title="screenkit review service", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if reviewer_token is not None and request.url.path.startswith(
            ("/status", "/queue", "/images", "/records")
        ):
            if request.headers.get(TOKEN_HEADER) != reviewer_token:
                return JSONResponse({"error": "invalid reviewer token"}, status_code=401)
        return await call_next(request)

    @app.get("/status")
    def status() -> dict:
        state = orchestrator.state
        return {
            "phase": state.phase.value,
            "round": state.round,
            "model_version": state.model_version,
            "frozen_version": state.frozen_version,
            "queue": orchestrator.queue.counts(state.round),
            "pool_size": len(orchestrator.pool),
            "intake_size": len(orchestrator.intake),
        }

    @app.get("/queue/next")
    def queue_next(reviewer: str = "") -> Response:
        if not reviewer:
            return JSONResponse({"error": "reviewer query parameter required"}, status_code=422)
        item = orchestrator.queue_next(reviewer)
        if item is None:
            return Response(status_code=204)
        return JSONResponse(_queue_item_payload(item))

    @app.post("/queue/{image_id}/verdict")
    async def submit_verdict(image_id: str, request: Request) -> Response:
        body = await request.json()
        try:
            verdict = Verdict(
                image_id=image_id,
                decision=body.get("decision", ""),
                reviewer_id=body.get("reviewer_id", ""),
                timestamp=orchestrator.clock(),
                relabel_class=body.get("relabel_class"),
            )
        except ValueError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        try:
            item = orchestrator.submit_verdict(verdict)
        except UnknownItemError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        except ConflictError as exc:
            return JSONResponse({"error": str(exc)}, status_code=409)
        except LeaseError as exc:
            return JSONResponse({"error": str(exc)}, status_code=423)
        return JSONResponse(_queue_item_payload(item))

    @app.get("/images/{image_id}")
    def get_image(image_id: str) -> Response:
        path = store.image_path(image_id) if store else None
        if path is None:
            return JSONResponse({"error": f"no image for {image_id!r}"}, status_code=404)
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return FileResponse(path, media_type=media_type)

    @app.get("/records/{image_id}")
    def get_record(image_id: str) -> Response:
        record = store.get_record(image_id) if store else None
        if record is None:
            return JSONResponse({"error": f"no record for {image_id!r}"}, status_code=404)
        return JSONResponse(record_to_dict(record))

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
