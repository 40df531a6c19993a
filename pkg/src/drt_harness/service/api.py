"""HTTP front door: JSON API over the service core.

Error bodies are machine-readable: {"code": ..., "message": ...}. No
participant-facing payload ever contains correctness fields; the item
descriptor carries only the audio URL and the two displayed words.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from ..errors import ServiceError
from ..scoring import report_to_doc, report_to_text
from .core import HarnessService


def create_app(service: HarnessService, *, webui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="drt-harness", version="0.1.0")
    app.state.service = service

    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": str(exc)})

    @app.post("/studies")
    async def create_study(request: Request):
        doc = await request.json()
        study_id = service.create_study(doc)
        return {"study_id": study_id}

    @app.post("/studies/{study_id}/sessions")
    async def open_session(study_id: str, request: Request):
        claims = await request.json()
        return service.open_session(study_id, claims)

    @app.get("/sessions/{session_id}/next")
    async def next_item(session_id: str):
        return service.next_item(session_id)

    @app.post("/sessions/{session_id}/responses")
    async def submit_response(session_id: str, request: Request):
        payload = await request.json()
        return service.submit_response(session_id, payload)

    @app.post("/sessions/{session_id}/events")
    async def submit_event(session_id: str, request: Request):
        payload = await request.json()
        return service.submit_event(session_id, payload)

    @app.get("/studies/{study_id}/report")
    async def report(study_id: str, format: str = "json"):
        rep = service.report(study_id)
        if format == "text":
            return Response(report_to_text(rep), media_type="text/plain")
        return report_to_doc(rep)

    @app.get("/studies/{study_id}/export")
    async def export(study_id: str):
        data = service.export_archive(study_id)
        return Response(
            data, media_type="application/zip",
            headers={"Content-Disposition":
                     f'attachment; filename="{study_id}.zip"'})

    @app.get("/audio/{content_hash}")
    async def audio(content_hash: str):
        data = service.audio_content(content_hash)
        return Response(data, media_type="audio/wav",
                        headers={"Cache-Control":
                                 "public, max-age=31536000, immutable"})

    if webui_dir is not None and Path(webui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=str(webui_dir), html=True),
                  name="webui")

    return app
