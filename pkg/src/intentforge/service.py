"""HTTP JSON API over the annotation store.

Endpoints:
    GET  /api/batch?task=...&n=...&worker=...
    POST /api/vote   {assertion_id, worker_id, task, value}
    GET  /api/progress
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .annotation import AnnotationStore, VoteRejected


class VoteSubmission(BaseModel):
    assertion_id: str
    worker_id: str
    task: str
    value: float


def create_app(store: AnnotationStore) -> FastAPI:
    app = FastAPI(title="intentforge annotation service")
    # The annotation UI is served from a different origin during development.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/batch")
    def batch(task: str, n: int, worker: str):
        try:
            cards = store.batch(task, n, worker)
        except (ValueError, VoteRejected) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        return {"cards": cards}

    @app.post("/api/vote")
    def vote(submission: VoteSubmission):
        try:
            store.vote(submission.assertion_id, submission.worker_id, submission.task, submission.value)
        except VoteRejected as exc:
            return JSONResponse({"accepted": False, "reason": exc.reason}, status_code=409)
        return {"accepted": True}

    @app.get("/api/progress")
    def progress():
        return store.progress()

    return app


def serve(store: AnnotationStore, host: str = "127.0.0.1", port: int = 8710) -> None:
    import uvicorn

    uvicorn.run(create_app(store), host=host, port=port, log_level="warning")
