"""HTTP front for the annotation service.

Five endpoint families: next-sample, submit-feedback, model-inspection,
task-overview, and project admin (save/export/health). Annotators
authenticate with a per-annotator token in the X-Annotator-Token
header. Payload schemas are documented in the README and mirrored by
the web client's typed API layer.
"""

from __future__ import annotations

import time

from fastapi import Depends, FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .records import AnnotationRecord
from .service import AnnotationService, ServiceError

__all__ = ["create_app"]


class FeedbackRequest(BaseModel):
    instance_id: str
    final_tags: list[str]
    rationale_spans: list[tuple[int, int]] = Field(default_factory=list)
    suggestion_theta_version: int
    started_at: float | None = None
    comment: str | None = None


class MetricModeRequest(BaseModel):
    metric_mode: str


def create_app(
    project_dir,
    clock=time.time,
    lease_seconds: float | None = None,
    service: AnnotationService | None = None,
) -> FastAPI:
    if service is None:
        service = AnnotationService(project_dir, clock=clock, lease_seconds=lease_seconds)
    app = FastAPI(title="tagloop annotation service", version="0.1.0")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request: Request, err: ServiceError):
        return JSONResponse(
            status_code=err.status,
            content={"error": err.code, "message": str(err)},
        )

    def annotator(x_annotator_token: str = Header(...)) -> str:
        return service.authenticate(x_annotator_token)

    @app.get("/api/health")
    def health():
        return {"status": "ok", "project_id": service.project_id}

    @app.get("/api/next-sample")
    def next_sample(annotator_id: str = Depends(annotator)):
        return service.next_sample(annotator_id)

    @app.post("/api/submit-feedback")
    def submit_feedback(payload: FeedbackRequest, annotator_id: str = Depends(annotator)):
        try:
            record = AnnotationRecord(
                instance_id=payload.instance_id,
                annotator_id=annotator_id,
                final_tags=tuple(payload.final_tags),
                rationale_spans=tuple(payload.rationale_spans),
                suggestion_theta_version=payload.suggestion_theta_version,
                started_at=payload.started_at,
                comment=payload.comment,
            )
        except ValueError as err:
            return JSONResponse(status_code=422, content={"error": "bad_record", "message": str(err)})
        return service.submit_feedback(record)

    @app.get("/api/model-inspection")
    def model_inspection(_annotator_id: str = Depends(annotator)):
        return service.model_inspection()

    @app.post("/api/metric-mode")
    def metric_mode(payload: MetricModeRequest, _annotator_id: str = Depends(annotator)):
        return service.set_metric_mode(payload.metric_mode)

    @app.get("/api/task-overview")
    def task_overview(_annotator_id: str = Depends(annotator)):
        return service.task_overview()

    @app.post("/api/save")
    def save(_annotator_id: str = Depends(annotator)):
        service.save()
        return {"status": "saved"}

    @app.get("/api/export-annotations")
    def export_annotations(_annotator_id: str = Depends(annotator)):
        return {"annotations": service.export_annotations()}

    return app
