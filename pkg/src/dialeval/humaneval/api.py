"""HTTP surface of the rating-collection service.

Endpoints consumed by the annotation UI:

* ``GET /api/campaigns`` - campaign summaries.
* ``GET /api/assignment?campaign=..&worker=..&task=..`` - 200 with an
  assignment payload, or 204 when no eligible work remains.
* ``POST /api/rating`` - 201 on acceptance.
* ``GET /api/progress?campaign=..`` - completion counters.
* ``GET /api/export?campaign=..`` - newline-delimited rating records.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .service import (
    CampaignService,
    DuplicateRatingError,
    HumanEvalError,
    IncompleteRatingsError,
    InvalidRatingError,
    LeaseExpiredError,
    TaskKind,
    UnknownAssignmentError,
    UnknownCampaignError,
)


class RatingIn(BaseModel):
    assignment_id: str
    score: int | None = None
    choice: str | None = None


def _error(status: int, exc: Exception) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": str(exc)})


def create_app(service: CampaignService) -> FastAPI:
    app = FastAPI(title="dialeval rating service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(UnknownCampaignError)
    @app.exception_handler(UnknownAssignmentError)
    async def _unknown(request, exc):  # noqa: ANN001
        return _error(404, exc)

    @app.exception_handler(DuplicateRatingError)
    @app.exception_handler(IncompleteRatingsError)
    async def _conflict(request, exc):  # noqa: ANN001
        return _error(409, exc)

    @app.exception_handler(LeaseExpiredError)
    async def _gone(request, exc):  # noqa: ANN001
        return _error(410, exc)

    @app.exception_handler(InvalidRatingError)
    async def _invalid(request, exc):  # noqa: ANN001
        return _error(422, exc)

    @app.get("/api/campaigns")
    def campaigns():
        return service.campaigns()

    @app.get("/api/assignment")
    def assignment(campaign: str, worker: str, task: str | None = None):
        try:
            kind = TaskKind(task) if task else None
        except ValueError:
            raise InvalidRatingError(f"unknown task {task!r}") from None
        issued = service.next_assignment(campaign, worker, kind)
        if issued is None:
            return Response(status_code=204)
        return {
            "assignment_id": issued.assignment_id,
            "campaign_id": issued.campaign_id,
            "task": issued.task.value,
            "instance_id": issued.instance_id,
            "submission_ids": list(issued.submissions),
            "worker_id": issued.worker_id,
            "expires_at": issued.expires_at,
            "payload": issued.payload,
        }

    @app.post("/api/rating", status_code=201)
    def rating(body: RatingIn):
        record = service.submit_rating(
            body.assignment_id, score=body.score, choice=body.choice
        )
        return {"status": "recorded", "assignment_id": record.assignment_id}

    @app.get("/api/progress")
    def progress(campaign: str):
        return service.progress(campaign)

    @app.get("/api/export")
    def export(campaign: str):
        lines = [
            json.dumps(record.to_dict(), ensure_ascii=False)
            for record in service.export_records(campaign)
        ]
        body = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(content=body, media_type="application/x-ndjson")

    return app
