"""HTTP surface over the service: JSON in, JSON out, bearer-token auth.

Domain errors map onto stable status codes:
400 invalid config / illegal decision, 401 unauthenticated,
403 role mismatch / policy denied / self-review, 404 not found,
409 stale task / stale write / wrong stage, 503 agent unavailable.
"""

from __future__ import annotations

from typing import Optional

from fastapi import Depends, FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import agents as ag
from . import broker as br
from . import hil
from . import kernel
from . import persistence as ps
from . import simulator as sim
from .hil import Role
from .service import BugTracker, NotFound, Session, Unauthenticated, WrongStage

STATUS_BY_ERROR: tuple[tuple[type, int], ...] = (
    (sim.InvalidConfig, 400),
    (sim.IncomparableConfigs, 400),
    (sim.PathSpaceTooLarge, 400),
    (hil.IllegalDecision, 400),
    (ag.NoCandidates, 400),
    (kernel.ZeroThreshold, 400),
    (kernel.IllegalOutcome, 400),
    (kernel.TerminalCase, 409),
    (Unauthenticated, 401),
    (hil.RoleMismatch, 403),
    (hil.SelfReview, 403),
    (br.PolicyDenied, 403),
    (NotFound, 404),
    (br.NotFound, 404),
    (br.UnknownCase, 404),
    (hil.UnknownTask, 404),
    (ps.UnknownCaseLog, 404),
    (hil.StaleTask, 409),
    (hil.TaskAlreadyOpen, 409),
    (ps.StaleWrite, 409),
    (ps.DuplicateCase, 409),
    (WrongStage, 409),
    (ag.AgentUnavailable, 503),
    (ag.MalformedResponse, 502),
)


def _status_for(error: Exception) -> int:
    for error_type, status in STATUS_BY_ERROR:
        if isinstance(error, error_type):
            return status
    return 500


class SubmitBody(BaseModel):
    text: str
    title: str = ""
    metadata: dict = Field(default_factory=dict)


class DialogueBody(BaseModel):
    answer: str


class DecisionBody(BaseModel):
    decision: str
    payload: dict = Field(default_factory=dict)


class SimulateBody(BaseModel):
    config: dict
    replications: int = 1
    exact: bool = False


def create_app(service: Optional[BugTracker] = None) -> FastAPI:
    tracker = service or BugTracker()
    app = FastAPI(title="buglife", version="0.1.0")
    app.state.tracker = tracker

    @app.exception_handler(Exception)
    async def translate(request: Request, error: Exception):  # noqa: ANN202
        status = _status_for(error)
        if status == 500:
            raise error
        return JSONResponse(
            status_code=status,
            content={"error": type(error).__name__, "detail": str(error)},
        )

    def session(authorization: Optional[str] = Header(default=None)) -> Session:
        token = None
        if authorization and authorization.lower().startswith("bearer "):
            token = authorization[7:]
        return tracker.authenticate(token)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "cases": len(tracker.store.cases())}

    @app.post("/bugs", status_code=201)
    def submit(body: SubmitBody, who: Session = Depends(session)) -> dict:
        return tracker.submit_report(who, body.text, body.metadata, body.title)

    @app.post("/bugs/{case_id}/dialogue")
    def dialogue(case_id: str, body: DialogueBody, who: Session = Depends(session)) -> dict:
        return tracker.dialogue_turn(case_id, who, body.answer)

    @app.get("/bugs/{case_id}")
    def get_case(case_id: str, who: Session = Depends(session)) -> dict:
        return tracker.get_case(case_id, who)

    @app.get("/bugs/{case_id}/timeline")
    def get_timeline(case_id: str, who: Session = Depends(session)) -> dict:
        return tracker.get_timeline(case_id, who)

    @app.get("/bugs/{case_id}/export")
    def export_log(case_id: str, who: Session = Depends(session)) -> Response:
        tracker._require_read_access(case_id, who)
        return Response(
            content=tracker.export_case_log(case_id),
            media_type="application/jsonl",
        )

    @app.get("/tasks")
    def tasks(role: str, who: Session = Depends(session)) -> dict:
        try:
            parsed = Role(role)
        except ValueError as exc:
            raise NotFound(f"unknown role {role!r}") from exc
        return {"tasks": tracker.list_tasks(parsed, who)}

    @app.post("/tasks/{task_id}/decision")
    def decide(task_id: str, body: DecisionBody, who: Session = Depends(session)) -> dict:
        return tracker.post_decision(task_id, who, body.decision, body.payload)

    @app.post("/simulate")
    def run_simulation(body: SimulateBody, who: Session = Depends(session)) -> dict:
        return tracker.run_simulation(body.config, body.replications, body.exact)

    return app
