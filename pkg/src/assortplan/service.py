"""HTTP surface for the planner: sessions, messages, history, datasets, solve."""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .datastore import DataStore
from .errors import ValidationError
from .intent import Action, IntentFrame
from .orchestrator import SERVICE_DEGRADED, Orchestrator, result_to_dict


class MessageIn(BaseModel):
    text: str


class SolveIn(BaseModel):
    dataset: str | None = None
    model: str | None = None
    cardinality: int | None = None
    include_products: list[int] | None = None
    exclude_products: list[int] | None = None


def wire_json(document: object) -> str:
    """Canonical JSON used on the wire and by the CLI (identical bytes)."""
    return json.dumps(document, ensure_ascii=False, allow_nan=False, separators=(",", ":"))


def _json_response(document: object, status_code: int = 200) -> Response:
    return Response(content=wire_json(document), status_code=status_code, media_type="application/json")


def _error_body(code: str, message: str, field: str | None = None) -> dict:
    return {"code": code, "message": message, "offending_field": field}


def create_app(
    data_dir: str | Path | None = None,
    mode: str | None = None,
    orchestrator: Orchestrator | None = None,
    snapshot_on_shutdown: bool = False,
) -> FastAPI:
    if orchestrator is None:
        if data_dir is None:
            raise ValueError("create_app needs a data_dir or a prebuilt orchestrator")
        orchestrator = Orchestrator(DataStore(data_dir), mode=mode)

    app = FastAPI(title="assortplan", version="0.1.0")

    if snapshot_on_shutdown and data_dir is not None:
        @app.on_event("shutdown")
        def snapshot_sessions() -> None:
            orchestrator.snapshot_sessions(Path(data_dir) / "sessions-snapshot.json")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.orchestrator = orchestrator

    @app.post("/v1/sessions", status_code=201)
    def create_session() -> Response:
        return _json_response({"session_id": orchestrator.create_session()}, status_code=201)

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn) -> Response:
        if not orchestrator.has_session(session_id):
            return _json_response(_error_body("UNKNOWN_SESSION", f"no session '{session_id}'"), 404)
        if not body.text.strip():
            return _json_response(_error_body("BAD_REQUEST", "text must be non-empty", "text"), 400)
        reply = orchestrator.handle_turn(session_id, body.text)
        if reply.error is not None and reply.error.code == SERVICE_DEGRADED:
            return _json_response(reply.error.to_dict(), 503)
        catalog = None
        if reply.result is not None and reply.frame.dataset is not None:
            catalog = orchestrator.store.catalog(reply.frame.dataset)
        return _json_response(reply.to_dict(catalog))

    @app.get("/v1/sessions/{session_id}/history")
    def get_history(session_id: str) -> Response:
        if not orchestrator.has_session(session_id):
            return _json_response(_error_body("UNKNOWN_SESSION", f"no session '{session_id}'"), 404)
        turns = [
            {"role": t.role, "text": t.text, "timestamp": t.timestamp}
            for t in orchestrator.session(session_id).history
        ]
        return _json_response(turns)

    @app.get("/v1/datasets")
    def get_datasets() -> Response:
        return _json_response([d.to_dict() for d in orchestrator.store.list_datasets()])

    @app.post("/v1/solve")
    def solve(body: SolveIn) -> Response:
        frame = IntentFrame(
            action=Action.OPTIMIZE,
            dataset=body.dataset.strip().lower() if body.dataset else None,
            model=body.model.strip().lower() if body.model else None,
            cardinality=body.cardinality,
            include=frozenset(body.include_products) if body.include_products is not None else None,
            exclude=frozenset(body.exclude_products) if body.exclude_products is not None else None,
        )
        try:
            result, request = orchestrator.solve_frame(frame)
        except ValidationError as exc:
            return _json_response(_error_body(exc.code, str(exc), exc.field), 400)
        return _json_response(result_to_dict(result, request.catalog))

    return app
