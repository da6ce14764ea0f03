"""HTTP facade over sessions for the analyst workbench.

Handlers are stateless: every request loads the session from the store and
mutating requests save it back, so a restarted service reproduces all GET
responses. A per-session lock serializes writers; a concurrent step run is
answered with 409. Long-running live-provider steps return 202 plus a poll
URL; replay steps answer synchronously.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import bpmn_io
from .errors import (
    PipelineError,
    PragmosError,
    ProviderError,
    SchemaViolation,
    ValidationError,
)
from .llm_gateway import ProviderConfig, REPLAY
from .session import (
    STEP_NAMES,
    SessionState,
    create_session,
    load_session,
    override_artifact,
    run_step,
    save_session,
)

__all__ = ["create_app", "app"]


class SessionCreateRequest(BaseModel):
    description: str


class SessionCreated(BaseModel):
    id: str


class ProviderOverrides(BaseModel):
    """Optional per-request provider settings, merged over the environment."""

    provider_kind: str | None = None
    base_url: str | None = None
    model_name: str | None = None
    replay_dir: str | None = None
    timeout: float | None = None
    max_retries: int | None = None


class StepRunRequest(BaseModel):
    provider: ProviderOverrides | None = None


class VersionInfo(BaseModel):
    version: int
    provenance: str
    timestamp: str
    parents: dict[str, int]


class SlotView(BaseModel):
    name: str
    versions: int
    stale: bool
    latest: VersionInfo | None = None


class ActivityView(BaseModel):
    label: str
    silent: bool = False


class SessionView(BaseModel):
    id: str
    status: dict[str, str]
    slots: dict[str, SlotView]
    activities: dict[str, ActivityView]
    warnings: list[str]
    step_errors: dict[str, str]


class ArtifactView(BaseModel):
    slot: str
    version: int
    provenance: str
    stale: bool
    value: dict


class ArtifactPut(BaseModel):
    value: dict


class StepStatus(BaseModel):
    step: str
    status: str
    running: bool = False
    error: str | None = None


class AuditEntry(BaseModel):
    seq: int
    step: str
    prompt: str
    response: str
    parsed_ok: bool
    attempt: int
    timestamp: str


class ApiError(BaseModel):
    status: int
    code: str
    detail: str


class _NotFound(PragmosError):
    code = "not_found"


def _error_response(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": status, "code": code, "detail": detail},
    )


def _status_for(exc: PragmosError) -> int:
    if isinstance(exc, _NotFound):
        return 404
    if isinstance(exc, ValidationError):
        return 422
    if isinstance(exc, ProviderError):
        return 502
    if isinstance(exc, PipelineError):
        return 400
    return 500


def _session_view(session: SessionState) -> SessionView:
    slots = {}
    for name, slot in session.slots.items():
        latest = None
        if slot.versions:
            version = slot.versions[-1]
            latest = VersionInfo(
                version=len(slot.versions),
                provenance=version.provenance,
                timestamp=version.timestamp,
                parents=version.parents,
            )
        slots[name] = SlotView(
            name=name,
            versions=len(slot.versions),
            stale=session.is_stale(name),
            latest=latest,
        )
    return SessionView(
        id=session.id,
        status={step: session.step_status(step) for step in STEP_NAMES},
        slots=slots,
        activities={
            a.id: ActivityView(label=a.label, silent=a.silent)
            for a in session.activities.values()
        },
        warnings=list(session.warnings),
        step_errors=dict(session.step_errors),
    )


def create_app(store_root: str | None = None, ui_origin: str | None = None) -> FastAPI:
    store = Path(store_root or os.environ.get("PRAGMOS_STORE", "pragmos-store"))
    origin = ui_origin or os.environ.get("PRAGMOS_UI_ORIGIN", "*")

    app = FastAPI(title="pragmos", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[origin] if origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()
    running: dict[tuple[str, str], str | None] = {}  # (id, step) -> error or None

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(session_id, threading.Lock())

    def load(session_id: str) -> SessionState:
        try:
            return load_session(store, session_id)
        except PragmosError as exc:
            raise _NotFound(f"session {session_id!r} not found: {exc}") from exc

    def provider_config(overrides: ProviderOverrides | None) -> ProviderConfig:
        try:
            config = ProviderConfig.from_env()
        except ValueError:
            config = ProviderConfig(provider_kind=REPLAY, replay_dir=None)
        if overrides:
            for name in (
                "provider_kind",
                "base_url",
                "model_name",
                "replay_dir",
                "timeout",
                "max_retries",
            ):
                value = getattr(overrides, name)
                if value is not None:
                    setattr(config, name, value)
        try:
            config.validate()
        except ValueError as exc:
            raise SchemaViolation(str(exc), "/provider") from exc
        return config

    @app.exception_handler(PragmosError)
    async def handle_domain_error(_request: Request, exc: PragmosError):
        return _error_response(_status_for(exc), exc.code, str(exc))

    @app.post("/api/sessions", response_model=SessionCreated, status_code=201)
    def create(request: SessionCreateRequest) -> SessionCreated:
        session = create_session(request.description)
        save_session(session, store)
        return SessionCreated(id=session.id)

    @app.get("/api/sessions/{session_id}", response_model=SessionView)
    def get_session(session_id: str) -> SessionView:
        return _session_view(load(session_id))

    @app.post("/api/sessions/{session_id}/steps/{step}/run")
    def run(session_id: str, step: str, body: StepRunRequest | None = None):
        if step not in STEP_NAMES:
            raise _NotFound(f"unknown step {step!r}")
        config = provider_config(body.provider if body else None)
        lock = session_lock(session_id)
        if not lock.acquire(blocking=False):
            return _error_response(409, "busy", "another step is running for this session")
        background_started = False
        try:
            session = load(session_id)
            if config.provider_kind == REPLAY:
                try:
                    run_step(session, step, config)
                finally:
                    save_session(session, store)
                return JSONResponse(
                    status_code=200,
                    content={
                        "session": session_id,
                        "step": step,
                        "status": session.step_status(step),
                    },
                )

            # live providers: run in the background, hold the lock until done
            running[(session_id, step)] = None

            def worker():
                try:
                    worker_session = load(session_id)
                    try:
                        run_step(worker_session, step, config)
                    finally:
                        save_session(worker_session, store)
                    running[(session_id, step)] = ""
                except Exception as exc:  # surfaced by the poll endpoint
                    running[(session_id, step)] = str(exc)
                finally:
                    lock.release()

            threading.Thread(target=worker, daemon=True).start()
            background_started = True
            return JSONResponse(
                status_code=202,
                content={
                    "session": session_id,
                    "step": step,
                    "status_url": f"/api/sessions/{session_id}/steps/{step}/status",
                },
            )
        finally:
            if not background_started:
                lock.release()

    @app.get("/api/sessions/{session_id}/steps/{step}/status", response_model=StepStatus)
    def step_status(session_id: str, step: str) -> StepStatus:
        if step not in STEP_NAMES:
            raise _NotFound(f"unknown step {step!r}")
        key = (session_id, step)
        if key in running and running[key] is None:
            return StepStatus(step=step, status="running", running=True)
        session = load(session_id)
        error = session.step_errors.get(step) or (running.get(key) or None)
        return StepStatus(step=step, status=session.step_status(step), error=error)

    @app.get("/api/sessions/{session_id}/artifacts/{slot}", response_model=ArtifactView)
    def get_artifact(session_id: str, slot: str, version: int | None = None) -> ArtifactView:
        session = load(session_id)
        if slot not in bpmn_io.SLOT_NAMES:
            raise _NotFound(f"unknown artifact slot {slot!r}")
        stored = session.slots.get(slot)
        if not stored or not stored.versions:
            raise _NotFound(f"slot {slot!r} has no versions yet")
        index = version or len(stored.versions)
        if not 1 <= index <= len(stored.versions):
            raise _NotFound(f"slot {slot!r} has no version {index}")
        chosen = stored.versions[index - 1]
        return ArtifactView(
            slot=slot,
            version=index,
            provenance=chosen.provenance,
            stale=session.is_stale(slot),
            value=chosen.value,
        )

    @app.put("/api/sessions/{session_id}/artifacts/{slot}")
    def put_artifact(session_id: str, slot: str, body: ArtifactPut):
        lock = session_lock(session_id)
        if not lock.acquire(blocking=False):
            return _error_response(409, "busy", "another step is running for this session")
        try:
            session = load(session_id)
            override_artifact(session, slot, body.value)
            save_session(session, store)
            return get_artifact(session_id, slot)
        finally:
            lock.release()

    @app.get("/api/sessions/{session_id}/model")
    def get_model(session_id: str, format: str = "json", version: int | None = None):
        session = load(session_id)
        stored = session.slots.get("model")
        if not stored or not stored.versions:
            raise _NotFound("the session has no model yet")
        index = version or len(stored.versions)
        if not 1 <= index <= len(stored.versions):
            raise _NotFound(f"no model version {index}")
        value = stored.versions[index - 1].value
        if format == "bpmn":
            model = bpmn_io.value_to_model(value)
            xml = bpmn_io.export_bpmn_xml(model, session.activities)
            return Response(content=xml, media_type="application/xml")
        if format != "json":
            raise SchemaViolation("format must be bpmn or json", "/format")
        return JSONResponse(content={"version": index, "value": value})

    @app.get("/api/sessions/{session_id}/audit", response_model=list[AuditEntry])
    def get_audit(session_id: str) -> list[AuditEntry]:
        session = load(session_id)
        return [
            AuditEntry(
                seq=i,
                step=x.step,
                prompt=x.prompt_text,
                response=x.raw_response,
                parsed_ok=x.parsed_ok,
                attempt=x.attempt,
                timestamp=x.timestamp,
            )
            for i, x in enumerate(session.audit, start=1)
        ]

    return app


app = create_app()
