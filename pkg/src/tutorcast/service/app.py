"""The HTTP service: authoring, playback, execution, search, help, quizzes.

One deployable with per-concern routers. Handlers hold no per-user
state (identity travels in the signed token and everything else lives
in the persistence layer), so any instance can serve any request and
instances scale horizontally behind a balancer. The router boundary is
the seam along which concerns could later be split into separate
services.

Every response carries an ``X-Server-Duration-Ms`` header, consumed by
the load harness to separate server time from network time.
"""

from __future__ import annotations

import asyncio
import logging
import time
import uuid
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import APIRouter, Depends, FastAPI, Form, Request, Response, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .. import replay
from ..errors import (
    AuthenticationError,
    AuthorizationError,
    ConflictError,
    InfrastructureError,
    InputError,
    IntegrityError,
    LifecycleError,
    NotFoundError,
    OrderingError,
    SectionValidationError,
    TutorcastError,
)
from ..events import (
    QuizQuestion,
    RELEASED,
    Tutorial,
    event_from_wire,
    grade_quiz,
    quiz_to_document,
    section_to_document,
)
from ..recording import RecorderService
from ..sandbox import ExecutionLimits, ExecutionService, Sandbox
from ..search import FixtureQaClient, HelpService, HttpQaClient, SearchService
from ..storage import BundleStore, MetadataStore, User
from .auth import (
    Principal,
    ROLE_AUTHOR,
    StubExternalVerifier,
    TokenSigner,
    check_role,
    hash_password,
    verify_password,
)
from .config import ServiceConfig

log = logging.getLogger("tutorcast.service")

_STATUS = {
    InputError: 400,
    AuthenticationError: 401,
    AuthorizationError: 403,
    NotFoundError: 404,
    LifecycleError: 409,
    ConflictError: 409,
    OrderingError: 409,
    SectionValidationError: 422,
    IntegrityError: 500,
    InfrastructureError: 503,
}


def _error_response(exc: TutorcastError) -> JSONResponse:
    status = next((code for cls, code in _STATUS.items() if isinstance(exc, cls)), 500)
    body = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, OrderingError):
        body["expected_seq"] = exc.expected_seq
    if isinstance(exc, SectionValidationError):
        body["violations"] = [{"rule": v.rule, "message": v.message, "seq": v.seq} for v in exc.report]
    return JSONResponse(status_code=status, content=body)


class AppState:
    """Shared services wired from one config; attached to the FastAPI app."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        config.storage_root.mkdir(parents=True, exist_ok=True)
        self.meta = MetadataStore(config.storage_root / "metadata.db")
        self.bundles = BundleStore(config.storage_root / "bundles")
        self.recorder = RecorderService(self.meta, self.bundles)
        self.search = SearchService(self.meta, self.bundles)
        if config.qa_http_url:
            qa_client = HttpQaClient(config.qa_http_url)
        elif config.qa_fixture_path:
            qa_client = FixtureQaClient.from_file(config.qa_fixture_path)
        else:
            qa_client = FixtureQaClient([])
        self.help = HelpService(qa_client)
        self.executor = ExecutionService(
            Sandbox(runs_root=config.storage_root / "runs"),
            workers=config.exec_workers,
        )
        self.signer = TokenSigner(config.secret, config.token_ttl_s)
        self.external_verifier = StubExternalVerifier()

    def close(self) -> None:
        self.executor.shutdown()
        self.meta.close()


# --- request bodies ---------------------------------------------------------


class RegisterBody(BaseModel):
    email: str
    password: str
    role: str = "student"


class LoginBody(BaseModel):
    email: Optional[str] = None
    password: Optional[str] = None
    external_token: Optional[str] = None
    role: str = "student"  # role granted on first external login


class TutorialBody(BaseModel):
    title: str
    language: str


class OrderBody(BaseModel):
    section_ids: list[str]


class QuizBody(BaseModel):
    section_slot: int
    questions: list[dict]


class SessionBody(BaseModel):
    tutorial_id: str
    section_slot: int
    language: str
    notes_source: str = ""


class EventsBody(BaseModel):
    events: list[dict]


class HelpBody(BaseModel):
    error_text: str
    language_id: str


class ExecuteBody(BaseModel):
    language_id: str
    source: str
    stdin: str = ""
    limits: Optional[dict] = None


class GradeBody(BaseModel):
    answers: list[int]


# --- wire helpers ------------------------------------------------------------


def tutorial_to_document(t: Tutorial) -> dict:
    return {
        "tutorial_id": t.tutorial_id,
        "title": t.title,
        "language": t.language,
        "owner_id": t.owner_id,
        "section_ids": list(t.section_ids),
        "status": t.status,
        "version": t.version,
        "released_at": t.released_at,
    }


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig.from_env()
    state = AppState(config)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        state.close()

    app = FastAPI(title="tutorcast", version="1", lifespan=lifespan)
    app.state.services = state

    @app.middleware("http")
    async def timing(request: Request, call_next):
        if config.test_delay_ms:
            await asyncio.sleep(config.test_delay_ms / 1000)
        started = time.monotonic()
        response = await call_next(request)
        duration_ms = (time.monotonic() - started) * 1000
        response.headers["X-Server-Duration-Ms"] = f"{duration_ms:.1f}"
        log.info(
            "request", extra={"route": request.url.path, "method": request.method, "status": response.status_code, "duration_ms": round(duration_ms, 1)}
        )
        return response

    @app.exception_handler(TutorcastError)
    async def domain_error(_request: Request, exc: TutorcastError):
        return _error_response(exc)

    def principal_of(request: Request) -> Principal:
        header = request.headers.get("Authorization", "")
        if not header.startswith("Bearer "):
            raise AuthenticationError("missing bearer token")
        return state.signer.verify(header[len("Bearer ") :])

    def require_author(principal: Principal = Depends(principal_of)) -> Principal:
        if principal.role != ROLE_AUTHOR:
            raise AuthorizationError("author role required")
        return principal

    def visible_tutorial(tutorial_id: str, principal: Principal) -> Tutorial:
        tutorial = state.meta.get_tutorial(tutorial_id)
        if tutorial.status != RELEASED and tutorial.owner_id != principal.user_id:
            raise AuthorizationError("tutorial is not released")
        return tutorial

    # -- auth -----------------------------------------------------------------

    auth = APIRouter(prefix="/auth", tags=["auth"])

    def _issue(user: User) -> dict:
        principal = Principal(user.user_id, user.role, user.auth_provider)
        return {"token": state.signer.issue(principal), "user_id": user.user_id, "role": user.role}

    @auth.post("/register", status_code=201)
    def register(body: RegisterBody):
        user = User(
            user_id=uuid.uuid4().hex,
            email=body.email.strip().lower(),
            password_hash=hash_password(body.password),
            role=check_role(body.role),
        )
        state.meta.put_user(user)
        return _issue(user)

    @auth.post("/login")
    def login(body: LoginBody):
        if body.external_token is not None:
            email = state.external_verifier.verify(body.external_token)
            if email is None:
                raise AuthenticationError("external token rejected")
            user = state.meta.find_user_by_email(email.lower())
            if user is None:
                user = User(uuid.uuid4().hex, email.lower(), "", check_role(body.role), auth_provider="external")
                state.meta.put_user(user)
            return _issue(user)
        if body.email is None or body.password is None:
            raise InputError("provide email+password or external_token")
        user = state.meta.find_user_by_email(body.email.strip().lower())
        if user is None or not user.password_hash or not verify_password(body.password, user.password_hash):
            raise AuthenticationError("bad credentials")
        return _issue(user)

    # -- tutorials --------------------------------------------------------------

    tutorials = APIRouter(prefix="/tutorials", tags=["tutorials"])

    @tutorials.post("", status_code=201)
    def create_tutorial(body: TutorialBody, principal: Principal = Depends(require_author)):
        return tutorial_to_document(state.recorder.create_tutorial(principal.user_id, body.title, body.language))

    @tutorials.get("")
    def list_tutorials(principal: Principal = Depends(principal_of)):
        if principal.role == ROLE_AUTHOR:
            rows = state.meta.list_tutorials(owner_id=principal.user_id)
        else:
            rows = state.meta.list_released()
        return {"tutorials": [tutorial_to_document(t) for t in rows]}

    @tutorials.post("/{tutorial_id}/release")
    def release(tutorial_id: str, principal: Principal = Depends(require_author)):
        tutorial = state.recorder.release_tutorial(principal.user_id, tutorial_id)
        state.search.ensure_index(tutorial_id)  # warm the index at release time
        return tutorial_to_document(tutorial)

    @tutorials.put("/{tutorial_id}/order")
    def resequence(tutorial_id: str, body: OrderBody, principal: Principal = Depends(require_author)):
        return tutorial_to_document(state.recorder.resequence_sections(principal.user_id, tutorial_id, body.section_ids))

    @tutorials.delete("/{tutorial_id}/sections/{section_id}")
    def delete_section(tutorial_id: str, section_id: str, principal: Principal = Depends(require_author)):
        return tutorial_to_document(state.recorder.delete_section(principal.user_id, tutorial_id, section_id))

    @tutorials.post("/{tutorial_id}/quiz", status_code=201)
    def add_quiz(tutorial_id: str, body: QuizBody, principal: Principal = Depends(require_author)):
        try:
            questions = [
                QuizQuestion(q["prompt"], tuple(q["choices"]), q["correct_index"], q["explanation"], q["points"])
                for q in body.questions
            ]
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed question: {exc}") from exc
        quiz = state.recorder.add_quiz_section(principal.user_id, tutorial_id, body.section_slot, questions)
        return quiz_to_document(quiz)

    # -- recording sessions -----------------------------------------------------

    sessions = APIRouter(prefix="/sessions", tags=["recording"])

    def owned_session(session_id: str, principal: Principal):
        row = state.meta.get_session(session_id)
        if row.author_id != principal.user_id:
            raise AuthorizationError("not your recording session")
        return row

    @sessions.post("", status_code=201)
    def begin(body: SessionBody, principal: Principal = Depends(require_author)):
        session_id = state.recorder.begin_session(
            principal.user_id, body.tutorial_id, body.section_slot, body.language, body.notes_source
        )
        return {"session_id": session_id}

    @sessions.post("/{session_id}/events")
    def append(session_id: str, body: EventsBody, principal: Principal = Depends(require_author)):
        owned_session(session_id, principal)
        try:
            batch = [event_from_wire(int(e["seq"]), e["event"]) for e in body.events]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed event batch: {exc}") from exc
        accepted = state.recorder.append_events(session_id, batch)
        return {"accepted_through_seq": accepted}

    @sessions.post("/{session_id}/finalize", status_code=201)
    async def finalize(
        session_id: str,
        audio: UploadFile,
        duration_ms: int = Form(...),
        principal: Principal = Depends(require_author),
    ):
        owned_session(session_id, principal)
        blob = await audio.read()
        section = state.recorder.finalize_session(session_id, blob, duration_ms)
        row = state.meta.get_session(session_id)
        return {
            "section_id": section.section_id,
            "tutorial_id": row.tutorial_id,
            "duration_ms": section.duration,
            "final_code": section.final_code,
            "event_count": len(section.events),
        }

    @sessions.delete("/{session_id}")
    def discard(session_id: str, principal: Principal = Depends(require_author)):
        owned_session(session_id, principal)
        state.recorder.discard_session(session_id)
        return {"discarded": True}

    # -- playback, search, help, execution, quizzes ------------------------------

    playback = APIRouter(tags=["playback"])

    def section_row_in(tutorial: Tutorial, section_id: str):
        if section_id not in tutorial.section_ids:
            raise NotFoundError(f"section {section_id} not in tutorial {tutorial.tutorial_id}")
        return state.meta.get_section(section_id)

    @playback.get("/tutorials/{tutorial_id}/sections/{section_id}/bundle")
    def bundle(tutorial_id: str, section_id: str, request: Request, response: Response, principal: Principal = Depends(principal_of)):
        tutorial = visible_tutorial(tutorial_id, principal)
        row = section_row_in(tutorial, section_id)
        etag = f'"{row.manifest_sha256}"'
        if request.headers.get("If-None-Match") == etag:
            return Response(status_code=304)
        response.headers["ETag"] = etag
        if row.kind == "quiz":
            quiz = state.bundles.load_quiz_bundle(row.bundle_id, row.manifest_sha256)
            return {"kind": "quiz", "quiz": quiz_to_document(quiz), "manifest_sha256": row.manifest_sha256}
        section, audio_ref = state.bundles.load_recording_bundle(row.bundle_id, row.manifest_sha256)
        return {
            "kind": "recording",
            "section": section_to_document(section),
            "audio_url": f"/tutorials/{tutorial_id}/sections/{section_id}/audio",
            "audio_bytes": audio_ref.byte_size,
            "manifest_sha256": row.manifest_sha256,
        }

    @playback.get("/tutorials/{tutorial_id}/sections/{section_id}/audio")
    def audio(tutorial_id: str, section_id: str, principal: Principal = Depends(principal_of)):
        tutorial = visible_tutorial(tutorial_id, principal)
        row = section_row_in(tutorial, section_id)
        if row.kind != "recording":
            raise InputError("quiz sections have no audio track")
        return Response(content=state.bundles.read_audio(row.bundle_id), media_type="audio/mpeg")

    @playback.get("/tutorials/{tutorial_id}/sections/{section_id}/state")
    def state_at(tutorial_id: str, section_id: str, t: int, principal: Principal = Depends(principal_of)):
        tutorial = visible_tutorial(tutorial_id, principal)
        row = section_row_in(tutorial, section_id)
        if row.kind != "recording":
            raise InputError("quiz sections have no playback state")
        section, _ = state.bundles.load_recording_bundle(row.bundle_id, row.manifest_sha256)
        return replay.state_to_document(replay.state_at(section, t))

    @playback.get("/tutorials/{tutorial_id}/search")
    def search(tutorial_id: str, q: str, principal: Principal = Depends(principal_of)):
        visible_tutorial(tutorial_id, principal)
        hits = state.search.search(tutorial_id, q)
        return {
            "hits": [
                {
                    "section_id": h.section_id,
                    "artifact_kind": h.artifact_kind,
                    "at": h.at,
                    "snippet": h.snippet,
                    "span": list(h.span),
                }
                for h in hits
            ]
        }

    @playback.post("/help")
    def help_route(body: HelpBody, principal: Principal = Depends(principal_of)):
        query = state.help.contextual_help(body.error_text, body.language_id)
        return {
            "normalized_error": query.normalized_error,
            "language_id": query.language_id,
            "resources": [{"title": r.title, "url": r.url, "score": r.score} for r in query.resources],
            "provider_warning": query.provider_warning,
        }

    @playback.post("/execute")
    def execute(body: ExecuteBody, principal: Principal = Depends(principal_of)):
        requested = body.limits or {}
        limits = ExecutionLimits(
            time_ms=min(int(requested.get("time_ms", config.exec_time_ms)), config.exec_time_ms),
            memory_bytes=min(int(requested.get("memory_bytes", config.exec_memory_bytes)), config.exec_memory_bytes),
            output_bytes=min(int(requested.get("output_bytes", config.exec_output_bytes)), config.exec_output_bytes),
        )
        result = state.executor.run(body.language_id, body.source, body.stdin, limits)
        return {
            "stdout": result.stdout,
            "stderr": result.stderr,
            "exit_status": result.exit_status,
            "wall_time_ms": result.wall_time_ms,
            "timed_out": result.timed_out,
            "compile_errors": result.compile_errors,
            "stdout_truncated": result.stdout_truncated,
            "stderr_truncated": result.stderr_truncated,
            "isolation": result.isolation,
        }

    @playback.get("/languages")
    def languages(principal: Principal = Depends(principal_of)):
        return {"languages": state.executor.sandbox.registry.list_languages()}

    @playback.post("/quiz/{section_id}/grade")
    def grade(section_id: str, body: GradeBody, principal: Principal = Depends(principal_of)):
        row = state.meta.get_section(section_id)
        visible_tutorial(row.tutorial_id, principal)
        if row.kind != "quiz":
            raise InputError(f"section {section_id} is not a quiz")
        quiz = state.bundles.load_quiz_bundle(row.bundle_id, row.manifest_sha256)
        report = grade_quiz(quiz, body.answers)
        return {
            "score": report.score,
            "per_question": [
                {"correct": r.correct, "explanation": r.explanation, "points_awarded": r.points_awarded}
                for r in report.per_question
            ],
        }

    @app.get("/health")
    def health():
        return {"status": "ok"}

    app.include_router(auth)
    app.include_router(tutorials)
    app.include_router(sessions)
    app.include_router(playback)
    return app
