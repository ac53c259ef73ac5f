"""HTTP+JSON gateway: the platform's only external surface, versioned
under /api/v1. Sessions travel in the X-Session-Id header; every error is
a structured body {"error": {"code", "message"}}.
"""
from __future__ import annotations

import json
import logging

from fastapi import FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from nnfabric.archive import (
    ArchiveError,
    ArchiveKey,
    DuplicateKeyError,
    NotFoundError,
)
from nnfabric.datastream import DatastreamError, StoreError
from nnfabric.engine import EngineError
from nnfabric.paradigm import (
    DescriptorError,
    descriptor_to_document,
    parse_descriptor,
    summarize_descriptor,
)
from nnfabric.registry import (
    AccessPolicy,
    Denial,
    DuplicateParadigmError,
    InvalidDescriptorError,
    InvalidSessionError,
    RegistryError,
    UnknownParadigmError,
)
from nnfabric.services.platform import Platform, PolicyDeniedError

log = logging.getLogger(__name__)

API_PREFIX = "/api/v1"
SESSION_HEADER = "X-Session-Id"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


_DOMAIN_ERRORS: list[tuple[type, int, str]] = [
    (InvalidSessionError, 401, "invalid_session"),
    (PolicyDeniedError, 403, "policy_denied"),
    (UnknownParadigmError, 404, "not_found"),
    (NotFoundError, 404, "not_found"),
    (DuplicateParadigmError, 409, "duplicate"),
    (DuplicateKeyError, 409, "duplicate"),
    (InvalidDescriptorError, 400, "invalid_descriptor"),
    (DescriptorError, 400, "invalid_descriptor"),
    (StoreError, 400, "store_error"),
    (DatastreamError, 400, "datastream_error"),
    (EngineError, 400, "engine_error"),
    (ArchiveError, 400, "archive_error"),
    (RegistryError, 400, "registry_error"),
    (ValueError, 400, "bad_request"),
]


class LoginRequest(BaseModel):
    user: str
    password: str


class PublishRequest(BaseModel):
    descriptor: dict
    policy: dict = Field(default_factory=lambda: {"mode": "public"})


class QueryRequest(BaseModel):
    query: str


class CreateNetworkRequest(BaseModel):
    paradigm_id: str
    layer_sizes: list[int]
    activation: str = "sigmoid"
    seed: int = 0


class TrainRequest(BaseModel):
    network_id: str
    datastream: dict
    params: dict
    kind: str = "train"
    result_key: str | None = None


class EvaluateRequest(BaseModel):
    result_key: str
    datastream: dict


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="nnfabric gateway", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        return _error_response(400, "bad_request", str(exc.errors()[:3]))

    # Most specific registered class wins, so subclass mappings like
    # DuplicateKeyError(ArchiveError) resolve before their parents.
    for error_type, status, code in _DOMAIN_ERRORS:
        def domain_handler(_request: Request, exc: Exception, status=status, code=code):
            return _error_response(status, code, str(exc))

        app.add_exception_handler(error_type, domain_handler)

    @app.exception_handler(Exception)
    async def internal_error_handler(_request: Request, exc: Exception):
        log.exception("unhandled gateway error")
        return _error_response(500, "internal", str(exc))

    def require_session(session_id: str | None):
        try:
            return platform.monitor.validate_session(session_id)
        except InvalidSessionError as exc:
            raise ApiError(401, "invalid_session", str(exc)) from exc

    # -- health and service table ------------------------------------------

    @app.get(f"{API_PREFIX}/health")
    def health() -> dict:
        return {
            "status": "up",
            "workers": len(platform.workers),
            "paradigms": len(platform.monitor.entries()),
        }

    @app.get(f"{API_PREFIX}/services")
    def services(session_id: str | None = Header(None, alias=SESSION_HEADER)) -> dict:
        require_session(session_id)
        return {
            "services": [
                {
                    "service_id": record.service_id,
                    "kind": record.kind,
                    "endpoint": record.endpoint,
                    "affinity": record.affinity,
                    "status": status,
                }
                for record, status in platform.monitor.services()
            ]
        }

    # -- sessions ----------------------------------------------------------

    @app.post(f"{API_PREFIX}/login")
    def login(body: LoginRequest) -> dict:
        outcome = platform.monitor.authenticate(body.user, body.password)
        if isinstance(outcome, Denial):
            raise ApiError(401, "denied", outcome.reason)
        return {
            "session_id": outcome.session_id,
            "user": outcome.user_id,
            "expires_at": outcome.expires_at,
        }

    # -- paradigms -----------------------------------------------------------

    @app.post(f"{API_PREFIX}/paradigms/publish")
    def publish(
        body: PublishRequest, session_id: str | None = Header(None, alias=SESSION_HEADER)
    ) -> dict:
        session = require_session(session_id)
        descriptor = parse_descriptor(json.dumps(body.descriptor))
        policy = AccessPolicy.from_document(body.policy)
        entry = platform.monitor.publish_paradigm(session.user_id, descriptor, policy)
        return {
            "paradigm_id": descriptor.id,
            "owner": entry.owner,
            "mode": entry.policy.mode,
            "replicated_to": sorted(entry.replicated_to),
        }

    @app.post(f"{API_PREFIX}/paradigms/query")
    def query_paradigms(
        body: QueryRequest, session_id: str | None = Header(None, alias=SESSION_HEADER)
    ) -> dict:
        session = require_session(session_id)
        columns, rows = platform.monitor.query_paradigms(session.session_id, body.query)
        return {"columns": columns, "rows": [list(row) for row in rows]}

    @app.get(f"{API_PREFIX}/paradigms/{{paradigm_id}}")
    def get_paradigm(
        paradigm_id: str, session_id: str | None = Header(None, alias=SESSION_HEADER)
    ) -> dict:
        session = require_session(session_id)
        entry = platform.monitor.get_entry(paradigm_id)
        if not platform.monitor.user_can_see(session.user_id, entry):
            raise ApiError(403, "policy_denied", f"not allowed on {paradigm_id!r}")
        return {
            "paradigm_id": paradigm_id,
            "owner": entry.owner,
            "mode": entry.policy.mode,
            "published_at": entry.published_at,
            "replicated_to": sorted(entry.replicated_to),
            "descriptor": descriptor_to_document(entry.descriptor),
            "summary": summarize_descriptor(entry.descriptor),
        }

    # -- networks ------------------------------------------------------------

    @app.post(f"{API_PREFIX}/networks/create")
    def create_network(
        body: CreateNetworkRequest, session_id: str | None = Header(None, alias=SESSION_HEADER)
    ) -> dict:
        session = require_session(session_id)
        network_id, key = platform.create_network(
            session, body.paradigm_id, body.layer_sizes, body.activation, body.seed
        )
        return {"network_id": network_id, "key": str(key)}

    # -- jobs -----------------------------------------------------------------

    @app.post(f"{API_PREFIX}/jobs/train")
    def submit_train(
        body: TrainRequest, session_id: str | None = Header(None, alias=SESSION_HEADER)
    ) -> dict:
        session = require_session(session_id)
        job = platform.submit_training_job(
            session, body.network_id, body.datastream, body.params, body.kind, body.result_key
        )
        return {"job_id": job.job_id}

    @app.post(f"{API_PREFIX}/jobs/evaluate")
    def submit_evaluate(
        body: EvaluateRequest, session_id: str | None = Header(None, alias=SESSION_HEADER)
    ) -> dict:
        session = require_session(session_id)
        job = platform.submit_evaluation_job(session, body.result_key, body.datastream)
        return {"job_id": job.job_id}

    @app.get(f"{API_PREFIX}/jobs/{{job_id}}/status")
    def job_status(
        job_id: str, session_id: str | None = Header(None, alias=SESSION_HEADER)
    ) -> dict:
        require_session(session_id)
        job = platform.scheduler.get_job(job_id)
        if job is None:
            raise ApiError(404, "not_found", f"unknown job {job_id!r}")
        return job.status().to_document()

    # -- archived results ------------------------------------------------------

    @app.get(f"{API_PREFIX}/results")
    def list_results(
        kind: str = "training_result",
        paradigm_id: str | None = None,
        owner: str | None = None,
        session_id: str | None = Header(None, alias=SESSION_HEADER),
    ) -> dict:
        require_session(session_id)
        entries = platform.archive.list(kind, owner=owner, paradigm_id=paradigm_id)
        return {
            "results": [
                {
                    "key": str(key),
                    "owner": meta.owner,
                    "created_at": meta.created_at,
                    "paradigm_id": meta.paradigm_id,
                    "parent": str(meta.parent) if meta.parent else None,
                }
                for key, meta in entries
            ]
        }

    @app.get(f"{API_PREFIX}/results/{{kind}}/{{entry_id}}")
    def get_result(
        kind: str,
        entry_id: str,
        session_id: str | None = Header(None, alias=SESSION_HEADER),
    ) -> dict:
        require_session(session_id)
        entry = platform.archive.get(ArchiveKey(kind, entry_id))
        return {
            "key": str(entry.key),
            "metadata": {
                "owner": entry.metadata.owner,
                "created_at": entry.metadata.created_at,
                "paradigm_id": entry.metadata.paradigm_id,
                "parent": str(entry.metadata.parent) if entry.metadata.parent else None,
            },
            "payload": json.loads(entry.payload),
        }

    # -- accounting -------------------------------------------------------------

    @app.get(f"{API_PREFIX}/ledger")
    def ledger(session_id: str | None = Header(None, alias=SESSION_HEADER)) -> dict:
        require_session(session_id)
        records = platform.monitor.ledger()
        return {
            "records": [record.to_document() for record in records],
            "total": platform.monitor.ledger_total(),
        }

    return app
