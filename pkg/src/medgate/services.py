"""HTTP layer: the five cooperating services, all built from one app factory.

Separation is at the process/port level: ``medgate serve --kind <kind>``
starts one service. Resource services verify bearer tokens locally with the
shared signing secret and forward every audit event to the log service;
when that write fails, the triggering request fails too (fail-closed).

Request handling is stateless. The enforcement order on the query path is
fixed and observable in the audit trail: token check, then permission check,
then input guards, then execution. Every externally visible request on the
auth/catalog/query surface produces exactly one audit entry; ``/healthz``,
``/catalog/entrypoints`` and the internal ``/log/entries`` are
infrastructure and are not separately audited.

Error bodies are always ``{"code", "message"}`` with codes from the closed
set documented in the README.
"""

from __future__ import annotations

import hmac
import time
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Optional

import httpx
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .audit import ACTIONS, OUTCOMES, AuditLog
from .config import ServiceConfig, load_peer_secret, load_signing_key
from .errors import (
    AuditFailure,
    BadCredentials,
    BadParamFormat,
    BadSignature,
    BlockedInput,
    ExpiredToken,
    GatewayError,
    IoFailure,
    MalformedToken,
    MissingParam,
)
from .guard import GuardConfig
from .pipeline import audit_param_detail
from .queries import (
    HEALTH_RECORD_QUERIES,
    MEDICAL_RECORD_QUERIES,
    RESOURCE_OWNER,
    QueryContext,
    QueryRegistry,
    bind,
    build_registry,
    canonical_catalog,
    execute,
)
from .rbac import RbacState, check_permission, load_state, permitted_queries
from .records import ClinicalTables, load_tables
from .tokens import Claims, SigningKey, issue_token, verify_token
from .wire import CONTENT_TYPES, serialize


class AuditSink:
    """Destination for audit events; append must persist before returning."""

    def append(self, event: dict) -> int:
        raise NotImplementedError


class LocalAuditSink(AuditSink):
    def __init__(self, log: AuditLog):
        self.log = log

    def append(self, event: dict) -> int:
        try:
            return self.log.append(**event).seq
        except IoFailure as exc:
            raise AuditFailure(str(exc)) from exc


class RemoteAuditSink(AuditSink):
    def __init__(self, base_url: str, peer_secret: str, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.peer_secret = peer_secret
        self.client = client if client is not None else httpx.Client(timeout=5.0)

    def append(self, event: dict) -> int:
        try:
            resp = self.client.post(
                self.base_url + "/log/entries",
                json=event,
                headers={"X-Peer-Secret": self.peer_secret},
            )
        except httpx.HTTPError as exc:
            raise AuditFailure(f"log service unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise AuditFailure(f"log service refused entry: {resp.status_code}")
        return resp.json()["seq"]


@dataclass
class Runtime:
    """Everything a service holds after startup; immutable thereafter except
    the audit log itself."""

    kind: str
    audit_sink: AuditSink
    guard_cfg: GuardConfig = GuardConfig()
    signing_key: Optional[SigningKey] = None
    rbac_state: Optional[RbacState] = None
    tables: Optional[ClinicalTables] = None
    registry: Optional[QueryRegistry] = None
    audit_log: Optional[AuditLog] = None  # log service only
    peer_secret: str = ""
    peer_addresses: dict = field(default_factory=dict)
    token_ttl_seconds: int = 900
    token_leeway_seconds: int = 0
    reference_date: date = date(2018, 1, 1)
    clock: Callable[[], float] = time.time
    peer_client: httpx.Client | None = None

    def now_seconds(self) -> int:
        return int(self.clock())

    def now_millis(self) -> int:
        return int(self.clock() * 1000)


def build_runtime(cfg: ServiceConfig, clock: Callable[[], float] = time.time,
                  log_client: httpx.Client | None = None) -> Runtime:
    """Load key material, RBAC, and data from disk per the service kind."""
    kind = cfg.service_kind
    peer_secret = load_peer_secret(cfg.peer_secret_path) if cfg.peer_secret_path else ""
    if kind == "log":
        log = AuditLog(cfg.audit_log_path)
        return Runtime(
            kind=kind,
            audit_sink=LocalAuditSink(log),
            audit_log=log,
            peer_secret=peer_secret,
            guard_cfg=cfg.guard_config(),
            reference_date=cfg.reference_date,
            clock=clock,
        )

    sink = RemoteAuditSink(cfg.peer_addresses["log"], peer_secret, client=log_client)
    registry = None
    tables = None
    if kind == "catalog":
        registry = build_registry(guard_cfg=cfg.guard_config())
    elif kind in ("health_record", "medical_record"):
        owned = HEALTH_RECORD_QUERIES if kind == "health_record" else MEDICAL_RECORD_QUERIES
        defs = [d for d in canonical_catalog() if d.query_id in owned]
        registry = build_registry(defs, guard_cfg=cfg.guard_config())
        tables = load_tables(cfg.data_dir)
    return Runtime(
        kind=kind,
        audit_sink=sink,
        guard_cfg=cfg.guard_config(),
        signing_key=load_signing_key(cfg.signing_secret_path),
        rbac_state=load_state(cfg.rbac_path),
        tables=tables,
        registry=registry,
        peer_secret=peer_secret,
        peer_addresses=dict(cfg.peer_addresses),
        token_ttl_seconds=cfg.token_ttl_seconds,
        token_leeway_seconds=cfg.token_leeway_seconds,
        reference_date=cfg.reference_date,
        clock=clock,
        peer_client=httpx.Client(timeout=2.0),
    )


class _ApiFail(Exception):
    """Internal: maps a rejected request to its response and audit entry."""

    def __init__(self, status: int, code: str, message: str, action: str, detail: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.action = action
        self.detail = detail


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


class TokenRequest(BaseModel):
    username: str
    password: str


class LogEvent(BaseModel):
    timestamp: int
    principal: str
    jti: str
    action: str
    detail: str
    outcome: str


def _claims_from_request(rt: Runtime, request: Request) -> Claims:
    header = request.headers.get("authorization", "")
    if not header.startswith("Bearer "):
        raise _ApiFail(401, "malformed_token", "missing bearer token",
                       "token_rejected", "missing_authorization")
    token = header[len("Bearer "):]
    try:
        return verify_token(token, now=rt.now_seconds(), key=rt.signing_key,
                            leeway=rt.token_leeway_seconds)
    except MalformedToken:
        raise _ApiFail(401, "malformed_token", "token is malformed",
                       "token_rejected", "malformed_token") from None
    except BadSignature:
        raise _ApiFail(401, "bad_signature", "token signature is invalid",
                       "token_rejected", "bad_signature") from None
    except ExpiredToken:
        raise _ApiFail(401, "expired_token", "token has expired",
                       "token_rejected", "expired_token") from None


def build_app(rt: Runtime) -> FastAPI:
    app = FastAPI(title=f"medgate-{rt.kind}", docs_url=None, redoc_url=None, openapi_url=None)
    # the browser console runs on a different origin than the services
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["Authorization", "Content-Type"],
    )

    def audit(principal: str, jti: str, action: str, detail: str, outcome: str) -> None:
        rt.audit_sink.append({
            "timestamp": rt.now_millis(),
            "principal": principal,
            "jti": jti,
            "action": action,
            "detail": detail,
            "outcome": outcome,
        })

    @app.exception_handler(AuditFailure)
    async def _audit_failure(request: Request, exc: AuditFailure):
        return _error_response(500, "audit_failure", "audit log write failed")

    @app.exception_handler(GatewayError)
    async def _domain_error(request: Request, exc: GatewayError):
        return _error_response(500, "internal_error", "internal error")

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        if rt.kind == "auth" and request.url.path == "/auth/token":
            audit("anonymous", "", "auth_failure", "malformed_body", "error")
        return _error_response(400, "malformed_body", "request body is malformed")

    def _appendable(path) -> bool:
        try:
            with open(path, "a", encoding="utf-8"):
                return True
        except OSError:
            return False

    @app.get("/healthz")
    def healthz():
        sink = rt.audit_sink
        if rt.kind == "log":
            ok = _appendable(rt.audit_log.path)
        elif isinstance(sink, LocalAuditSink):
            ok = _appendable(sink.log.path)
        else:
            try:
                client = rt.peer_client if rt.peer_client is not None else sink.client
                base = rt.peer_addresses.get("log", sink.base_url)
                ok = client.get(base + "/healthz").status_code == 200
            except Exception:
                ok = False
        if ok:
            return {"status": "ok", "service_kind": rt.kind}
        return JSONResponse({"status": "unavailable", "service_kind": rt.kind}, status_code=503)

    if rt.kind == "auth":
        @app.post("/auth/token")
        def auth_token(body: TokenRequest):
            now = rt.now_seconds()
            try:
                token = issue_token(body.username, body.password, now,
                                    rt.token_ttl_seconds, rt.signing_key, rt.rbac_state)
            except BadCredentials:
                audit(body.username or "anonymous", "", "auth_failure",
                      "bad_credentials", "error")
                return _error_response(401, "bad_credentials", "bad credentials")
            claims = verify_token(token, now=now, key=rt.signing_key)
            audit(claims.sub, claims.jti, "auth_success",
                  f"ttl={rt.token_ttl_seconds}", "ok")
            return {"token": token, "expires_at": claims.exp}

    if rt.kind == "catalog":
        @app.get("/catalog/entrypoints")
        def entrypoints():
            return {"auth_token_url": rt.peer_addresses["auth"] + "/auth/token"}

        @app.get("/catalog/queries")
        def catalog_queries(request: Request):
            try:
                claims = _claims_from_request(rt, request)
            except _ApiFail as fail:
                audit("anonymous", "", fail.action, fail.detail, "error")
                return _error_response(fail.status, fail.code, fail.message)
            allowed = permitted_queries(rt.rbac_state, claims.roles)
            entries = []
            for defn in rt.registry.definitions():
                if defn.query_id not in allowed:
                    continue
                owner = RESOURCE_OWNER[defn.query_id]
                base = rt.peer_addresses.get(owner, "")
                entries.append({
                    "query_id": defn.query_id,
                    "description": defn.description,
                    "params": [{"name": n, "kind": k} for n, k in defn.params],
                    "url_path": f"{base}/query/{defn.query_id}",
                })
            audit(claims.sub, claims.jti, "catalog_view", f"entries={len(entries)}", "ok")
            return entries

    if rt.kind in ("health_record", "medical_record"):
        @app.get("/query/{query_id}")
        def run_query(query_id: str, request: Request):
            principal, jti = "anonymous", ""
            try:
                claims = _claims_from_request(rt, request)
                principal, jti = claims.sub, claims.jti
                if not check_permission(rt.rbac_state, claims.roles, query_id):
                    raise _ApiFail(403, "query_denied", "query not permitted for your roles",
                                   "query_denied", query_id)
                if query_id not in rt.registry:
                    raise _ApiFail(404, "unknown_query", "query not served here",
                                   "query_denied", f"{query_id}:unknown_query")
                fmt = request.query_params.get("format", "json")
                if fmt not in CONTENT_TYPES:
                    raise _ApiFail(400, "bad_param_format", "format must be json or xml",
                                   "input_blocked", f"{query_id}:format")
                raw = {k: v for k, v in request.query_params.items() if k != "format"}
                try:
                    bound = bind(rt.registry, query_id, raw, rt.guard_cfg)
                except BlockedInput as exc:
                    raise _ApiFail(422, "input_blocked", f"parameter {exc.param!r} blocked",
                                   "input_blocked",
                                   f"{query_id}:{exc.param}:{exc.reason}") from None
                except MissingParam as exc:
                    raise _ApiFail(400, "missing_param", f"parameter {exc.param!r} is required",
                                   "input_blocked", f"{query_id}:{exc.param}:missing") from None
                except BadParamFormat as exc:
                    raise _ApiFail(400, "bad_param_format", f"parameter {exc.param!r} has a bad format",
                                   "input_blocked", f"{query_id}:{exc.param}:format") from None
                result = execute(bound, rt.tables, QueryContext(rt.reference_date))
                body = serialize(result, fmt)
            except _ApiFail as fail:
                audit(principal, jti, fail.action, fail.detail, "error")
                return _error_response(fail.status, fail.code, fail.message)
            audit(principal, jti, "query_execute",
                  f"{query_id} {audit_param_detail(bound.definition, bound.bindings)}", "ok")
            return Response(content=body, media_type=CONTENT_TYPES[fmt])

    if rt.kind == "log":
        @app.post("/log/entries")
        def log_entries(body: LogEvent, request: Request):
            secret = request.headers.get("x-peer-secret", "")
            if not hmac.compare_digest(secret.encode(), rt.peer_secret.encode()):
                return _error_response(401, "bad_peer_secret", "peer secret mismatch")
            if body.action not in ACTIONS or body.outcome not in OUTCOMES:
                return _error_response(400, "malformed_body", "unknown action or outcome")
            try:
                entry = rt.audit_log.append(
                    timestamp=body.timestamp, principal=body.principal, jti=body.jti,
                    action=body.action, detail=body.detail, outcome=body.outcome,
                )
            except IoFailure:
                return _error_response(503, "log_unavailable", "audit log write failed")
            return {"seq": entry.seq}

    return app


def serve(cfg: ServiceConfig) -> None:
    """Blocking server loop for one service kind."""
    import uvicorn

    rt = build_runtime(cfg)
    app = build_app(rt)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
