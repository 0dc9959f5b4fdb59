"""HTTP facade: list engines, describe their parameters, and dispatch generate calls."""

from __future__ import annotations

import asyncio
import json
import logging
import os
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from starlette.exceptions import HTTPException as StarletteHTTPException

from .engines import EngineRegistry, GenerateRequest, default_registry
from .errors import (
    ConfigurationError,
    EngineNotFoundError,
    InvalidMapError,
    InvalidNameError,
    ParameterError,
    ParseError,
    ProviderError,
    TransportError,
)
from .graph import CausalMap

log = logging.getLogger(__name__)

API_PREFIX = "/api/v1"
MAX_BODY_BYTES = 1024 * 1024
DEFAULT_ADDR = "127.0.0.1:8080"
TIMEOUT_MARGIN = 5.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"status": self.status, "code": self.code, "message": self.message},
        )


class _Variable(BaseModel):
    name: str


class _Relationship(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    source: str = Field(alias="from")
    target: str = Field(alias="to")
    polarity: str
    reasoning: Optional[str] = None


class _WireMap(BaseModel):
    variables: list[_Variable] = []
    relationships: list[_Relationship]


class GenerateBody(BaseModel):
    prompt: str
    problemStatement: Optional[str] = None
    backgroundKnowledge: Optional[str] = None
    currentModel: Optional[_WireMap] = None
    parameters: dict[str, Any] = {}

    @field_validator("prompt")
    @classmethod
    def _prompt_not_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("prompt must not be blank")
        return value


def _to_request(body: GenerateBody, raw: dict[str, Any]) -> GenerateRequest:
    current = None
    if body.currentModel is not None:
        try:
            current = CausalMap.from_wire(raw["currentModel"])
        except (InvalidNameError, InvalidMapError, ValueError) as exc:
            raise ApiError(400, "bad_request", f"invalid currentModel: {exc}") from None
    return GenerateRequest(
        prompt=body.prompt,
        problem_statement=body.problemStatement,
        background_knowledge=body.backgroundKnowledge,
        current_map=current,
        parameters=body.parameters,
    )


def _default_timeout(registry: EngineRegistry) -> float:
    timeouts = [
        registry.get(name).provider.timeout
        for name in registry.names()
        if hasattr(registry.get(name), "provider")
    ]
    return max(timeouts, default=60.0) + TIMEOUT_MARGIN


def create_app(registry: EngineRegistry | None = None, *, request_timeout: float | None = None) -> FastAPI:
    registry = default_registry() if registry is None else registry
    timeout = request_timeout if request_timeout is not None else _default_timeout(registry)
    app = FastAPI(title="sd-eval engine service", version="1")
    app.state.registry = registry

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError) -> JSONResponse:
        return exc.response()

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException) -> JSONResponse:
        code = {404: "not_found", 405: "method_not_allowed"}.get(exc.status_code, "http_error")
        return ApiError(exc.status_code, code, str(exc.detail)).response()

    @app.exception_handler(Exception)
    async def _unexpected(request: Request, exc: Exception) -> JSONResponse:
        log.exception("unhandled error")
        return ApiError(500, "internal_error", f"{type(exc).__name__}: {exc}").response()

    def lookup(name: str):
        try:
            return registry.get(name)
        except EngineNotFoundError as exc:
            raise ApiError(404, "engine_not_found", str(exc)) from None

    @app.get(f"{API_PREFIX}/engines")
    def engines() -> dict[str, Any]:
        return {"engines": [{"name": name} for name in registry.names()]}

    @app.get(f"{API_PREFIX}/engines/{{name}}/parameters")
    def parameters(name: str) -> dict[str, Any]:
        engine = lookup(name)
        return {"parameters": [p.to_wire() for p in engine.parameters()]}

    @app.post(f"{API_PREFIX}/engines/{{name}}/generate")
    async def generate(name: str, request: Request) -> JSONResponse:
        engine = lookup(name)
        declared = request.headers.get("content-length")
        if declared is not None and declared.isdigit() and int(declared) > MAX_BODY_BYTES:
            raise ApiError(413, "payload_too_large", f"request body exceeds {MAX_BODY_BYTES} bytes")
        raw_bytes = await request.body()
        if len(raw_bytes) > MAX_BODY_BYTES:
            raise ApiError(413, "payload_too_large", f"request body exceeds {MAX_BODY_BYTES} bytes")
        try:
            raw = json.loads(raw_bytes)
        except ValueError as exc:
            raise ApiError(400, "bad_request", f"body is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ApiError(400, "bad_request", "body must be a JSON object")
        try:
            body = GenerateBody.model_validate(raw)
        except ValidationError as exc:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
            )
            raise ApiError(400, "bad_request", problems) from None
        gen_request = _to_request(body, raw)

        try:
            result = await asyncio.wait_for(run_in_threadpool(engine.generate, gen_request), timeout)
        except asyncio.TimeoutError:
            raise ApiError(504, "timeout", f"engine did not answer within {timeout:g}s") from None
        except ParameterError as exc:
            raise ApiError(400, "bad_request", str(exc)) from None
        except ParseError as exc:
            raise ApiError(502, "malformed_model", str(exc)) from None
        except (TransportError, ProviderError, ConfigurationError) as exc:
            raise ApiError(502, "provider_error", str(exc)) from None

        content: dict[str, Any] = {"model": result.map.to_wire()}
        if result.usage:
            content["supportingInfo"] = {"usage": dict(result.usage)}
        return JSONResponse(content)

    return app


def parse_addr(addr: str | None) -> tuple[str, int]:
    addr = addr or os.environ.get("SD_EVAL_ADDR") or DEFAULT_ADDR
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigurationError(f"address must look like HOST:PORT, got {addr!r}")
    return host or "127.0.0.1", int(port)


def serve(addr: str | None = None, registry: EngineRegistry | None = None) -> None:
    import uvicorn

    host, port = parse_addr(addr)
    uvicorn.run(create_app(registry), host=host, port=port)
