"""Minimal HTTP issuer/verifier over a workspace.

Request and response bodies mirror the CLI's ``--json`` output. The service
itself is unauthenticated: it only exposes the mechanisms under test.
Status codes: 200 success, 400 malformed body, 422 well-formed request whose
verification failed, 500 anything unexpected.
"""

from __future__ import annotations

import json
import time

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import workspace as ops
from .errors import ToolkitError
from .ledger import DEFAULT_CHANNEL


class BadBody(Exception):
    pass


async def _body(request: Request) -> dict:
    try:
        doc = json.loads(await request.body())
    except ValueError:
        raise BadBody("body is not JSON") from None
    if not isinstance(doc, dict):
        raise BadBody("body must be a JSON object")
    return doc


def _field(doc: dict, name: str, kind=str, default=..., nullable=False):
    if name not in doc:
        if default is ...:
            raise BadBody(f"missing field {name!r}")
        return default
    value = doc[name]
    if value is None and nullable:
        return None
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise BadBody(f"field {name!r} has the wrong type")
    return value


def _now(doc: dict) -> int:
    now = _field(doc, "now", int, None, nullable=True)
    return int(time.time()) if now is None else now


def _verdict_response(result: dict) -> JSONResponse:
    return JSONResponse(result, status_code=200 if result["valid"] else 422)


def create_app(ws: ops.Workspace) -> FastAPI:
    app = FastAPI(title="triauth", docs_url=None, redoc_url=None)

    @app.exception_handler(BadBody)
    async def _bad_body(request, exc):
        return JSONResponse({"error": "malformed body", "message": str(exc)}, status_code=400)

    @app.exception_handler(ToolkitError)
    async def _refused(request, exc):
        return JSONResponse({"valid": False, "reasons": [exc.reason]}, status_code=422)

    @app.get("/healthz")
    async def healthz():
        return PlainTextResponse("ok")

    @app.post("/token")
    async def issue_token(request: Request):
        doc = await _body(request)
        scopes = _field(doc, "scopes", list)
        if not all(isinstance(s, str) for s in scopes):
            raise BadBody("scopes must be strings")
        return ops.token_issue(ws, _field(doc, "sub"), scopes, _now(doc),
                               _field(doc, "ttl", int, None, nullable=True),
                               _field(doc, "aud", str, None, nullable=True),
                               bool(_field(doc, "with_refresh", bool, False)))

    @app.post("/token/verify")
    async def verify_token(request: Request):
        doc = await _body(request)
        return _verdict_response(ops.token_verify(ws, _field(doc, "token"), _now(doc),
                                                  _field(doc, "aud", str, None, nullable=True)))

    @app.post("/vc/verify")
    async def verify_presentation(request: Request):
        doc = await _body(request)
        pres = _field(doc, "presentation", dict)
        return _verdict_response(ops.vc_verify(ws, pres, _field(doc, "challenge"), _now(doc)))

    @app.post("/cert/verify")
    async def verify_certificate(request: Request):
        doc = await _body(request)
        return _verdict_response(ops.cert_verify(
            ws, _field(doc, "id"), _field(doc, "name"), _field(doc, "program"),
            _field(doc, "graduation_date"), _field(doc, "gpa"),
            _field(doc, "channel", str, DEFAULT_CHANNEL), _field(doc, "reader", str, None, nullable=True)))

    @app.post("/bridge/verify")
    async def verify_bridge(request: Request):
        doc = await _body(request)
        return _verdict_response(ops.bridge_verify(
            ws, _field(doc, "jwt"), _field(doc, "issuer_key", str, ws.config["issuer_key"]),
            _field(doc, "channel", str, DEFAULT_CHANNEL), _field(doc, "reader", str, None, nullable=True)))

    return app


def serve(ws: ops.Workspace, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(ws), host=host, port=port)
