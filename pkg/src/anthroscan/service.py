"""HTTP estimation service.

Endpoints (HTTP/1.1 + JSON, multipart for the image upload):

* POST /api/v1/estimate               - run the pipeline, persist the record
* POST /api/v1/records/{id}/plan      - build + persist a nutrition plan
* GET  /api/v1/records/{id}           - stored record, response and plans
* GET  /api/v1/health                 - liveness
* POST /api/v1/admin/reload           - hot-swap model params (token-guarded)

Error bodies are always {"stage", "code", "message"} plus optional
"details".
"""

from __future__ import annotations

import os

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, Response

from . import __version__
from .config import PipelineConfig
from .errors import (AnthroscanError, ConfigurationError, ContractError,
                     DataError, FormatError, IngestionError, NoSubjectError,
                     NumericError, ParameterError, PlanInfeasibleError,
                     ProviderError, StorageError, TopologyError, TrainingError)
from .fusion import load_params_file
from .pipeline import Pipeline, canonical_json_bytes
from .store import RecordStore

ADMIN_TOKEN_ENV = "ANTHROSCAN_ADMIN_TOKEN"

_STATUS_BY_TYPE = (
    (PlanInfeasibleError, 422),
    (NoSubjectError, 422),
    (ProviderError, 502),
    (ContractError, 502),
    (TopologyError, 502),
    (TrainingError, 500),
    (NumericError, 500),
    (StorageError, 500),
    (ConfigurationError, 503),
    (FormatError, 500),
    (IngestionError, 400),
    (DataError, 422),
    (ParameterError, 422),
)


def _error_response(exc: AnthroscanError, status: int | None = None) -> JSONResponse:
    if status is None:
        status = 500
        for etype, code in _STATUS_BY_TYPE:
            if isinstance(exc, etype):
                status = code
                break
        if isinstance(exc, ParameterError) and exc.stage == "decode":
            status = 400
    body = {"stage": exc.stage, "code": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, PlanInfeasibleError):
        body["details"] = {"min_weeks": exc.min_weeks}
    return JSONResponse(status_code=status, content=body)


def _validation_error(message: str, missing=None) -> JSONResponse:
    body = {"stage": "validation", "code": "ParameterError", "message": message}
    if missing:
        body["details"] = {"missing": missing}
    return JSONResponse(status_code=422, content=body)


class ServiceRuntime:
    """Holds the hot-swappable pipeline and the record store."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.pipeline = Pipeline.from_config(config)
        self.store = RecordStore(config.resolve(config.store_dir))

    def reload_params(self) -> str:
        params = load_params_file(self.config.resolve(self.config.params_path))
        self.pipeline = Pipeline(self.config, params,
                                 self.pipeline.calibrations)
        return self.pipeline.params_digest


def create_app(config: PipelineConfig) -> FastAPI:
    app = FastAPI(title="anthroscan", version="1")
    runtime = ServiceRuntime(config)
    app.state.runtime = runtime

    @app.exception_handler(AnthroscanError)
    async def _handle_domain_error(request: Request, exc: AnthroscanError):
        return _error_response(exc)

    @app.get("/api/v1/health")
    async def health():
        return {"status": "ok", "pipeline_version": __version__,
                "params_digest": runtime.pipeline.params_digest}

    @app.post("/api/v1/estimate")
    async def estimate(image: UploadFile | None = File(default=None),
                       age_years: float | None = Form(default=None),
                       gender: str | None = Form(default=None),
                       device_id: str | None = Form(default=None)):
        missing = [name for name, value in
                   (("image", image), ("age_years", age_years), ("gender", gender))
                   if value is None]
        if missing:
            return _validation_error(
                f"missing required field(s): {', '.join(missing)}", missing)
        payload = await image.read()
        pipeline = runtime.pipeline
        response = pipeline.estimate(payload, age_years, gender, device_id)
        digest = runtime.store.put_image(payload)
        runtime.store.put_estimate(response, {
            "age_years": response["age_years"],
            "gender": response["gender"],
            "device_id": response["device_id"],
            "filename": image.filename or "",
        }, digest)
        return Response(content=canonical_json_bytes(response),
                        media_type="application/json")

    @app.post("/api/v1/records/{record_id}/plan")
    async def plan(record_id: str, body: dict):
        if not runtime.store.has(record_id):
            return JSONResponse(status_code=404, content={
                "stage": "storage", "code": "NotFound",
                "message": f"no record {record_id!r}"})
        missing = [k for k in ("diet_type", "weeks") if k not in body]
        if missing:
            return _validation_error(
                f"missing required field(s): {', '.join(missing)}", missing)
        weeks = body["weeks"]
        if not isinstance(weeks, int) or weeks < 1:
            return _validation_error(f"weeks must be a positive integer, got {weeks!r}")
        stored = runtime.store.get(record_id)
        plan_payload = runtime.pipeline.plan_for_response(
            stored["response"], body["diet_type"], weeks,
            body.get("activity_level", "sedentary"))
        runtime.store.put_plan(record_id, plan_payload)
        return Response(content=canonical_json_bytes(plan_payload),
                        media_type="application/json")

    @app.get("/api/v1/records/{record_id}")
    async def get_record(record_id: str):
        try:
            stored = runtime.store.get(record_id)
        except KeyError:
            return JSONResponse(status_code=404, content={
                "stage": "storage", "code": "NotFound",
                "message": f"no record {record_id!r}"})
        return Response(content=canonical_json_bytes(stored),
                        media_type="application/json")

    @app.post("/api/v1/admin/reload")
    async def reload_params(request: Request):
        expected = os.environ.get(ADMIN_TOKEN_ENV, "")
        token = request.headers.get("x-admin-token", "")
        if not expected or token != expected:
            return JSONResponse(status_code=401, content={
                "stage": "admin", "code": "Unauthorized",
                "message": "missing or invalid admin token"})
        digest = runtime.reload_params()
        return {"status": "reloaded", "params_digest": digest}

    return app


def create_app_from_file(config_path) -> FastAPI:
    return create_app(PipelineConfig.from_file(config_path))
