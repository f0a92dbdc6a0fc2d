"""HTTP JSON scoring service.

POST /v1/assess   body: patient JSON mirroring the cohort CSV schema
                  (tri-state symptoms as true/false/null); returns a
                  TriageDecision document.
GET  /v1/model    model identity, feature order, band policy, region table.
GET  /healthz     liveness.

Errors are JSON {code, field, message}: 400 for validation, 503 while no
model is loaded.  The engine holds an immutable model snapshot; hot reload
swaps the reference atomically, so concurrent requests see old or new,
never a mix.
"""

from __future__ import annotations

import json
from typing import Optional

from starlette.applications import Starlette
from starlette.requests import Request
from starlette.responses import JSONResponse, Response
from starlette.routing import Route

from .cohort import DISEASES, DISEASE_MAX, PatientRecord, SYMPTOMS, validate_record
from .errors import ValidationError
from .features import load_region_table
from .gbdt import TreeEnsemble
from .triage import BandPolicy, assess

_ALLOWED_KEYS = frozenset(
    ["id", "sex", "age", "latitude", "longitude", "body_temp", "onset_month",
     *SYMPTOMS, *DISEASES, "outcome"])


def parse_record_payload(payload: dict) -> PatientRecord:
    """Strict JSON-body validation; raises ValidationError naming the field."""
    if not isinstance(payload, dict):
        raise ValidationError("body", "request body must be a JSON object")
    for key in payload:
        if key not in _ALLOWED_KEYS:
            raise ValidationError(key, "unknown field")

    def need(name, types, required=True, default=None):
        if name not in payload or payload[name] is None:
            if required:
                raise ValidationError(name, "field is required")
            return default
        v = payload[name]
        if isinstance(v, bool) and bool not in types:
            raise ValidationError(name, f"expected {types}, got a boolean")
        if not isinstance(v, types if isinstance(types, tuple) else (types,)):
            raise ValidationError(name, f"must be of type {types}")
        return v

    sex = need("sex", str)
    age = need("age", int)
    lat = float(need("latitude", (int, float)))
    long_ = float(need("longitude", (int, float)))
    temp = need("body_temp", (int, float), required=False)
    month = need("onset_month", int)

    symptoms = {}
    for name in SYMPTOMS:
        v = payload.get(name)
        if v is not None and not isinstance(v, bool):
            raise ValidationError(name, "must be true, false or null")
        symptoms[name] = v

    diseases = {}
    for name in DISEASES:
        v = payload.get(name, 0)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValidationError(name, "must be a non-negative integer")
        diseases[name] = v

    rec = PatientRecord(
        id=str(payload.get("id") or "anonymous"),
        sex=sex, age=age, latitude=lat, longitude=long_,
        body_temp=None if temp is None else float(temp),
        onset_month=month, **symptoms, **diseases,
        outcome=None,
    )
    validate_record(rec)
    return rec


class ScoringEngine:
    """Shared immutable model snapshot plus serving policy."""

    def __init__(self, model: Optional[TreeEnsemble], policy: BandPolicy = BandPolicy(),
                 regions: Optional[dict] = None, top_k: int = 5):
        self._model = model
        self.policy = policy
        self.regions = load_region_table() if regions is None else regions
        self.top_k = top_k

    @property
    def model(self) -> Optional[TreeEnsemble]:
        return self._model

    def swap_model(self, model: Optional[TreeEnsemble]) -> None:
        self._model = model  # single reference assignment: atomic under the GIL

    def warmup(self) -> None:
        """Trigger kernel compilation so first requests are not slow."""
        model = self._model
        if model is None:
            return
        from .cohort import generate_cohort, CohortSpec
        rec = generate_cohort(CohortSpec(n=1, seed=0))[0]
        assess(rec, model, self.policy, k=self.top_k)


def _error(status: int, code: str, message: str, field: Optional[str] = None) -> JSONResponse:
    return JSONResponse({"code": code, "field": field, "message": message}, status_code=status)


def create_app(engine: ScoringEngine) -> Starlette:
    async def assess_endpoint(request: Request) -> Response:
        model = engine.model
        if model is None:
            return _error(503, "model-unloaded", "no model is loaded")
        try:
            payload = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            return _error(400, "validation", f"invalid JSON: {exc}", field="body")
        try:
            record = parse_record_payload(payload)
            decision = assess(record, model, engine.policy, k=engine.top_k)
        except ValidationError as exc:
            return _error(400, "validation", str(exc), field=exc.field)
        return JSONResponse(decision.to_dict())

    async def model_endpoint(request: Request) -> Response:
        model = engine.model
        if model is None:
            return _error(503, "model-unloaded", "no model is loaded")
        return JSONResponse({
            "version": model.version,
            "model_digest": model.digest(),
            "feature_names": list(model.feature_names),
            "policy": {"low_cut": engine.policy.low_cut, "high_cut": engine.policy.high_cut},
            "regions": [
                {"code": code, "latitude": lat, "longitude": long_}
                for code, (lat, long_) in sorted(engine.regions.items())
            ],
        })

    async def healthz(request: Request) -> Response:
        return JSONResponse({"status": "ok", "model_loaded": engine.model is not None})

    return Starlette(routes=[
        Route("/v1/assess", assess_endpoint, methods=["POST"]),
        Route("/v1/model", model_endpoint, methods=["GET"]),
        Route("/healthz", healthz, methods=["GET"]),
    ])
