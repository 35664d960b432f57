"""HTTP surface: /v1/objdet, /v1/ocr, /v1/vqa, /v1/health.

Images travel as base64 PNG/JPEG. All boxes in responses are normalized xyxy
in [0, 1]; closeness is the median inverse-depth inside the detection box
after per-image min-max rescaling, so larger means nearer to the camera.
"""

from __future__ import annotations

import base64
import binascii
import io
import unicodedata
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, Field

from .config import ServiceConfig
from .builtin import median_in_box
from .registry import ModelLoadError, ModelRegistry, load_registry


class ObjDetRequest(BaseModel):
    image: str
    query: str
    box_threshold: float = Field(default=0.35, ge=0.0, le=1.0)


class OcrRequest(BaseModel):
    image: str


class VqaRequest(BaseModel):
    image: str
    question: str
    choices: list[str]


def _decode_image(b64: str, max_bytes: int) -> np.ndarray:
    try:
        data = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(status_code=400, detail="image is not valid base64")
    if len(data) > max_bytes:
        raise HTTPException(
            status_code=413,
            detail={"error": "image too large", "limit_bytes": max_bytes},
        )
    try:
        img = Image.open(io.BytesIO(data))
        img = img.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError):
        raise HTTPException(status_code=400, detail="image bytes cannot be decoded")
    return np.asarray(img, dtype=np.uint8)


def _normalize_answer(text: str) -> str:
    folded = unicodedata.normalize("NFKC", text).casefold()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in folded)
    return " ".join(cleaned.split())


def _registry(request: Request) -> ModelRegistry:
    registry = getattr(request.app.state, "registry", None)
    if registry is None:
        raise HTTPException(status_code=503, detail="service is starting")
    return registry


def _model(request: Request, slot: str):
    registry = _registry(request)
    if not registry.ready(slot):
        raise HTTPException(status_code=503, detail=f"{slot} model not loaded")
    return getattr(registry, slot)


def _clip01(v: float) -> float:
    return min(1.0, max(0.0, v))


def create_app(config: ServiceConfig | None = None, *, require_all: bool = True,
               registry: ModelRegistry | None = None) -> FastAPI:
    cfg = config if config is not None else ServiceConfig()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if registry is not None:
            app.state.registry = registry
        else:
            app.state.registry = load_registry(cfg, require_all=require_all)
        yield

    app = FastAPI(title="perception service", lifespan=lifespan)

    @app.post("/v1/objdet")
    def objdet(body: ObjDetRequest, request: Request) -> dict:
        if not body.query.strip():
            raise HTTPException(status_code=422, detail="query must be non-empty")
        detector = _model(request, "detector")
        depth = _model(request, "depth")
        image = _decode_image(body.image, cfg.max_image_bytes)
        h, w = image.shape[:2]

        inv = np.asarray(depth.inverse_depth(image), dtype=np.float64)
        lo, hi = float(inv.min()), float(inv.max())
        scaled = (inv - lo) / (hi - lo) if hi > lo else np.zeros_like(inv)

        detections = []
        for det in detector.detect(image, body.query):
            if det["confidence"] < body.box_threshold:
                continue
            x1, y1, x2, y2 = det["box"]
            closeness = median_in_box(scaled, (x1, y1, x2, y2))
            detections.append({
                "box": [
                    _clip01(x1 / w), _clip01(y1 / h),
                    _clip01(x2 / w), _clip01(y2 / h),
                ],
                "label": body.query,
                "confidence": _clip01(float(det["confidence"])),
                "closeness": round(_clip01(closeness), 6),
            })
        detections.sort(key=lambda d: (-d["confidence"], d["box"]))
        return {"detections": detections}

    @app.post("/v1/ocr")
    def ocr(body: OcrRequest, request: Request) -> dict:
        engine = _model(request, "ocr")
        image = _decode_image(body.image, cfg.max_image_bytes)
        h, w = image.shape[:2]
        tokens = []
        for tok in engine.read(image):
            x1, y1, x2, y2 = tok["box"]
            tokens.append({
                "text": tok["text"],
                "box": [
                    _clip01(x1 / w), _clip01(y1 / h),
                    _clip01(x2 / w), _clip01(y2 / h),
                ],
                "confidence": _clip01(float(tok["confidence"])),
            })
        return {"tokens": tokens}

    @app.post("/v1/vqa")
    def vqa(body: VqaRequest, request: Request) -> dict:
        if len(body.choices) < 2:
            raise HTTPException(status_code=422, detail="need at least two choices")
        normed = [_normalize_answer(c) for c in body.choices]
        if len(set(normed)) != len(normed):
            raise HTTPException(status_code=422, detail="choices must be distinct")
        model = _model(request, "vqa")
        image = _decode_image(body.image, cfg.max_image_bytes)
        raw = model.answer(image, body.question, list(body.choices))
        raw_norm = _normalize_answer(raw)
        for choice in body.choices:
            if _normalize_answer(choice) == raw_norm:
                return {"answer": choice, "raw": raw, "projected": True}
        return {"answer": body.choices[0], "raw": raw, "projected": False}

    @app.get("/v1/health")
    def health(request: Request):
        registry = getattr(request.app.state, "registry", None)
        if registry is None:
            raise HTTPException(status_code=503, detail={"status": "starting"})
        status = "ok" if registry.all_ready() else "degraded"
        return {"status": status, "models": registry.status()}

    return app



__all__ = ["create_app", "ModelLoadError", "ServiceConfig"]
