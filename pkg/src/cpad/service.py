"""HTTP facade over inference: load a checkpoint once, serve denoise/sweep."""

from __future__ import annotations

import base64
import binascii
import io
import logging
import os
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, Field

from . import metrics
from .camera import CameraParams, DEFAULT_RANGES
from .net import CPADNet, count_macs, count_params, denoise_image, load_checkpoint

MAX_BODY_BYTES = 32 * 1024 * 1024

log = logging.getLogger("cpad.service")


class ParamsIn(BaseModel):
    iso: float = Field(gt=0)
    shutter_speed: float = Field(gt=0)
    f_number: float | None = Field(default=None, gt=0)
    device_code: int | None = Field(default=None, ge=0)


class DenoiseIn(BaseModel):
    image: str  # base64 PNG
    params: ParamsIn
    return_residual: bool = False


class SweepIn(BaseModel):
    image: str
    params: ParamsIn
    axis: str
    grid: list[float] = Field(min_length=1)
    thumbnail: int = Field(default=128, ge=16, le=1024)


class BadImage(ValueError):
    pass


def _decode_png(b64: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (binascii.Error, UnidentifiedImageError, OSError, ValueError) as e:
        raise BadImage(str(e)) from None


def _encode_png(img: np.ndarray) -> str:
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    byte_img = np.round(arr * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(byte_img).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _to_params(p: ParamsIn) -> CameraParams:
    return CameraParams(
        iso=p.iso, shutter_speed=p.shutter_speed, f_number=p.f_number, device_code=p.device_code
    )


def create_app(model: CPADNet, ranges=DEFAULT_RANGES, static_dir=None) -> FastAPI:
    app = FastAPI(title="cpad denoise service")

    # the control panel may be served from a separate file server
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.middleware("http")
    async def limit_body(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > MAX_BODY_BYTES:
            return JSONResponse({"error": "body_too_large"}, status_code=413)
        return await call_next(request)

    @app.exception_handler(RequestValidationError)
    async def invalid_params(request: Request, exc: RequestValidationError):
        return JSONResponse({"error": "invalid_params", "detail": exc.errors()}, status_code=422)

    @app.exception_handler(BadImage)
    async def bad_image(request: Request, exc: BadImage):
        return JSONResponse({"error": "bad_image", "detail": str(exc)}, status_code=400)

    @app.exception_handler(ValueError)
    async def bad_value(request: Request, exc: ValueError):
        return JSONResponse({"error": "invalid_params", "detail": str(exc)}, status_code=422)

    @app.get("/healthz")
    async def healthz():
        return PlainTextResponse("ok")

    @app.get("/v1/model")
    async def model_info():
        cfg = model.config
        return {
            "config": cfg.to_dict(),
            "n_params": count_params(cfg),
            "macs": count_macs(cfg, 256, 256),
            "macs_resolution": 256,
        }

    @app.post("/v1/denoise")
    async def denoise(req: DenoiseIn):
        t0 = time.perf_counter()
        img = _decode_png(req.image)
        params = _to_params(req.params)
        out = denoise_image(model, img, params=params, ranges=ranges)
        v = model.encode_condition([params], ranges)
        resp = {
            "image": _encode_png(out),
            "metrics": {
                "tv_in": metrics.total_variation(img),
                "tv_out": metrics.total_variation(out),
                "residual_energy": metrics.residual_energy(out, img),
            },
            "condition_vector": np.asarray(v.data[0], dtype=np.float64).tolist(),
            "timing_ms": (time.perf_counter() - t0) * 1e3,
        }
        if req.return_residual:
            resp["residual"] = _encode_png(np.abs(out - img))
        return resp

    @app.post("/v1/sweep")
    async def sweep_endpoint(req: SweepIn):
        img = _decode_png(req.image)
        params = _to_params(req.params)
        records, outputs = metrics.sweep(
            model, img, params, req.axis, req.grid, ranges=ranges, return_outputs=True
        )
        steps = []
        for rec, out in zip(records, outputs):
            thumb = _thumbnail(out, req.thumbnail)
            steps.append({"param": rec.value, "thumbnail": thumb, "metrics": rec.to_dict()})
        return {"axis": req.axis, "steps": steps}

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")

    return app


def _thumbnail(img: np.ndarray, size: int) -> str:
    arr = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    im = Image.fromarray(arr)
    im.thumbnail((size, size))
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def serve(ckpt_path, port: int = 8700, bind: str = "127.0.0.1", static_dir=None):
    """Load the checkpoint and serve until interrupted."""
    import uvicorn

    level = os.environ.get("CPAD_LOG", "info").lower()
    logging.basicConfig(level=level.upper())
    model, meta = load_checkpoint(ckpt_path)
    log.info("loaded %s (meta=%s)", ckpt_path, meta)
    app = create_app(model, static_dir=static_dir)
    uvicorn.run(app, host=bind, port=port, log_level=level)
