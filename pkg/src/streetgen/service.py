"""HTTP inference service for interactive street-network generation.

Loads a trained generator checkpoint once and serves stateless
/generate requests: context rasters + mask + user junction nodes +
pattern strokes in, composited street raster out. Rasters travel as
base64 16-bit grayscale PNG inside JSON; a raw binary endpoint accepts
whole patch records for bulk evaluation.
"""

from __future__ import annotations

import base64
import hashlib
import io
import time
from pathlib import Path
from typing import Any, Optional

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request, Response
from PIL import Image
from pydantic import BaseModel, Field

from . import storage
from .geometry import PATTERN_LEGEND, PatternType, pattern_code_table
from .networks import (
    CONDITION_CHANNELS,
    Generator,
    GeneratorSpec,
    composite,
    input_stack,
    load_param_arrays,
)
from .rasterize import MultiChannelMap
from .sampling import Mask, PatchSample, load_record, make_noise_channel, render_junctions


# ---------------------------------------------------------------------------
# Raster codecs
# ---------------------------------------------------------------------------


def encode_png16(array: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> str:
    """[lo, hi] floats -> base64 16-bit grayscale PNG."""
    arr = np.asarray(array, dtype=np.float64)
    if hi <= lo:
        raise ValueError(f"invalid raster range [{lo}, {hi}]")
    scaled = np.clip((arr - lo) / (hi - lo), 0.0, 1.0)
    u16 = np.round(scaled * 65535).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(u16).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_png16(b64: str, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    raw = base64.b64decode(b64)
    img = Image.open(io.BytesIO(raw))
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"raster PNG must be single-channel, got shape {arr.shape}")
    return (lo + (hi - lo) * arr / 65535.0).astype(np.float32)


def encode_png8(array: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(array, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_png8(b64: str) -> np.ndarray:
    raw = base64.b64decode(b64)
    arr = np.asarray(Image.open(io.BytesIO(raw)), dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"mask PNG must be single-channel, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Request / response schema
# ---------------------------------------------------------------------------


class ScaledRaster(BaseModel):
    png: str
    lo: float = 0.0
    hi: float = 1.0


class PatternStroke(BaseModel):
    pattern: str
    polygon: Optional[list[tuple[float, float]]] = None  # (row, col) vertices
    raster: Optional[str] = None  # base64 8-bit PNG, nonzero where painted


class ContextRasters(BaseModel):
    streets: str  # base64 16-bit PNG in [0, 1]
    elevation: ScaledRaster
    aspect: ScaledRaster


class MapReference(BaseModel):
    origin: tuple[int, int]
    size: int


class GenerationRequest(BaseModel):
    mask: str  # base64 8-bit PNG, nonzero = generation region
    context: Optional[ContextRasters] = None
    map_ref: Optional[MapReference] = None
    junctions: list[tuple[int, int]] = Field(default_factory=list)
    pattern_strokes: list[PatternStroke] = Field(default_factory=list)
    model_level: Optional[int] = None
    seed: int = 0


class GenerationResponse(BaseModel):
    composite: str
    raw_output: str
    elapsed_ms: float
    request_hash: str
    model_level: int
    seed: int


# ---------------------------------------------------------------------------
# Request assembly
# ---------------------------------------------------------------------------


def _fill_polygon_pixels(polygon: list[tuple[float, float]], shape) -> np.ndarray:
    """Pixel-center fill of a polygon given in (row, col) coordinates."""
    from .geometry import Polygon2D

    poly = Polygon2D(tuple((float(c), float(r)) for r, c in polygon))
    rows, cols = np.meshgrid(
        np.arange(shape[0]) + 0.5, np.arange(shape[1]) + 0.5, indexing="ij"
    )
    return poly.contains(cols, rows)


class GeneratorService:
    """Checkpointed generator plus request validation/assembly logic."""

    def __init__(self, checkpoint_path, map_path=None):
        params, specs, meta = storage.load_checkpoint(checkpoint_path)
        if "generator" not in specs or "generator" not in params:
            raise ValueError(f"checkpoint {checkpoint_path} has no generator network")
        self.spec = GeneratorSpec.from_json(specs["generator"])
        self.model_level = int(meta["model_level"])
        self.meta = meta
        self.generator = load_param_arrays(Generator(self.spec), params["generator"])
        self.generator.eval()
        self.checkpoint_hash = storage.file_sha256(checkpoint_path)
        self.map = MultiChannelMap.load(map_path) if map_path else None

    # -- validation helpers ------------------------------------------------

    def resolve_context(self, request: GenerationRequest):
        if request.context is not None:
            streets = decode_png16(request.context.streets)
            elev = decode_png16(
                request.context.elevation.png,
                request.context.elevation.lo,
                request.context.elevation.hi,
            )
            aspect = decode_png16(
                request.context.aspect.png,
                request.context.aspect.lo,
                request.context.aspect.hi,
            )
            return streets, elev, aspect
        if request.map_ref is not None:
            if self.map is None:
                raise RequestError("service was started without a map; send inline rasters")
            r0, c0 = request.map_ref.origin
            s = request.map_ref.size
            h, w = self.map.shape
            if not (0 <= r0 <= h - s and 0 <= c0 <= w - s):
                raise RequestError(
                    f"map window origin {request.map_ref.origin} size {s} exceeds "
                    f"map bounds {(h, w)}"
                )
            return (
                self.map["streets"][r0 : r0 + s, c0 : c0 + s].astype(np.float32),
                self.map["elevation"][r0 : r0 + s, c0 : c0 + s].astype(np.float32),
                self.map["aspect"][r0 : r0 + s, c0 : c0 + s].astype(np.float32),
            )
        raise RequestError("request needs either inline context rasters or a map_ref")

    def assemble(self, request: GenerationRequest) -> tuple[PatchSample, int]:
        level = self.model_level if request.model_level is None else request.model_level
        if level != self.model_level:
            raise RequestError(
                f"request model level {level} does not match the loaded "
                f"checkpoint (level {self.model_level})"
            )
        streets, elevation, aspect = self.resolve_context(request)
        mask_img = decode_png8(request.mask)
        if mask_img.shape != streets.shape:
            raise RequestError(
                f"mask shape {mask_img.shape} does not match context "
                f"{streets.shape}"
            )
        if elevation.shape != streets.shape or aspect.shape != streets.shape:
            raise RequestError("context channels disagree in shape")
        grid = (mask_img > 127).astype(np.uint8)
        if grid.sum() == 0:
            raise RequestError("mask has an empty generation region")
        if grid.all():
            raise RequestError("mask covers the whole patch; no context remains")
        mask = Mask(grid)

        h, w = grid.shape
        for r, c in request.junctions:
            if not (0 <= r < h and 0 <= c < w) or grid[int(r), int(c)] != 1:
                raise RequestError(
                    f"junction ({r}, {c}) lies outside the generation region"
                )

        codes = pattern_code_table()
        pattern = np.zeros(grid.shape, dtype=np.uint8)
        for i, stroke in enumerate(request.pattern_strokes):
            if stroke.pattern not in codes:
                raise RequestError(
                    f"stroke {i}: unknown pattern type {stroke.pattern!r}"
                )
            code = codes[stroke.pattern]
            if stroke.polygon is not None:
                covered = _fill_polygon_pixels(stroke.polygon, grid.shape)
            elif stroke.raster is not None:
                arr = decode_png8(stroke.raster)
                if arr.shape != grid.shape:
                    raise RequestError(
                        f"stroke {i}: raster shape {arr.shape} != mask {grid.shape}"
                    )
                covered = arr > 127
            else:
                raise RequestError(f"stroke {i}: needs a polygon or a raster")
            pattern[covered] = code
        pattern *= grid  # guidance only inside the generation region

        context = (streets * (1 - grid)).astype(np.float32)
        sample = PatchSample(
            context_streets=context,
            elevation=elevation,
            aspect=aspect,
            mask=mask,
            noise=make_noise_channel(mask, request.seed),
            junction_channel=render_junctions(
                [(int(r), int(c)) for r, c in request.junctions],
                grid.shape,
                mask=mask,
                dilate=True,
            ),
            pattern_guidance=pattern,
            ground_truth_streets=context,
            origin=(0, 0),
            model_level=level,
            seed=request.seed,
        )
        sample.validate()
        return sample, level

    def run(self, sample: PatchSample, level: int) -> tuple[np.ndarray, np.ndarray]:
        stack = input_stack(sample, model_level=level)
        x = torch.from_numpy(stack[None])
        with torch.no_grad():
            raw = self.generator(x).numpy()[0, 0]
        comp = composite(raw, sample.context_streets, sample.mask.grid)
        return raw, comp


class RequestError(ValueError):
    pass


# ---------------------------------------------------------------------------
# FastAPI app
# ---------------------------------------------------------------------------


def create_app(checkpoint_path, map_path=None, ui_dir=None):
    service = GeneratorService(checkpoint_path, map_path=map_path)
    app = FastAPI(title="streetgen inference service")

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "model_level": service.model_level,
            "checkpoint_hash": service.checkpoint_hash,
        }

    @app.get("/meta")
    def meta():
        return {
            "model_level": service.model_level,
            "checkpoint_hash": service.checkpoint_hash,
            "generator_spec": service.spec.to_json(),
            "condition_channels": list(CONDITION_CHANNELS),
            "pattern_legend": PATTERN_LEGEND,
            "pattern_codes": pattern_code_table(),
            "training_meta": service.meta,
        }

    @app.get("/context")
    def context(row: int = 0, col: int = 0, size: int = 256):
        """Context tile fetch for interactive clients (needs --map)."""
        if service.map is None:
            raise HTTPException(
                status_code=404, detail="service was started without a map"
            )
        h, w = service.map.shape
        if not (0 <= row <= h - size and 0 <= col <= w - size):
            raise HTTPException(
                status_code=422,
                detail=f"tile ({row}, {col}) size {size} exceeds map bounds {(h, w)}",
            )
        elevation = service.map["elevation"][row : row + size, col : col + size]
        aspect = service.map["aspect"][row : row + size, col : col + size]
        elo, ehi = float(elevation.min()), float(elevation.max()) + 1.0
        return {
            "origin": [row, col],
            "size": size,
            "streets": encode_png16(
                service.map["streets"][row : row + size, col : col + size]
            ),
            "elevation": {"png": encode_png16(elevation, elo, ehi), "lo": elo, "hi": ehi},
            "aspect": {
                "png": encode_png16(aspect, -1.0, 360.0),
                "lo": -1.0,
                "hi": 360.0,
            },
        }

    @app.post("/generate", response_model=GenerationResponse)
    def generate(request: GenerationRequest):
        started = time.perf_counter()
        try:
            sample, level = service.assemble(request)
        except RequestError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        raw, comp = service.run(sample, level)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        digest = hashlib.sha256(
            request.model_dump_json().encode("utf-8")
        ).hexdigest()
        return GenerationResponse(
            composite=encode_png16(comp),
            raw_output=encode_png16(raw),
            elapsed_ms=elapsed_ms,
            request_hash=digest,
            model_level=level,
            seed=request.seed,
        )

    @app.post("/generate/raw")
    async def generate_raw(request: Request):
        """Bulk endpoint: a patch-record archive in, raw float32 bytes out."""
        body = await request.body()
        try:
            sample = load_record(io.BytesIO(body))
        except Exception as exc:
            raise HTTPException(status_code=422, detail=f"unreadable record: {exc}")
        if sample.model_level < service.model_level:
            raise HTTPException(
                status_code=422,
                detail=(
                    f"record level {sample.model_level} lacks guidance channels "
                    f"for checkpoint level {service.model_level}"
                ),
            )
        raw, comp = service.run(sample, service.model_level)
        data = comp.astype("<f4").tobytes(order="C")
        return Response(
            content=data,
            media_type="application/octet-stream",
            headers={"X-Shape": f"{comp.shape[0]},{comp.shape[1]}"},
        )

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(checkpoint_path, port: int = 8080, host: str = "127.0.0.1", map_path=None, ui_dir=None):
    """Run the inference service until interrupted."""
    import uvicorn

    app = create_app(checkpoint_path, map_path=map_path, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)
