"""FastAPI application around one loaded checkpoint.

The app is read-only over an immutable model: /meta and /latent describe
it, /decode and /morph render audio from explicit latent vectors, and
/audio/{id} replays previously rendered WAVs from a content-addressed
in-memory cache. Identical requests therefore return byte-identical
payloads (in mean decode mode).
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..audio import AudioClip, load_manifest, wav_bytes
from ..config import ServiceConfig
from ..evaluation import class_center, export_projection_2d, project_dataset
from ..models import load_checkpoint
from ..morphing import MorphRequest, render_morph
from .schemas import (
    AudioRef,
    CenterPoint,
    DecodeRequest,
    LatentPoint,
    LatentResponse,
    MetaResponse,
    MorphRequestBody,
    MorphResponse,
)


class _AudioCache:
    """Content-addressed WAV store with atomic insert-if-absent."""

    def __init__(self):
        self._store: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put(self, payload: bytes) -> str:
        audio_id = hashlib.sha256(payload).hexdigest()[:32]
        with self._lock:
            self._store.setdefault(audio_id, payload)
        return audio_id

    def get(self, audio_id: str) -> bytes | None:
        with self._lock:
            return self._store.get(audio_id)


def _latent_vectors(model, clips, decode_mode: str) -> list[np.ndarray]:
    """Latent vector per clip: mu in mean mode, one seeded draw in sample mode."""
    from .. import models as m

    mu, log_var = m.encode(model, [c.clip for c in clips])
    if decode_mode == "mean":
        return [mu[i] for i in range(len(clips))]
    rng = np.random.default_rng(model.seed)
    eps = rng.standard_normal(mu.shape)
    z = mu + np.exp(log_var / 2) * eps
    return [z[i] for i in range(len(clips))]


def create_app(cfg: ServiceConfig) -> FastAPI:
    """Build the service: loads checkpoint and manifest eagerly, fails fast."""
    model = load_checkpoint(cfg.checkpoint)
    split = load_manifest(cfg.manifest, root=cfg.data_root)
    clips = split.test if split.test else split.train

    latent = project_dataset(model, clips)
    vectors = _latent_vectors(model, clips, cfg.decode_mode)
    projection = export_projection_2d(latent)

    points = [
        LatentPoint(
            source_id=source_id,
            label=label,
            x=x,
            y=y,
            z=[float(v) for v in vectors[i]],
        )
        for i, (source_id, label, x, y) in enumerate(projection.entries)
    ]
    centers = []
    for label in latent.classes():
        center = class_center(latent, label)
        cx, cy = projection.project(center)[0]
        centers.append(
            CenterPoint(label=label, x=float(cx), y=float(cy), z=[float(v) for v in center])
        )
    latent_response = LatentResponse(
        points=points,
        centers=centers,
        explained_variance=[float(v) for v in projection.explained_variance],
    )

    app = FastAPI(title="soundmorph service")
    cache = _AudioCache()

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        details = [
            {
                "field": ".".join(str(part) for part in err["loc"]),
                "message": err["msg"],
            }
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": details})

    def _check_dim(name: str, values: list[float]) -> np.ndarray:
        if len(values) != model.latent_dim:
            raise HTTPException(
                status_code=422,
                detail=f"{name} must have length {model.latent_dim}, got {len(values)}",
            )
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise HTTPException(status_code=422, detail=f"{name} must be finite")
        return arr

    def _render_wav(z: np.ndarray) -> bytes:
        from .. import models as m

        wave = m.decode(model, z[None, :])[0]
        clip = AudioClip(samples=wave.astype(np.float32), sample_rate=model.sample_rate)
        return wav_bytes(clip)

    @app.get("/meta", response_model=MetaResponse)
    def meta() -> MetaResponse:
        return MetaResponse(
            arch=model.arch,
            latent_dim=model.latent_dim,
            input_len=model.input_len,
            num_classes=model.num_classes,
            sample_rate=model.sample_rate,
            decode_mode=cfg.decode_mode,
        )

    @app.get("/latent", response_model=LatentResponse)
    def latent_records() -> LatentResponse:
        return latent_response

    @app.post("/decode")
    def decode_endpoint(body: DecodeRequest) -> Response:
        z = _check_dim("z", body.z)
        payload = _render_wav(z)
        audio_id = cache.put(payload)
        return Response(
            content=payload,
            media_type="audio/wav",
            headers={"X-Audio-Id": audio_id},
        )

    @app.post("/morph", response_model=MorphResponse)
    def morph_endpoint(body: MorphRequestBody) -> MorphResponse:
        z_start = _check_dim("z_start", body.z_start)
        z_end = _check_dim("z_end", body.z_end)
        req = MorphRequest(
            z_start=z_start, z_end=z_end, steps=body.steps, gap_ms=body.gap_ms
        )
        result = render_morph(model, req)
        refs = []
        for clip in result.step_clips:
            audio_id = cache.put(wav_bytes(clip))
            refs.append(AudioRef(audio_id=audio_id, url=f"/audio/{audio_id}"))
        concat_id = cache.put(wav_bytes(result.concatenated))
        return MorphResponse(
            steps=refs,
            concatenated=AudioRef(audio_id=concat_id, url=f"/audio/{concat_id}"),
        )

    @app.get("/audio/{audio_id}")
    def audio(audio_id: str) -> Response:
        payload = cache.get(audio_id)
        if payload is None:
            raise HTTPException(status_code=404, detail=f"unknown audio id {audio_id}")
        return Response(content=payload, media_type="audio/wav")

    return app
