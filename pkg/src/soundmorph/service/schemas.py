"""Request/response bodies of the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class MetaResponse(BaseModel):
    arch: str
    latent_dim: int
    input_len: int
    num_classes: int
    sample_rate: int
    decode_mode: str


class LatentPoint(BaseModel):
    source_id: str
    label: int
    x: float
    y: float
    z: list[float]


class CenterPoint(BaseModel):
    label: int
    x: float
    y: float
    z: list[float]


class LatentResponse(BaseModel):
    points: list[LatentPoint]
    centers: list[CenterPoint]
    explained_variance: list[float]


class DecodeRequest(BaseModel):
    z: list[float]


class MorphRequestBody(BaseModel):
    z_start: list[float]
    z_end: list[float]
    steps: int = Field(default=10, ge=2)
    gap_ms: float = Field(default=200.0, ge=0.0)


class AudioRef(BaseModel):
    """Pointer to a rendered WAV retrievable from GET /audio/{audio_id}."""

    audio_id: str
    url: str


class MorphResponse(BaseModel):
    steps: list[AudioRef]
    concatenated: AudioRef
