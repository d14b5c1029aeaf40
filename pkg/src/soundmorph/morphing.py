"""Latent-path morphing: decode interpolated latent points into audio.

A morph walks a straight line between two latent anchors (class centers
or individual projected clips), decodes every step to a waveform, and
optionally concatenates the steps with short silences so the progression
is audible as discrete stages.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, save_wav
from .evaluation import LatentDataset, class_center
from .models import VaeModel, decode

DEFAULT_GAP_MS = 200.0


@dataclass(frozen=True)
class MorphRequest:
    """Endpoints and sampling of one morph."""

    z_start: np.ndarray
    z_end: np.ndarray
    steps: int
    gap_ms: float = DEFAULT_GAP_MS

    def __post_init__(self):
        z_start = np.asarray(self.z_start, dtype=np.float64)
        z_end = np.asarray(self.z_end, dtype=np.float64)
        if z_start.ndim != 1 or z_start.shape != z_end.shape:
            raise ValueError(
                f"z_start and z_end must be 1-D and equal length, got "
                f"{z_start.shape} and {z_end.shape}"
            )
        if not (np.all(np.isfinite(z_start)) and np.all(np.isfinite(z_end))):
            raise ValueError("morph endpoints must be finite")
        if self.steps < 2:
            raise ValueError(f"steps must be at least 2, got {self.steps}")
        if self.gap_ms < 0:
            raise ValueError(f"gap_ms must be non-negative, got {self.gap_ms}")
        object.__setattr__(self, "z_start", z_start)
        object.__setattr__(self, "z_end", z_end)


@dataclass
class MorphResult:
    step_clips: list[AudioClip]
    concatenated: AudioClip


def morph_path(req: MorphRequest) -> np.ndarray:
    """Linear interpolation z_k = (1 - t_k) z_start + t_k z_end, t_k = k/(steps-1).

    The (1-t)/t form keeps the endpoints bit-exact and the midpoint equal
    to the arithmetic mean of the endpoints.
    """
    t = np.arange(req.steps, dtype=np.float64) / (req.steps - 1)
    return (1.0 - t)[:, None] * req.z_start[None, :] + t[:, None] * req.z_end[None, :]


def render_morph(
    model: VaeModel, req: MorphRequest, out_dir: str | os.PathLike | None = None
) -> MorphResult:
    """Decode every path point and join them with gap_ms of silence.

    The concatenated clip has steps * input_len + (steps - 1) * gap
    samples. With out_dir set, each step is written as step_XX.wav next
    to the combined morph.wav.
    """
    if req.z_start.shape[0] != model.latent_dim:
        raise ValueError(
            f"morph endpoints have dim {req.z_start.shape[0]}, model expects "
            f"{model.latent_dim}"
        )
    path = morph_path(req)
    # Decode points one at a time: batched float32 convolutions are not
    # bitwise identical across batch sizes, and each step's samples must
    # match a standalone decode of the same latent exactly.
    waves = [decode(model, point[None, :])[0] for point in path]
    step_clips = [
        AudioClip(samples=w.astype(np.float32), sample_rate=model.sample_rate)
        for w in waves
    ]

    gap_samples = int(req.gap_ms * model.sample_rate / 1000)
    gap = np.zeros(gap_samples, dtype=np.float32)
    pieces: list[np.ndarray] = []
    for i, clip in enumerate(step_clips):
        if i:
            pieces.append(gap)
        pieces.append(clip.samples)
    concatenated = AudioClip(
        samples=np.concatenate(pieces), sample_rate=model.sample_rate
    )

    result = MorphResult(step_clips=step_clips, concatenated=concatenated)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, clip in enumerate(step_clips):
            save_wav(clip, out_dir / f"step_{i:02d}.wav")
        save_wav(concatenated, out_dir / "morph.wav")
    return result


def decode_centers(
    model: VaeModel,
    latent: LatentDataset,
    out_dir: str | os.PathLike | None = None,
) -> dict[int, AudioClip]:
    """Decode each class's latent center to audio, one clip per class.

    With out_dir set, writes center_<label>.wav per class. Deterministic:
    repeated calls produce identical clips.
    """
    centers: dict[int, AudioClip] = {}
    for label in latent.classes():
        z = class_center(latent, label)
        wave = decode(model, z[None, :])[0]
        centers[label] = AudioClip(
            samples=wave.astype(np.float32), sample_rate=model.sample_rate
        )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for label, clip in centers.items():
            save_wav(clip, out_dir / f"center_{label}.wav")
    return centers
