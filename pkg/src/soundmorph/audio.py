"""Fixed-length mono audio: WAV I/O, normalization, and dataset assembly.

All clips are mono PCM16 on disk and float arrays in [-1, 1] in memory.
Digit datasets are 4096 samples at 8 kHz, drum datasets 16384 samples at
their native rate (22 kHz in the shipped corpora).
"""

from __future__ import annotations

import os
import random
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AudioFormatError, DatasetError

PCM16_FULL_SCALE = 32768

DIGIT_FIXED_LENGTH = 4096
DIGIT_NUM_CLASSES = 10
DIGIT_CLIPS_PER_CLASS = 50
DIGIT_TEST_PER_CLASS = 10

DRUM_FIXED_LENGTH = 16384
DRUM_NUM_CLASSES = 5


@dataclass(frozen=True)
class AudioClip:
    """A mono waveform with its sample rate.

    Samples are float32. Values are expected to lie in [-1, 1] once
    normalized; out-of-range values are tolerated in memory and clamped
    when written to disk.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise ValueError(f"expected a 1-D sample array, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("clip contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    def duration_ms(self) -> float:
        return 1000.0 * len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class LabeledClip:
    clip: AudioClip
    label: int
    source_id: str

    def __post_init__(self):
        if self.label < 0:
            raise ValueError(f"label must be non-negative, got {self.label}")


@dataclass
class DatasetSplit:
    """Train/test partition of fixed-length labeled clips."""

    train: list[LabeledClip]
    test: list[LabeledClip]
    num_classes: int
    fixed_length: int
    sample_rate: int

    def all_clips(self) -> list[LabeledClip]:
        return self.train + self.test


def load_wav(path: str | os.PathLike) -> AudioClip:
    """Read a mono PCM16 WAV file, scaling samples to [-1, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such audio file: {path}")
    with wave.open(str(path), "rb") as wav:
        channels = wav.getnchannels()
        if channels != 1:
            raise AudioFormatError(f"{path}: expected mono audio, got {channels} channels")
        sampwidth = wav.getsampwidth()
        if sampwidth != 2:
            raise AudioFormatError(
                f"{path}: only 16-bit PCM is supported, got {8 * sampwidth}-bit"
            )
        sample_rate = wav.getframerate()
        raw = wav.readframes(wav.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    samples = pcm.astype(np.float32) / PCM16_FULL_SCALE
    return AudioClip(samples=samples, sample_rate=sample_rate)


def save_wav(clip: AudioClip, path: str | os.PathLike) -> None:
    """Write a clip as mono PCM16, clamping samples to [-1, 1] first."""
    clamped = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.clip(
        np.round(clamped.astype(np.float64) * PCM16_FULL_SCALE),
        -PCM16_FULL_SCALE,
        PCM16_FULL_SCALE - 1,
    ).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(clip.sample_rate)
        wav.writeframes(pcm.tobytes())


def wav_bytes(clip: AudioClip) -> bytes:
    """Encode a clip as an in-memory mono PCM16 WAV payload."""
    import io

    buf = io.BytesIO()
    clamped = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.clip(
        np.round(clamped.astype(np.float64) * PCM16_FULL_SCALE),
        -PCM16_FULL_SCALE,
        PCM16_FULL_SCALE - 1,
    ).astype("<i2")
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(clip.sample_rate)
        wav.writeframes(pcm.tobytes())
    return buf.getvalue()


def fit_length(clip: AudioClip, target_len: int) -> AudioClip:
    """Truncate from the end or zero-pad at the end to exactly target_len."""
    if target_len <= 0:
        raise ValueError(f"target_len must be positive, got {target_len}")
    samples = clip.samples
    if len(samples) > target_len:
        samples = samples[:target_len]
    elif len(samples) < target_len:
        samples = np.concatenate(
            [samples, np.zeros(target_len - len(samples), dtype=np.float32)]
        )
    else:
        return clip
    return AudioClip(samples=samples, sample_rate=clip.sample_rate)


def peak_normalize(clip: AudioClip) -> AudioClip:
    """Scale so the largest absolute sample is 1. All-zero clips pass through."""
    peak = float(np.max(np.abs(clip.samples))) if len(clip.samples) else 0.0
    if peak == 0.0:
        return clip
    return AudioClip(samples=clip.samples / peak, sample_rate=clip.sample_rate)


def _digit_label(filename: str) -> int:
    stem = Path(filename).stem
    head = stem.split("_")[0]
    try:
        return int(head)
    except ValueError:
        raise DatasetError(f"cannot parse digit label from file name: {filename}")


def build_digit_dataset(root: str | os.PathLike, seed: int) -> DatasetSplit:
    """Load the spoken-digit corpus and split it 40 train / 10 test per class.

    Expects 500 mono WAV files, 50 per digit, whose names start with the
    digit label. The split is stratified and deterministic for a given
    seed. Every clip is peak-normalized and fit to 4096 samples.
    """
    root = Path(root)
    files = sorted(p.name for p in root.glob("*.wav"))
    by_class: dict[int, list[str]] = {}
    for name in files:
        by_class.setdefault(_digit_label(name), []).append(name)

    if sorted(by_class) != list(range(DIGIT_NUM_CLASSES)):
        raise DatasetError(
            f"{root}: expected digit classes 0..9, found {sorted(by_class)}"
        )
    for label, names in sorted(by_class.items()):
        if len(names) != DIGIT_CLIPS_PER_CLASS:
            raise DatasetError(
                f"{root}: digit {label} has {len(names)} clips, expected "
                f"{DIGIT_CLIPS_PER_CLASS}"
            )

    rng = random.Random(seed)
    train: list[LabeledClip] = []
    test: list[LabeledClip] = []
    sample_rate = None
    for label in range(DIGIT_NUM_CLASSES):
        names = sorted(by_class[label])
        rng.shuffle(names)
        for i, name in enumerate(names):
            clip = load_wav(root / name)
            if sample_rate is None:
                sample_rate = clip.sample_rate
            elif clip.sample_rate != sample_rate:
                raise DatasetError(
                    f"{name}: sample rate {clip.sample_rate} differs from "
                    f"{sample_rate}; mixed-rate corpora are not supported"
                )
            clip = fit_length(peak_normalize(clip), DIGIT_FIXED_LENGTH)
            labeled = LabeledClip(clip=clip, label=label, source_id=name)
            (test if i < DIGIT_TEST_PER_CLASS else train).append(labeled)

    return DatasetSplit(
        train=train,
        test=test,
        num_classes=DIGIT_NUM_CLASSES,
        fixed_length=DIGIT_FIXED_LENGTH,
        sample_rate=int(sample_rate),
    )


def build_drum_dataset(root: str | os.PathLike, cluster_model) -> DatasetSplit:
    """Load a drum corpus, labeling each clip by its attack-feature cluster.

    All clips go to the training list (drum experiments keep no held-out
    split); each is peak-normalized and fit to 16384 samples, then labeled
    by nearest-centroid assignment of its averaged attack MFCC vector.
    """
    from . import features

    root = Path(root)
    files = sorted(p.name for p in root.glob("*.wav"))
    if not files:
        raise DatasetError(f"{root}: no WAV files found")

    train: list[LabeledClip] = []
    sample_rate = None
    for name in files:
        clip = load_wav(root / name)
        if sample_rate is None:
            sample_rate = clip.sample_rate
        elif clip.sample_rate != sample_rate:
            raise DatasetError(
                f"{name}: sample rate {clip.sample_rate} differs from {sample_rate}"
            )
        clip = fit_length(peak_normalize(clip), DRUM_FIXED_LENGTH)
        vec = features.drum_attack_features(clip)
        label = features.assign_cluster(cluster_model, vec)
        train.append(LabeledClip(clip=clip, label=label, source_id=name))

    return DatasetSplit(
        train=train,
        test=[],
        num_classes=cluster_model.k,
        fixed_length=DRUM_FIXED_LENGTH,
        sample_rate=int(sample_rate),
    )


def write_manifest(split: DatasetSplit, path: str | os.PathLike, root: str | os.PathLike) -> None:
    """Write a UTF-8 text table of (source_id, split, label) plus dataset params."""
    root = Path(root).resolve()
    lines = [
        f"# root={root}",
        f"# fixed_length={split.fixed_length}",
        f"# sample_rate={split.sample_rate}",
        f"# num_classes={split.num_classes}",
        "source_id\tsplit\tlabel",
    ]
    for part, clips in (("train", split.train), ("test", split.test)):
        for item in clips:
            lines.append(f"{item.source_id}\t{part}\t{item.label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path: str | os.PathLike, root: str | os.PathLike | None = None) -> DatasetSplit:
    """Rebuild a DatasetSplit from a manifest, re-loading the referenced files."""
    text = Path(path).read_text(encoding="utf-8")
    meta: dict[str, str] = {}
    rows: list[tuple[str, str, int]] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif not line.startswith("source_id"):
            source_id, part, label = line.split("\t")
            rows.append((source_id, part, int(label)))

    try:
        fixed_length = int(meta["fixed_length"])
        num_classes = int(meta["num_classes"])
        manifest_root = Path(meta["root"])
    except KeyError as exc:
        raise DatasetError(f"{path}: manifest is missing header field {exc}")
    data_root = Path(root) if root is not None else manifest_root

    train: list[LabeledClip] = []
    test: list[LabeledClip] = []
    sample_rate = None
    for source_id, part, label in rows:
        clip = load_wav(data_root / source_id)
        sample_rate = clip.sample_rate if sample_rate is None else sample_rate
        clip = fit_length(peak_normalize(clip), fixed_length)
        item = LabeledClip(clip=clip, label=label, source_id=source_id)
        (train if part == "train" else test).append(item)

    if sample_rate is None:
        raise DatasetError(f"{path}: manifest lists no clips")
    return DatasetSplit(
        train=train,
        test=test,
        num_classes=num_classes,
        fixed_length=fixed_length,
        sample_rate=int(sample_rate),
    )
