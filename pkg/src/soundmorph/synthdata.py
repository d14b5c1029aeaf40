"""Synthetic demo corpora: vowel-like "digit" tones and drum hits.

The shipped experiments expect a spoken-digit corpus (500 mono WAVs at
8 kHz, filenames starting with the digit) and a drum-hit corpus. This
module synthesizes stand-ins with the same shape so every pipeline can
run end to end without external downloads.

Each digit class is a fixed harmonic template (fundamental, overtone
profile, and a class phase signature, mirroring how consistent
articulation gives real spoken digits a shared waveform skeleton);
clips within a class jitter the template's phases, frequency, and
per-harmonic levels, vary their envelope, and add noise. The shared
skeleton is what makes the class reconstructable by a decoder trained
on waveform error: with fully random per-clip phases the
class-conditional mean waveform is silence and waveform-MSE training
has no class prototype to learn.
Drum clips come in five families (kick, snare, hat, tom, cymbal) with
family-specific attack spectra for the clustering pipeline to find.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .audio import (
    AudioClip,
    DatasetSplit,
    LabeledClip,
    fit_length,
    peak_normalize,
    save_wav,
)

DIGIT_SAMPLE_RATE = 8000
DIGIT_LENGTH = 4096
DRUM_SAMPLE_RATE = 22050
DRUM_LENGTH = 16384
DRUM_FAMILIES = ("kick", "snare", "hat", "tom", "cymbal")


def synth_digit_clip(label: int, seed: int, index: int) -> AudioClip:
    """One synthetic clip of a digit class, deterministic per (seed, label, index).

    The class identity is a fixed harmonic template (fundamental,
    overtone profile, phase signature) drawn from a per-label generator,
    stable across corpora and seeds; the clip seed only controls the
    jitters around the template.
    """
    rng = np.random.default_rng([seed, label, index])
    template_rng = np.random.default_rng(9000 + label)

    f0 = 150.0 + 35.0 * label
    num_harmonics = max(3, int(0.45 * DIGIT_SAMPLE_RATE / f0))
    profile = template_rng.lognormal(mean=0.0, sigma=0.7, size=num_harmonics)
    profile /= np.arange(1, num_harmonics + 1) ** (0.6 + 0.1 * (label % 4))
    template_phases = template_rng.uniform(0.0, 2 * np.pi, size=num_harmonics)

    t = np.arange(DIGIT_LENGTH) / DIGIT_SAMPLE_RATE
    f_jitter = 1.0 + rng.uniform(-0.018, 0.018)
    amp_jitter = np.exp(rng.normal(0.0, 0.15, size=num_harmonics))
    phases = template_phases + rng.normal(0.0, 1.2, size=num_harmonics)

    wave = np.zeros(DIGIT_LENGTH)
    for h in range(num_harmonics):
        freq = f0 * f_jitter * (h + 1)
        wave += profile[h] * amp_jitter[h] * np.sin(2 * np.pi * freq * t + phases[h])

    attack = rng.uniform(0.010, 0.040)
    tau = rng.uniform(0.20, 0.45)
    envelope = np.minimum(t / attack, 1.0) * np.exp(-np.maximum(t - attack, 0.0) / tau)
    wave = wave * envelope
    wave += rng.normal(0.0, 1.0, size=DIGIT_LENGTH) * (np.max(np.abs(wave)) * 0.025)

    clip = AudioClip(samples=wave.astype(np.float32), sample_rate=DIGIT_SAMPLE_RATE)
    return fit_length(peak_normalize(clip), DIGIT_LENGTH)


def synth_digit_split(
    classes=(0, 1), clips_per_class: int = 10, seed: int = 0
) -> DatasetSplit:
    """In-memory all-train split over a subset of digit classes (smoke runs)."""
    classes = tuple(classes)
    if classes != tuple(range(len(classes))):
        raise ValueError(f"classes must be contiguous from 0, got {classes}")
    train = [
        LabeledClip(
            clip=synth_digit_clip(label, seed, i),
            label=label,
            source_id=f"{label}_synth_{i:02d}.wav",
        )
        for label in classes
        for i in range(clips_per_class)
    ]
    return DatasetSplit(
        train=train,
        test=[],
        num_classes=len(classes),
        fixed_length=DIGIT_LENGTH,
        sample_rate=DIGIT_SAMPLE_RATE,
    )


def synth_digit_dataset(seed: int = 0) -> DatasetSplit:
    """Full in-memory digit dataset: 10 classes x 50 clips, 10 test per class."""
    train: list[LabeledClip] = []
    test: list[LabeledClip] = []
    for label in range(10):
        for i in range(50):
            item = LabeledClip(
                clip=synth_digit_clip(label, seed, i),
                label=label,
                source_id=f"{label}_synth_{i:02d}.wav",
            )
            (test if i < 10 else train).append(item)
    return DatasetSplit(
        train=train,
        test=test,
        num_classes=10,
        fixed_length=DIGIT_LENGTH,
        sample_rate=DIGIT_SAMPLE_RATE,
    )


def generate_digit_corpus(
    out_dir: str | os.PathLike, seed: int = 0, clips_per_class: int = 50
) -> list[Path]:
    """Write the synthetic digit corpus as WAV files named <digit>_synth_<i>.wav."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for label in range(10):
        for i in range(clips_per_class):
            path = out_dir / f"{label}_synth_{i:02d}.wav"
            save_wav(synth_digit_clip(label, seed, i), path)
            paths.append(path)
    return paths


def _noise_highpass(noise: np.ndarray, passes: int) -> np.ndarray:
    for _ in range(passes):
        noise = np.diff(noise, prepend=noise[:1])
    return noise


def synth_drum_clip(family: str, seed: int, index: int) -> AudioClip:
    """One synthetic drum hit, deterministic per (seed, family, index)."""
    if family not in DRUM_FAMILIES:
        raise ValueError(f"unknown drum family {family!r}, pick from {DRUM_FAMILIES}")
    rng = np.random.default_rng([seed, DRUM_FAMILIES.index(family), index])
    t = np.arange(DRUM_LENGTH) / DRUM_SAMPLE_RATE
    noise = rng.normal(0.0, 1.0, size=DRUM_LENGTH)

    if family == "kick":
        tau = rng.uniform(0.07, 0.12)
        f_start, f_end = rng.uniform(100, 140), rng.uniform(40, 55)
        freq = f_end + (f_start - f_end) * np.exp(-t / 0.03)
        phase = 2 * np.pi * np.cumsum(freq) / DRUM_SAMPLE_RATE
        wave = np.sin(phase) * np.exp(-t / tau)
        click = _noise_highpass(noise, 2) * np.exp(-t / 0.004)
        wave += 0.25 * click
    elif family == "snare":
        tau = rng.uniform(0.09, 0.15)
        tone = np.sin(2 * np.pi * rng.uniform(170, 200) * t) * np.exp(-t / (tau * 0.6))
        rattle = _noise_highpass(noise, 1) * np.exp(-t / tau)
        wave = 0.5 * tone + 0.8 * rattle
    elif family == "hat":
        tau = rng.uniform(0.04, 0.08)
        wave = _noise_highpass(noise, 3) * np.exp(-t / tau)
    elif family == "tom":
        tau = rng.uniform(0.20, 0.30)
        f0 = rng.uniform(90, 140)
        freq = f0 * (1.0 - 0.15 * (1 - np.exp(-t / 0.1)))
        phase = 2 * np.pi * np.cumsum(freq) / DRUM_SAMPLE_RATE
        wave = np.sin(phase) * np.exp(-t / tau)
        wave += 0.05 * _noise_highpass(noise, 2) * np.exp(-t / 0.01)
    else:  # cymbal
        tau = rng.uniform(0.30, 0.50)
        wave = np.zeros(DRUM_LENGTH)
        for _ in range(8):
            partial = rng.uniform(800, 7000)
            wave += rng.uniform(0.3, 1.0) * np.sin(
                2 * np.pi * partial * t + rng.uniform(0, 2 * np.pi)
            )
        wave *= np.exp(-t / tau)
        wave += 0.3 * _noise_highpass(noise, 2) * np.exp(-t / tau)

    clip = AudioClip(samples=wave.astype(np.float32), sample_rate=DRUM_SAMPLE_RATE)
    return fit_length(peak_normalize(clip), DRUM_LENGTH)


def generate_drum_corpus(
    out_dir: str | os.PathLike, seed: int = 0, total: int = 154
) -> list[Path]:
    """Write the synthetic drum corpus, families interleaved, total clips."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    per_family = [total // len(DRUM_FAMILIES)] * len(DRUM_FAMILIES)
    for i in range(total % len(DRUM_FAMILIES)):
        per_family[i] += 1
    for family, count in zip(DRUM_FAMILIES, per_family):
        for i in range(count):
            path = out_dir / f"{family}_{i:03d}.wav"
            save_wav(synth_drum_clip(family, seed, i), path)
            paths.append(path)
    return paths
