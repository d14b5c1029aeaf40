"""Experiment configuration: one YAML file covering dataset, model,
training, MFCC, and service settings.

Every field has a default matching the spoken-digit preset; a drums
preset adjusts the audio geometry, latent size, and classifier. Unknown
keys are rejected so typos fail loudly instead of silently using a
default.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .features import MfccConfig
from .training import LossWeights, TrainConfig


@dataclass(frozen=True)
class DatasetConfig:
    root: str = "data/digits"
    kind: str = "digits"  # digits | drums
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("digits", "drums"):
            raise ValueError(f"dataset.kind must be 'digits' or 'drums', got {self.kind!r}")


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "DC"  # DC | CC
    input_len: int = 4096
    latent_dim: int = 20
    sample_rate: int = 8000
    seed: int = 0
    num_classes: int = 10
    classifier_hidden: tuple[int, ...] = (10, 10, 10)

    def __post_init__(self):
        if self.arch not in ("DC", "CC"):
            raise ValueError(f"model.arch must be 'DC' or 'CC', got {self.arch!r}")
        object.__setattr__(self, "classifier_hidden", tuple(self.classifier_hidden))


@dataclass(frozen=True)
class ServiceConfig:
    checkpoint: str = "runs/latest/checkpoints/model.npz"
    manifest: str = "runs/latest/manifest.tsv"
    data_root: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    decode_mode: str = "mean"  # mean | sample

    def __post_init__(self):
        if self.decode_mode not in ("mean", "sample"):
            raise ValueError(
                f"service.decode_mode must be 'mean' or 'sample', got {self.decode_mode!r}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    mfcc: MfccConfig = field(default_factory=lambda: MfccConfig(
        num_coeffs=20, window_len=25.0, hop_len=10.0, num_mel_filters=40, fft_size=256
    ))
    service: ServiceConfig = field(default_factory=ServiceConfig)


def drums_experiment_config(**overrides) -> ExperimentConfig:
    """Drum preset: 16384 samples at 22.05 kHz, 30-dim latents, 5 clusters."""
    base = ExperimentConfig(
        dataset=DatasetConfig(root="data/drums", kind="drums"),
        model=ModelConfig(
            input_len=16384,
            latent_dim=30,
            sample_rate=22050,
            num_classes=5,
            classifier_hidden=(5,),
        ),
        mfcc=MfccConfig(
            num_coeffs=20, window_len=10.0, hop_len=10.0, num_mel_filters=40, fft_size=256
        ),
    )
    return _merge(base, overrides) if overrides else base


def _build_section(cls, defaults, data: dict):
    if not isinstance(data, dict):
        raise ValueError(f"expected a mapping for {cls.__name__}, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(
            f"unknown {cls.__name__} keys: {sorted(unknown)} (known: {sorted(known)})"
        )
    merged = {**defaults, **data}
    return cls(**merged)


def _section_defaults(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _merge(base: ExperimentConfig, data: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)} (known: {sorted(known)})")

    sections = {}
    for name, cls in (
        ("dataset", DatasetConfig),
        ("model", ModelConfig),
        ("mfcc", MfccConfig),
        ("service", ServiceConfig),
    ):
        current = getattr(base, name)
        sections[name] = _build_section(cls, _section_defaults(current), data.get(name, {}))

    train_data = dict(data.get("train", {}))
    weight_data = train_data.pop("weights", {})
    weights = _build_section(
        LossWeights, _section_defaults(base.train.weights), weight_data
    )
    train_defaults = _section_defaults(base.train)
    train_defaults["weights"] = weights
    sections["train"] = _build_section(TrainConfig, train_defaults, train_data)

    return ExperimentConfig(**sections)


def load_config(path: str | os.PathLike | None = None, preset: str = "digits") -> ExperimentConfig:
    """Load a config file over the preset defaults; None gives pure defaults."""
    if preset == "digits":
        base = ExperimentConfig()
    elif preset == "drums":
        base = drums_experiment_config()
    else:
        raise ValueError(f"unknown preset {preset!r} (use 'digits' or 'drums')")
    if path is None:
        return base
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config root must be a mapping")
    return _merge(base, data)


def write_config(cfg: ExperimentConfig, path: str | os.PathLike) -> None:
    """Dump a config as YAML (the file load_config reads back)."""
    data = asdict(cfg)
    data["model"]["classifier_hidden"] = list(cfg.model.classifier_hidden)
    Path(path).write_text(
        yaml.safe_dump(data, sort_keys=False, default_flow_style=False),
        encoding="utf-8",
    )
