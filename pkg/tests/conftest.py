"""Shared fixtures: micro models, tiny datasets, and corpus directories.

The micro models use the same layer recipe as the full builds but with
tiny channel counts and a 32-sample input so forward passes, finite
differences, and short training loops stay fast.
"""

from __future__ import annotations

import numpy as np
import pytest
import torch

from soundmorph import models, synthdata
from soundmorph.audio import AudioClip, DatasetSplit, LabeledClip, save_wav, write_manifest

MICRO_LEN = 32
MICRO_LATENT = 4

torch.set_num_threads(1)


def build_micro(arch: str, seed: int = 0, latent_dim: int = MICRO_LATENT) -> models.VaeModel:
    if arch == "DC":
        return models.build_dcvae(
            MICRO_LEN,
            latent_dim,
            seed,
            num_classes=2,
            classifier_hidden=(4,),
            block_layers=2,
            block_channels=4,
            entry_filters=4,
            m1=2,
            m2=1,
        )
    return models.build_ccvae(
        MICRO_LEN,
        latent_dim,
        seed,
        num_classes=2,
        classifier_hidden=(4,),
        conv_channels=(4, 4, 8, 8, 8),
    )


@pytest.fixture(params=["DC", "CC"])
def micro_model(request):
    return build_micro(request.param)


@pytest.fixture
def dc_micro():
    return build_micro("DC")


@pytest.fixture
def cc_micro():
    return build_micro("CC")


def micro_clip(seed: int, length: int = MICRO_LEN, sample_rate: int = 8000) -> AudioClip:
    rng = np.random.default_rng(seed)
    samples = rng.uniform(-0.9, 0.9, length).astype(np.float32)
    return AudioClip(samples=samples, sample_rate=sample_rate)


def micro_split(
    num_classes: int = 2,
    per_class: int = 4,
    test_per_class: int = 0,
    length: int = MICRO_LEN,
    seed: int = 0,
) -> DatasetSplit:
    """A handmade split of random fixed-length clips with round-robin labels."""
    train, test = [], []
    counter = 0
    for label in range(num_classes):
        for i in range(per_class):
            clip = micro_clip(seed * 1000 + counter, length)
            item = LabeledClip(clip=clip, label=label, source_id=f"{label}_clip_{i:02d}.wav")
            (test if i < test_per_class else train).append(item)
            counter += 1
    return DatasetSplit(
        train=train,
        test=test,
        num_classes=num_classes,
        fixed_length=length,
        sample_rate=8000,
    )


@pytest.fixture(scope="session")
def digit_corpus(tmp_path_factory):
    """A full 500-file synthetic digit corpus on disk (10 classes x 50)."""
    root = tmp_path_factory.mktemp("digits")
    synthdata.generate_digit_corpus(root, seed=0)
    return root


@pytest.fixture(scope="session")
def drum_corpus(tmp_path_factory):
    """A small synthetic drum corpus on disk (15 clips across 5 families)."""
    root = tmp_path_factory.mktemp("drums")
    synthdata.generate_drum_corpus(root, total=15, seed=0)
    return root


@pytest.fixture
def micro_corpus(tmp_path):
    """Micro WAV corpus + manifest + checkpoint for CLI and service tests.

    Returns (corpus_dir, manifest_path, checkpoint_path, model): 2 classes
    with 4 train and 2 test clips each, 32 samples per clip, and a saved
    untrained CC micro model matching that geometry.
    """
    split = micro_split(num_classes=2, per_class=6, test_per_class=2)
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for item in split.all_clips():
        save_wav(item.clip, corpus / item.source_id)
    manifest = tmp_path / "manifest.tsv"
    write_manifest(split, manifest, root=corpus)

    model = build_micro("CC")
    checkpoint = tmp_path / "model.npz"
    models.save_checkpoint(model, checkpoint)
    return corpus, manifest, checkpoint, model
