"""Alternating two-gradient training of the VAE with a bottleneck classifier.

Every batch triggers two sequential updates:

1. the gradient of ``lambda_recon * MSE + lambda_kl * KL`` steps the
   encoder and decoder at ``lr_vae``;
2. the gradient of ``lambda_class * cross-entropy`` steps the encoder and
   classifier (never the decoder) at ``lr_class``.

The recorded losses are the unweighted terms measured on the post-update
parameters, so loss curves describe the model you would checkpoint at
that moment. Both updates use adaptive moment estimation with
independent state; the update order is fixed and part of the
reproducibility contract.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .audio import DatasetSplit
from .errors import TrainingDivergedError
from .models import (
    VaeModel,
    load_checkpoint,
    reparameterize,
    save_checkpoint,
)

__all__ = [
    "LossWeights",
    "TrainConfig",
    "LossRecord",
    "TrainerState",
    "mse_loss",
    "kl_gaussian_standard",
    "cross_entropy",
    "train_step",
    "train",
    "write_loss_log",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class LossWeights:
    """Scale factors applied to the three loss terms."""

    lambda_recon: float = 1.0
    lambda_kl: float = 0.0001
    lambda_class: float = 1.01

    def __post_init__(self):
        if min(self.lambda_recon, self.lambda_kl, self.lambda_class) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters. Defaults are the digit preset."""

    epochs: int = 117
    batch_size: int = 10
    lr_vae: float = 0.0005
    lr_class: float = 0.001
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.lr_vae <= 0 or self.lr_class <= 0:
            raise ValueError("learning rates must be positive")


@dataclass(frozen=True)
class LossRecord:
    """Unweighted loss terms at one epoch (or one step)."""

    epoch: int
    recon: float
    kl: float
    class_ce: float

    def __post_init__(self):
        values = (self.recon, self.kl, self.class_ce)
        if not all(np.isfinite(v) for v in values):
            raise ValueError(f"loss record contains non-finite values: {values}")
        if min(values) < 0:
            raise ValueError(f"loss terms must be non-negative: {values}")


def mse_loss(x, y) -> torch.Tensor:
    """Mean over batch and samples of the squared difference."""
    x = torch.as_tensor(x)
    y = torch.as_tensor(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    return torch.mean((x - y) ** 2)


def kl_gaussian_standard(mu, log_var) -> torch.Tensor:
    """KL divergence of diagonal Gaussians N(mu, exp(log_var)) from N(0, I).

    Closed form 0.5 * sum_d(mu_d^2 + exp(log_var_d) - 1 - log_var_d),
    averaged over the batch dimension.
    """
    mu = torch.as_tensor(mu)
    log_var = torch.as_tensor(log_var)
    if mu.shape != log_var.shape:
        raise ValueError(
            f"shape mismatch: {tuple(mu.shape)} vs {tuple(log_var.shape)}"
        )
    if not (torch.all(torch.isfinite(mu)) and torch.all(torch.isfinite(log_var))):
        raise ValueError("mu and log_var must be finite")
    if mu.ndim == 1:
        mu = mu.unsqueeze(0)
        log_var = log_var.unsqueeze(0)
    per_item = 0.5 * torch.sum(mu**2 + torch.exp(log_var) - 1 - log_var, dim=1)
    return per_item.mean()


def cross_entropy(logits, labels) -> torch.Tensor:
    """Mean negative log softmax probability of the true class."""
    logits = torch.as_tensor(logits)
    if logits.ndim == 1:
        logits = logits.unsqueeze(0)
    labels = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    if labels.shape[0] != logits.shape[0]:
        raise ValueError(
            f"{logits.shape[0]} logit rows but {labels.shape[0]} labels"
        )
    if labels.numel() and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValueError(
            f"label out of range for {logits.shape[1]} classes: "
            f"{int(labels.min())}..{int(labels.max())}"
        )
    return F.cross_entropy(logits, labels)


def _stream_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class TrainerState:
    """Model plus the mutable pieces of a training run.

    Holds the two optimizers (encoder+decoder at lr_vae, encoder+classifier
    at lr_class — each with its own moment estimates for the shared encoder
    parameters) and the seeded noise generator for reparameterization draws.
    """

    def __init__(self, model: VaeModel, cfg: TrainConfig):
        self.model = model
        self.cfg = cfg
        self.opt_vae = torch.optim.Adam(
            list(model.encoder.parameters()) + list(model.decoder.parameters()),
            lr=cfg.lr_vae,
        )
        self.opt_class = torch.optim.Adam(
            list(model.encoder.parameters()) + list(model.classifier.parameters()),
            lr=cfg.lr_class,
        )
        self.eps_generator = torch.Generator().manual_seed(
            _stream_seed(cfg.seed, "reparameterization-noise")
        )
        self.shuffle_generator = torch.Generator().manual_seed(
            _stream_seed(cfg.seed, "epoch-shuffle")
        )

    def draw_eps(self, batch_size: int) -> torch.Tensor:
        dtype = next(self.model.parameters()).dtype
        return torch.randn(
            batch_size,
            self.model.latent_dim,
            generator=self.eps_generator,
            dtype=dtype,
        )


def _require_finite(value: torch.Tensor, term: str) -> None:
    if not torch.isfinite(value):
        raise TrainingDivergedError(f"{term} loss became non-finite: {value.item()}")


def train_step(
    state: TrainerState,
    x: torch.Tensor,
    labels: torch.Tensor,
    epoch: int = 0,
    eps: torch.Tensor | None = None,
) -> LossRecord:
    """One alternating update on a batch; returns post-update losses.

    x is (batch, 1, input_len), labels (batch,). The same noise draw eps
    is reused for the VAE update and the loss recording pass, so recorded
    values are exactly reproducible from the post-update parameters and
    eps.
    """
    if x.shape[0] == 0:
        raise ValueError("batch is empty")
    model = state.model
    weights = state.cfg.weights
    if eps is None:
        eps = state.draw_eps(x.shape[0])

    # Update 1: reconstruction + KL, stepping encoder and decoder.
    model.zero_grad(set_to_none=True)
    recon, mu, log_var, _ = model(x, eps)
    recon_term = mse_loss(recon, x)
    kl_term = kl_gaussian_standard(mu, log_var)
    _require_finite(recon_term, "reconstruction")
    _require_finite(kl_term, "KL")
    vae_loss = weights.lambda_recon * recon_term + weights.lambda_kl * kl_term
    vae_loss.backward()
    state.opt_vae.step()

    # Update 2: classification at the bottleneck, stepping encoder and
    # classifier on the freshly updated encoder. The decoder is untouched.
    # The classifier reads the latent mean — the same noise-free vectors
    # the nearest-neighbor evaluation uses.
    model.zero_grad(set_to_none=True)
    mu2, _ = model.encode(x)
    ce_term = cross_entropy(model.classify(mu2), labels)
    _require_finite(ce_term, "classification")
    (weights.lambda_class * ce_term).backward()
    state.opt_class.step()
    model.zero_grad(set_to_none=True)

    with torch.no_grad():
        recon3, mu3, log_var3, _ = model(x, eps)
        record = LossRecord(
            epoch=epoch,
            recon=float(mse_loss(recon3, x)),
            kl=float(kl_gaussian_standard(mu3, log_var3)),
            class_ce=float(cross_entropy(model.classify(mu3), labels)),
        )
    return record


def _split_tensors(split: DatasetSplit, dtype) -> tuple[torch.Tensor, torch.Tensor]:
    x = np.stack([item.clip.samples for item in split.train])
    y = np.array([item.label for item in split.train], dtype=np.int64)
    return torch.from_numpy(x).unsqueeze(1).to(dtype), torch.from_numpy(y)


def train(
    model: VaeModel,
    split: DatasetSplit,
    cfg: TrainConfig,
    checkpoint_path: str | os.PathLike | None = None,
    log_path: str | os.PathLike | None = None,
    progress: bool = False,
) -> tuple[VaeModel, list[LossRecord]]:
    """Run the full epoch loop with seeded shuffling.

    Batches are consecutive slices of a fresh seeded permutation each
    epoch; each epoch appends the mean of its per-step loss records. When
    checkpoint_path is given the model is saved after every epoch (and
    once at the end); log_path writes the loss curve as CSV. Identical
    seeds give bitwise-identical curves.
    """
    if not split.train:
        raise ValueError("training split is empty")
    if split.fixed_length != model.input_len:
        raise ValueError(
            f"dataset clips have {split.fixed_length} samples but the model "
            f"expects {model.input_len}"
        )

    state = TrainerState(model, cfg)
    dtype = next(model.parameters()).dtype
    x_all, y_all = _split_tensors(split, dtype)
    records: list[LossRecord] = []

    model.train()
    for epoch in range(cfg.epochs):
        order = torch.randperm(len(x_all), generator=state.shuffle_generator)
        step_records = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            step_records.append(train_step(state, x_all[idx], y_all[idx], epoch))
        records.append(
            LossRecord(
                epoch=epoch,
                recon=float(np.mean([r.recon for r in step_records])),
                kl=float(np.mean([r.kl for r in step_records])),
                class_ce=float(np.mean([r.class_ce for r in step_records])),
            )
        )
        if progress:
            r = records[-1]
            print(
                f"epoch {epoch + 1}/{cfg.epochs}  recon={r.recon:.6f}  "
                f"kl={r.kl:.4f}  ce={r.class_ce:.4f}",
                flush=True,
            )
        if checkpoint_path is not None:
            save_checkpoint(model, checkpoint_path)
    model.eval()

    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    if log_path is not None:
        write_loss_log(records, log_path)
    return model, records


def write_loss_log(records: list[LossRecord], path: str | os.PathLike) -> None:
    """Write the loss curve as UTF-8 CSV: epoch, recon, kl, class_ce."""
    lines = ["epoch,recon,kl,class_ce"]
    for r in records:
        lines.append(f"{r.epoch},{r.recon:.12g},{r.kl:.12g},{r.class_ce:.12g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
