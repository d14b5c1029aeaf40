"""VAE architectures on raw waveforms, plus the bottleneck classifier.

Two encoder/decoder pairs are provided:

* ``DC`` — a dilated-convolution model: an entry convolution, a 50-layer
  gated residual dilation block, and a stride-2 downsampling stack.
* ``CC`` — a plain strided-convolution model with channel counts
  128/128/256/512/1024.

Both compress the waveform by a factor of 32 before the dense bottleneck
(mu and log_var heads), and both decode back to exactly the input length
with a tanh-bounded output. A small dense classifier reads class logits
off the latent vector.
"""

from __future__ import annotations

import hashlib
import json
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import CheckpointError

COMPRESSION_FACTOR = 32
CHECKPOINT_VERSION = 1


def receptive_field(num_layers: int, m: int) -> int:
    """Input span seen by one output of a kernel-2 causal dilation stack.

    The stack's dilation cycles through 2^0 .. 2^(m-1) every m layers, so
    num_layers must be a whole number of cycles. For the full 50-layer
    block this gives 5119 samples at m=10 and 319 at m=5.
    """
    if num_layers <= 0 or m <= 0:
        raise ValueError(f"num_layers and m must be positive, got ({num_layers}, {m})")
    if num_layers % m != 0:
        raise ValueError(f"m ({m}) must divide num_layers ({num_layers})")
    return (num_layers // m) * 2**m - 1


@dataclass(frozen=True)
class DilationBlockSpec:
    """Geometry of the gated residual dilation block."""

    num_layers: int = 50
    channels: int = 32
    kernel: int = 2
    m1: int = 10
    m2: int = 5

    def __post_init__(self):
        if min(self.num_layers, self.channels, self.kernel, self.m1, self.m2) <= 0:
            raise ValueError("all DilationBlockSpec fields must be positive")

    def dilations(self, sub: int) -> list[int]:
        """Dilation of each layer for parallel sub-convolution 1 or 2."""
        m = self.m1 if sub == 1 else self.m2
        return [2 ** ((i - 1) % m) for i in range(1, self.num_layers + 1)]


@dataclass(frozen=True)
class ClassifierSpec:
    """Hidden widths and output size of the bottleneck classifier."""

    hidden_layers: tuple[int, ...]
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("classifier needs at least 2 classes")
        if any(w <= 0 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be positive")
        object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))


def digit_classifier_spec(num_classes: int = 10) -> ClassifierSpec:
    """Three hidden layers of 10 units — the spoken-digit setting."""
    return ClassifierSpec(hidden_layers=(10, 10, 10), num_classes=num_classes)


def drum_classifier_spec(num_classes: int) -> ClassifierSpec:
    """One hidden layer as wide as the number of clusters — the drum setting."""
    return ClassifierSpec(hidden_layers=(num_classes,), num_classes=num_classes)


@dataclass(frozen=True)
class LatentCode:
    """A bottleneck sample: mu, log_var, and z = mu + exp(log_var/2) * eps."""

    mu: np.ndarray
    log_var: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("mu", "log_var", "z"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 1-D vector")
            object.__setattr__(self, name, arr)
        if not (len(self.mu) == len(self.log_var) == len(self.z)):
            raise ValueError("mu, log_var, z must share one dimension")


class DilationBlock(nn.Module):
    """Stack of gated residual layers with cyclically growing dilation.

    Layer i (1-based) runs two parallel causal convolutions of the input
    with dilations 2^mod(i-1, m1) and 2^mod(i-1, m2); their gated product
    tanh(a) * sigmoid(b) is the layer's skip output, which is also added
    back onto the running input. The block returns the mean of all skip
    outputs, with temporal length preserved via left zero-padding.
    """

    def __init__(self, spec: DilationBlockSpec):
        super().__init__()
        self.spec = spec
        c, k = spec.channels, spec.kernel
        self.sub1 = nn.ModuleList(
            nn.Conv1d(c, c, k, dilation=d) for d in spec.dilations(1)
        )
        self.sub2 = nn.ModuleList(
            nn.Conv1d(c, c, k, dilation=d) for d in spec.dilations(2)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.spec.channels:
            raise ValueError(
                f"expected {self.spec.channels} channels, got {x.shape[1]}"
            )
        k = self.spec.kernel
        skip_sum = torch.zeros_like(x)
        for conv1, conv2 in zip(self.sub1, self.sub2):
            pad1 = conv1.dilation[0] * (k - 1)
            pad2 = conv2.dilation[0] * (k - 1)
            a = conv1(F.pad(x, (pad1, 0)))
            b = conv2(F.pad(x, (pad2, 0)))
            skip = torch.tanh(a) * torch.sigmoid(b)
            x = x + skip
            skip_sum = skip_sum + skip
        return skip_sum / self.spec.num_layers


def dilation_block_forward(block: DilationBlock, x: torch.Tensor) -> torch.Tensor:
    """Run a dilation block on a (batch, channels, time) tensor."""
    return block(x)


class _Classifier(nn.Module):
    def __init__(self, latent_dim: int, spec: ClassifierSpec):
        super().__init__()
        widths = [latent_dim, *spec.hidden_layers]
        self.hidden = nn.ModuleList(
            nn.Linear(a, b) for a, b in zip(widths[:-1], widths[1:])
        )
        self.out = nn.Linear(widths[-1], spec.num_classes)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        # tanh keeps gradients alive near z = 0 (zero-bias ReLU layers die
        # there, and early KL pressure parks latents exactly at 0)
        for layer in self.hidden:
            z = torch.tanh(layer(z))
        return self.out(z)


class _DcEncoder(nn.Module):
    def __init__(self, input_len, latent_dim, entry_filters, block_spec):
        super().__init__()
        c = block_spec.channels
        self.entry_kernel = 32
        self.conv_in = nn.Conv1d(1, entry_filters, self.entry_kernel)
        self.expand = nn.Conv1d(entry_filters, c, 1)
        self.block = DilationBlock(block_spec)
        downs = [nn.Conv1d(c, 1, 2, stride=2)]
        downs += [nn.Conv1d(1, 1, 2, stride=2) for _ in range(4)]
        self.down = nn.ModuleList(downs)
        self.squeeze = nn.Conv1d(1, 1, 1)
        self.fc_mu = nn.Linear(input_len // COMPRESSION_FACTOR, latent_dim)
        self.fc_logvar = nn.Linear(input_len // COMPRESSION_FACTOR, latent_dim)

    def forward(self, x):
        k = self.entry_kernel
        x = F.pad(x, ((k - 1) // 2, k // 2))
        x = F.relu(self.conv_in(x))
        x = F.relu(self.expand(x))
        x = self.block(x)
        # tanh, not ReLU, on the single-channel stages: a 1-channel conv
        # whose kernel draws all-negative would zero a ReLU path for every
        # input and freeze training.
        for conv in self.down:
            x = torch.tanh(conv(x))
        x = torch.tanh(self.squeeze(x))
        x = x.flatten(1)
        return self.fc_mu(x), self.fc_logvar(x)


class _DcDecoder(nn.Module):
    def __init__(self, input_len, latent_dim, entry_filters, block_spec):
        super().__init__()
        c = block_spec.channels
        self.input_len = input_len
        self.exit_kernel = 32
        self.fc_z = nn.Linear(latent_dim, input_len // COMPRESSION_FACTOR)
        self.expand_t = nn.ConvTranspose1d(1, 1, 1)
        self.up = nn.ModuleList(
            nn.ConvTranspose1d(1, 1, 2, stride=2) for _ in range(5)
        )
        self.widen = nn.ConvTranspose1d(1, c, 1)
        self.block = DilationBlock(block_spec)
        self.narrow = nn.ConvTranspose1d(c, entry_filters, self.exit_kernel)
        self.conv_out = nn.ConvTranspose1d(entry_filters, 1, 1)

    def forward(self, z):
        x = self.fc_z(z).unsqueeze(1)
        # single-channel stages use tanh for the same reason as the encoder
        x = torch.tanh(self.expand_t(x))
        for conv in self.up:
            x = torch.tanh(conv(x))
        x = F.relu(self.widen(x))
        x = self.block(x)
        x = self.narrow(x)
        # undo the transposed entry kernel's length growth, mirroring the
        # encoder's asymmetric padding
        left = (self.exit_kernel - 1) // 2
        x = F.relu(x[:, :, left : left + self.input_len])
        return torch.tanh(self.conv_out(x))


class _CcEncoder(nn.Module):
    def __init__(self, input_len, latent_dim, channels):
        super().__init__()
        kernels = [5, 4, 4, 4, 4]
        paddings = [2, 1, 1, 1, 1]
        convs = []
        in_ch = 1
        for out_ch, k, p in zip(channels, kernels, paddings):
            convs.append(nn.Conv1d(in_ch, out_ch, k, stride=2, padding=p))
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        self.squeeze = nn.Conv1d(in_ch, 1, 1)
        self.fc_mu = nn.Linear(input_len // COMPRESSION_FACTOR, latent_dim)
        self.fc_logvar = nn.Linear(input_len // COMPRESSION_FACTOR, latent_dim)

    def forward(self, x):
        for conv in self.convs:
            x = F.relu(conv(x))
        # Center and unit-RMS the squeeze pre-activation over its time
        # positions before the bounded nonlinearity. The 1024-wide fan-in
        # amplifies the optimizer's fixed-size steps into multi-RMS
        # functional jumps that appear as a global offset (aligned weight
        # growth along the all-positive ReLU features, plus the bias), and
        # a few tens of such steps park the tanh in full saturation where
        # mu freezes as an input-independent constant. Normalizing the
        # pre-activation itself makes the seam invariant to any global
        # offset or scale runaway, so it cannot saturate. Parameter-free
        # and per-sample, so checkpoints, determinism, and batch-size
        # independence are unaffected.
        x = self.squeeze(x)
        if x.size(2) > 1:  # a single position would normalize to zero
            x = x - x.mean(dim=2, keepdim=True)
            x = x * torch.rsqrt(x.pow(2).mean(dim=2, keepdim=True) + 1e-6)
        # tanh, not ReLU, after the 1-channel squeeze: a ReLU here has no
        # channel redundancy, so one bad update zeroes it for every input
        # and freezes the whole encoder.
        x = torch.tanh(x)
        x = x.flatten(1)
        return self.fc_mu(x), self.fc_logvar(x)


class _CcDecoder(nn.Module):
    def __init__(self, input_len, latent_dim, channels):
        super().__init__()
        self.fc_z = nn.Linear(latent_dim, input_len // COMPRESSION_FACTOR)
        self.expand_t = nn.ConvTranspose1d(1, channels[-1], 1)
        rev = list(reversed(channels))
        ups = []
        for i in range(len(rev) - 1):
            ups.append(
                nn.ConvTranspose1d(rev[i], rev[i + 1], 4, stride=2, padding=1)
            )
        ups.append(
            nn.ConvTranspose1d(rev[-1], rev[-1], 5, stride=2, padding=2, output_padding=1)
        )
        self.up = nn.ModuleList(ups)
        self.conv_out = nn.ConvTranspose1d(rev[-1], 1, 1)

    def forward(self, z):
        x = self.fc_z(z).unsqueeze(1)
        x = F.relu(self.expand_t(x))
        for conv in self.up:
            x = F.relu(conv(x))
        return torch.tanh(self.conv_out(x))


class VaeModel(nn.Module):
    """Encoder, decoder and bottleneck classifier with their metadata.

    ``arch`` is "DC" or "CC". The build keyword arguments are kept on the
    instance so a checkpoint can reconstruct the exact same shapes.
    """

    def __init__(
        self,
        arch: str,
        input_len: int,
        latent_dim: int,
        seed: int,
        classifier_spec: ClassifierSpec,
        sample_rate: int,
        build_kwargs: dict,
    ):
        super().__init__()
        self.arch = arch
        self.input_len = input_len
        self.latent_dim = latent_dim
        self.seed = seed
        self.classifier_spec = classifier_spec
        self.sample_rate = sample_rate
        self.build_kwargs = dict(build_kwargs)

        if arch == "DC":
            block_spec = DilationBlockSpec(
                num_layers=build_kwargs["block_layers"],
                channels=build_kwargs["block_channels"],
                m1=build_kwargs["m1"],
                m2=build_kwargs["m2"],
            )
            entry = build_kwargs["entry_filters"]
            self.encoder = _DcEncoder(input_len, latent_dim, entry, block_spec)
            self.decoder = _DcDecoder(input_len, latent_dim, entry, block_spec)
        elif arch == "CC":
            channels = tuple(build_kwargs["conv_channels"])
            self.encoder = _CcEncoder(input_len, latent_dim, channels)
            self.decoder = _CcDecoder(input_len, latent_dim, channels)
        else:
            raise ValueError(f"unknown architecture tag: {arch!r}")
        self.classifier = _Classifier(latent_dim, classifier_spec)

        seeded_init(self, seed)

    @property
    def num_classes(self) -> int:
        return self.classifier_spec.num_classes

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.input_len:
            raise ValueError(
                f"expected input of shape (batch, 1, {self.input_len}), got "
                f"{tuple(x.shape)}"
            )
        return self.encoder(x)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise ValueError(
                f"expected latent batch of shape (batch, {self.latent_dim}), got "
                f"{tuple(z.shape)}"
            )
        return self.decoder(z)

    def classify(self, z: torch.Tensor) -> torch.Tensor:
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise ValueError(
                f"expected latent batch of shape (batch, {self.latent_dim}), got "
                f"{tuple(z.shape)}"
            )
        return self.classifier(z)

    def forward(
        self, x: torch.Tensor, eps: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """One full pass: returns (reconstruction, mu, log_var, z)."""
        mu, log_var = self.encode(x)
        z = reparameterize(mu, log_var, eps)
        return self.decode(z), mu, log_var, z


def _stable_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def seeded_init(model: nn.Module, seed: int) -> None:
    """Deterministically initialize every layer of a model.

    Weights are uniform in ±sqrt(6/fan_in) (the variance-preserving bound
    for rectifier nets) from a per-tensor generator seeded by a stable
    hash of (seed, parameter name); biases are zero. Independent of
    global RNG state and of build order elsewhere.
    """
    for mod_name, mod in model.named_modules():
        if isinstance(mod, nn.ConvTranspose1d):
            fan_in = mod.weight.shape[0] * mod.weight.shape[2]
        elif isinstance(mod, nn.Conv1d):
            fan_in = mod.weight.shape[1] * mod.weight.shape[2]
        elif isinstance(mod, nn.Linear):
            fan_in = mod.weight.shape[1]
        else:
            continue
        gen = torch.Generator().manual_seed(_stable_seed(seed, f"{mod_name}.weight"))
        bound = math.sqrt(6.0 / fan_in)
        with torch.no_grad():
            mod.weight.uniform_(-bound, bound, generator=gen)
            if mod.bias is not None:
                mod.bias.zero_()


def _check_input_len(input_len: int) -> None:
    if input_len % COMPRESSION_FACTOR != 0:
        raise ValueError(
            f"input_len must be divisible by {COMPRESSION_FACTOR}, got {input_len}"
        )


def build_dcvae(
    input_len: int,
    latent_dim: int,
    seed: int,
    num_classes: int = 10,
    classifier_hidden: tuple[int, ...] = (10, 10, 10),
    sample_rate: int = 8000,
    block_layers: int = 50,
    block_channels: int = 32,
    entry_filters: int = 16,
    m1: int = 10,
    m2: int = 5,
) -> VaeModel:
    """Construct the dilated-convolution VAE.

    Encoder: conv(entry_filters, k32, s1) → 1x1 channel adapter →
    dilation block → 5 stride-2 convs down to one channel →
    1x1 conv → dense mu / log_var. Decoder mirrors it with transposed
    convolutions and its own dilation block. Deterministic per seed.

    The default geometry matches the full model; the block and channel
    counts stay overridable so tests can build micro versions.
    """
    _check_input_len(input_len)
    kwargs = dict(
        block_layers=block_layers,
        block_channels=block_channels,
        entry_filters=entry_filters,
        m1=m1,
        m2=m2,
    )
    spec = ClassifierSpec(hidden_layers=classifier_hidden, num_classes=num_classes)
    return VaeModel("DC", input_len, latent_dim, seed, spec, sample_rate, kwargs)


def build_ccvae(
    input_len: int,
    latent_dim: int,
    seed: int,
    num_classes: int = 10,
    classifier_hidden: tuple[int, ...] = (10, 10, 10),
    sample_rate: int = 8000,
    conv_channels: tuple[int, ...] = (128, 128, 256, 512, 1024),
) -> VaeModel:
    """Construct the plain strided-convolution VAE.

    Encoder: five stride-2 convolutions (kernel 5 then 4s) through
    conv_channels, a 1x1 conv collapsing to one channel, then dense
    mu / log_var; the decoder is the transposed mirror ending in a 1x1
    transposed convolution with tanh output.
    """
    _check_input_len(input_len)
    if len(conv_channels) != 5:
        raise ValueError(f"conv_channels must list 5 layers, got {len(conv_channels)}")
    kwargs = dict(conv_channels=tuple(conv_channels))
    spec = ClassifierSpec(hidden_layers=classifier_hidden, num_classes=num_classes)
    return VaeModel("CC", input_len, latent_dim, seed, spec, sample_rate, kwargs)


def reparameterize(
    mu: torch.Tensor, log_var: torch.Tensor, eps: torch.Tensor
) -> torch.Tensor:
    """z = mu + exp(log_var / 2) * eps, elementwise."""
    if mu.shape != log_var.shape or mu.shape != eps.shape:
        raise ValueError(
            f"mu, log_var, eps shapes differ: {tuple(mu.shape)}, "
            f"{tuple(log_var.shape)}, {tuple(eps.shape)}"
        )
    return mu + torch.exp(log_var / 2) * eps


def _as_batch(model: VaeModel, clips) -> torch.Tensor:
    """Stack clips/arrays into a (batch, 1, input_len) float tensor."""
    rows = []
    for clip in clips:
        samples = getattr(clip, "samples", clip)
        samples = np.asarray(samples, dtype=np.float32)
        if samples.ndim != 1 or len(samples) != model.input_len:
            raise ValueError(
                f"each clip must have exactly {model.input_len} samples, got "
                f"{samples.shape}"
            )
        rows.append(samples)
    batch = torch.from_numpy(np.stack(rows)).unsqueeze(1)
    return batch.to(next(model.parameters()).dtype)


def encode(model: VaeModel, clips) -> tuple[np.ndarray, np.ndarray]:
    """Encode clips (or 1-D float arrays) to (mu, log_var) batches."""
    batch = _as_batch(model, clips)
    model.eval()
    with torch.no_grad():
        mu, log_var = model.encode(batch)
    return mu.numpy().astype(np.float64), log_var.numpy().astype(np.float64)


def decode(model: VaeModel, z) -> np.ndarray:
    """Decode a (batch, latent_dim) array of latents to waveform rows."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != model.latent_dim:
        raise ValueError(
            f"latent dimension mismatch: expected {model.latent_dim}, got {z.shape[1]}"
        )
    model.eval()
    with torch.no_grad():
        out = model.decode(
            torch.from_numpy(z).to(next(model.parameters()).dtype)
        )
    return out.squeeze(1).numpy().astype(np.float64)


def classify_latent(model: VaeModel, z) -> np.ndarray:
    """Class logits for a (batch, latent_dim) array of latents."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != model.latent_dim:
        raise ValueError(
            f"latent dimension mismatch: expected {model.latent_dim}, got {z.shape[1]}"
        )
    model.eval()
    with torch.no_grad():
        logits = model.classify(torch.from_numpy(z).to(next(model.parameters()).dtype))
    return logits.numpy().astype(np.float64)


def save_checkpoint(model: VaeModel, path) -> None:
    """Write a versioned npz container: JSON metadata plus every tensor."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "arch": model.arch,
        "input_len": model.input_len,
        "latent_dim": model.latent_dim,
        "seed": model.seed,
        "num_classes": model.num_classes,
        "classifier_hidden": list(model.classifier_spec.hidden_layers),
        "sample_rate": model.sample_rate,
        "build_kwargs": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in model.build_kwargs.items()
        },
        "dtype": str(next(model.parameters()).dtype).replace("torch.", ""),
    }
    arrays = {
        f"param/{name}": tensor.detach().numpy()
        for name, tensor in model.state_dict().items()
    }
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path, expect_arch: str | None = None) -> VaeModel:
    """Rebuild a model from a checkpoint, verifying every tensor shape.

    Pass expect_arch="DC" or "CC" to reject checkpoints of the other
    architecture instead of silently building whatever was stored.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no such checkpoint: {path}")
    try:
        archive = np.load(path)
        meta = json.loads(archive["meta"].tobytes().decode())
    except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {meta.get('version')}"
        )
    if expect_arch is not None and meta.get("arch") != expect_arch:
        raise CheckpointError(
            f"{path}: checkpoint holds a {meta.get('arch')} model, expected "
            f"{expect_arch}"
        )

    build_kwargs = {
        k: (tuple(v) if isinstance(v, list) else v)
        for k, v in meta["build_kwargs"].items()
    }
    spec = ClassifierSpec(
        hidden_layers=tuple(meta["classifier_hidden"]),
        num_classes=meta["num_classes"],
    )
    model = VaeModel(
        meta["arch"],
        meta["input_len"],
        meta["latent_dim"],
        meta["seed"],
        spec,
        meta["sample_rate"],
        build_kwargs,
    )
    if meta["dtype"] == "float64":
        model.double()

    state = model.state_dict()
    loaded = {}
    for name, tensor in state.items():
        key = f"param/{name}"
        if key not in archive:
            raise CheckpointError(f"{path}: missing tensor {name}")
        arr = archive[key]
        if tuple(arr.shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"{path}: tensor {name} has shape {arr.shape}, expected "
                f"{tuple(tensor.shape)}"
            )
        loaded[name] = torch.from_numpy(arr.copy())
    extra = {
        k.removeprefix("param/") for k in archive.files if k.startswith("param/")
    } - set(state)
    if extra:
        raise CheckpointError(f"{path}: unexpected tensors {sorted(extra)}")
    model.load_state_dict(loaded)
    model.eval()
    return model
