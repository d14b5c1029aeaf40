"""Latent-space quality measures and reports.

Covers 1-nearest-neighbor classification of latent vectors, per-class
latent centers, the standardized MFCC-DTW deviation score (how close the
decoded class center sounds to each class member, relative to intra-class
distances), and a deterministic 2-D projection for plotting.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .audio import AudioClip, DatasetSplit, LabeledClip
from .errors import DegenerateClassError
from .features import MfccConfig, dtw, mfcc
from .models import VaeModel, decode, encode

_ENCODE_BATCH = 32


class LatentEntry(NamedTuple):
    source_id: str
    label: int
    mu: np.ndarray


@dataclass
class LatentDataset:
    """Latent mean vectors with their labels, in input order."""

    entries: list[LatentEntry]
    latent_dim: int

    def __post_init__(self):
        for entry in self.entries:
            if entry.mu.shape != (self.latent_dim,):
                raise ValueError(
                    f"{entry.source_id}: mu has shape {entry.mu.shape}, expected "
                    f"({self.latent_dim},)"
                )
            if not np.all(np.isfinite(entry.mu)):
                raise ValueError(f"{entry.source_id}: non-finite latent vector")

    def __len__(self) -> int:
        return len(self.entries)

    def matrix(self) -> np.ndarray:
        return np.stack([e.mu for e in self.entries])

    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=np.int64)

    def classes(self) -> list[int]:
        return sorted({e.label for e in self.entries})


def project_dataset(model: VaeModel, clips: list[LabeledClip]) -> LatentDataset:
    """Encode labeled clips to their latent means (noise-free, eps = 0)."""
    entries: list[LatentEntry] = []
    for start in range(0, len(clips), _ENCODE_BATCH):
        chunk = clips[start : start + _ENCODE_BATCH]
        mu, _ = encode(model, [item.clip for item in chunk])
        entries.extend(
            LatentEntry(item.source_id, item.label, mu[i])
            for i, item in enumerate(chunk)
        )
    return LatentDataset(entries=entries, latent_dim=model.latent_dim)


def knn1_accuracy(train: LatentDataset, test: LatentDataset) -> float:
    """Fraction of test entries whose nearest train entry shares their label.

    Euclidean distance; ties resolve to the lowest train index.
    """
    if not train.entries or not test.entries:
        raise ValueError("both latent sets must be non-empty")
    if train.latent_dim != test.latent_dim:
        raise ValueError(
            f"latent dims differ: {train.latent_dim} vs {test.latent_dim}"
        )
    ref = train.matrix()
    ref_labels = train.labels()
    queries = test.matrix()
    diffs = queries[:, None, :] - ref[None, :, :]
    sq_dists = np.sum(diffs * diffs, axis=2)
    nearest = np.argmin(sq_dists, axis=1)  # first index wins ties
    return float(np.mean(ref_labels[nearest] == test.labels()))


def knn1_accuracy_loo(latent: LatentDataset) -> float:
    """Leave-one-out 1-NN accuracy within a single latent set.

    Each entry is queried against all the others; without the exclusion
    every point would trivially match itself.
    """
    if len(latent) < 2:
        raise ValueError("need at least 2 entries for leave-one-out scoring")
    x = latent.matrix()
    labels = latent.labels()
    diffs = x[:, None, :] - x[None, :, :]
    sq_dists = np.sum(diffs * diffs, axis=2)
    np.fill_diagonal(sq_dists, np.inf)
    nearest = np.argmin(sq_dists, axis=1)
    return float(np.mean(labels[nearest] == labels))


def class_center(latent: LatentDataset, label: int) -> np.ndarray:
    """Arithmetic mean of the latent vectors belonging to one class."""
    members = [e.mu for e in latent.entries if e.label == label]
    if not members:
        raise ValueError(f"class {label} has no members")
    return np.mean(np.stack(members), axis=0)


def population_std(values) -> float:
    """Population (divide-by-n) standard deviation; needs at least 2 values."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size < 2:
        raise ValueError(f"need at least 2 values, got {arr.size}")
    return float(np.sqrt(np.mean((arr - arr.mean()) ** 2)))


def standardized_deviation(dtw_to_center: float, dtw_within_class) -> float:
    """Standardize a center distance against intra-class distances.

    Returns (dtw_to_center - mean(D)) / std(D) with population std, where
    D are the distances from one clip to the other members of its class.
    Negative values mean the decoded center is closer to the clip than
    its classmates typically are.
    """
    values = np.asarray(list(dtw_within_class), dtype=np.float64)
    if values.size < 2:
        raise ValueError(f"need at least 2 intra-class distances, got {values.size}")
    spread = population_std(values)
    if spread == 0.0:
        raise DegenerateClassError(
            "intra-class distances have zero spread; deviation is undefined"
        )
    return float((dtw_to_center - values.mean()) / spread)


def mfcc_dtw_deviation(
    clip: AudioClip,
    class_clips: list[AudioClip],
    decoded_center: AudioClip,
    cfg: MfccConfig,
) -> float:
    """Standardized MFCC-DTW score of one clip against its decoded class center.

    class_clips must be the clip's classmates excluding the clip itself.
    """
    if len(class_clips) < 2:
        raise ValueError(
            f"need at least 2 classmates to standardize, got {len(class_clips)}"
        )
    clip_seq = mfcc(clip, cfg)
    center_dist = dtw(clip_seq, mfcc(decoded_center, cfg))
    within = [dtw(clip_seq, mfcc(other, cfg)) for other in class_clips]
    return standardized_deviation(center_dist, within)


@dataclass(frozen=True)
class DeviationRow:
    label: int
    mean: float
    std: float
    count: int


@dataclass
class DeviationReport:
    """Per-class mean/std of deviation scores, plus their column averages."""

    rows: list[DeviationRow]
    overall_mean: float
    overall_std: float
    std_convention: str = "population"
    metadata: dict = field(default_factory=dict)


def deviation_report(
    model: VaeModel,
    split: DatasetSplit,
    cfg: MfccConfig,
    metadata: dict | None = None,
) -> DeviationReport:
    """Score every test clip against its class's decoded latent center.

    Centers are the means of the test-set latents per class; each is
    decoded once, then every class member is scored against it with the
    remaining members as the intra-class reference. The overall row
    averages the per-class means and stds.
    """
    if not split.test:
        raise ValueError("deviation report needs a non-empty test split")
    latent = project_dataset(model, split.test)
    by_class: dict[int, list[LabeledClip]] = {}
    for item in split.test:
        by_class.setdefault(item.label, []).append(item)

    rows: list[DeviationRow] = []
    for label in sorted(by_class):
        members = by_class[label]
        center = class_center(latent, label)
        decoded = decode(model, center[None, :])[0]
        center_clip = AudioClip(
            samples=decoded.astype(np.float32), sample_rate=split.sample_rate
        )
        devs = []
        for j, item in enumerate(members):
            others = [m.clip for i, m in enumerate(members) if i != j]
            devs.append(mfcc_dtw_deviation(item.clip, others, center_clip, cfg))
        rows.append(
            DeviationRow(
                label=label,
                mean=float(np.mean(devs)),
                std=population_std(devs),
                count=len(devs),
            )
        )

    return DeviationReport(
        rows=rows,
        overall_mean=float(np.mean([r.mean for r in rows])),
        overall_std=float(np.mean([r.std for r in rows])),
        metadata=dict(metadata or {}),
    )


def write_deviation_csv(report: DeviationReport, path: str | os.PathLike) -> None:
    """Write a deviation report as CSV with run metadata in comment lines."""
    lines = [f"# std_convention={report.std_convention}"]
    for key, value in sorted(report.metadata.items()):
        lines.append(f"# {key}={value}")
    lines.append("class,mean,std,count")
    for row in report.rows:
        lines.append(f"{row.label},{row.mean:.8f},{row.std:.8f},{row.count}")
    lines.append(f"overall,{report.overall_mean:.8f},{report.overall_std:.8f},-")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class ProjectionExport:
    """2-D principal-component view of a latent dataset.

    basis rows are orthonormal (unless degenerate, where the missing
    directions are zero-padded and flagged); coordinates are the centered
    data expressed in that basis, so a new vector v maps to
    (v - mean) @ basis.T; explained_variance holds the captured fraction
    of total variance per axis.
    """

    entries: list[tuple[str, int, float, float]]
    basis: np.ndarray
    mean: np.ndarray
    explained_variance: np.ndarray
    degenerate: bool

    def project(self, v: np.ndarray) -> np.ndarray:
        """Map a latent vector (or batch) into the 2-D view."""
        return (np.atleast_2d(v) - self.mean) @ self.basis.T


def export_projection_2d(latent: LatentDataset) -> ProjectionExport:
    """Project latents onto their top-2 variance directions.

    Deterministic: the sign of each basis row is fixed so its
    largest-magnitude entry is positive. Datasets of rank < 2 get a
    zero-padded second axis and degenerate=True.
    """
    if len(latent) < 2:
        raise ValueError("need at least 2 entries to project")
    x = latent.matrix().astype(np.float64)
    centered = x - x.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)

    total = float(np.sum(singular**2))
    rank_tol = singular[0] * 1e-9 if singular.size else 0.0
    basis = np.zeros((2, latent.latent_dim))
    fractions = np.zeros(2)
    degenerate = False
    for axis in range(2):
        if axis < singular.size and singular[axis] > rank_tol:
            row = vt[axis]
            if row[np.argmax(np.abs(row))] < 0:
                row = -row
            basis[axis] = row
            fractions[axis] = singular[axis] ** 2 / total
        else:
            degenerate = True

    coords = centered @ basis.T
    entries = [
        (e.source_id, e.label, float(coords[i, 0]), float(coords[i, 1]))
        for i, e in enumerate(latent.entries)
    ]
    return ProjectionExport(
        entries=entries,
        basis=basis,
        mean=x.mean(axis=0),
        explained_variance=fractions,
        degenerate=degenerate,
    )


def write_projection_csv(export: ProjectionExport, path: str | os.PathLike) -> None:
    """Write projected points as CSV: source_id, label, x, y."""
    lines = ["source_id,label,x,y"]
    for source_id, label, x, y in export.entries:
        lines.append(f"{source_id},{label},{x:.8f},{y:.8f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_latents_csv(latent: LatentDataset, path: str | os.PathLike) -> None:
    """Write raw latent vectors as CSV so external tools can re-embed them."""
    header = "source_id,label," + ",".join(
        f"mu{i}" for i in range(latent.latent_dim)
    )
    lines = [header]
    for entry in latent.entries:
        coords = ",".join(f"{v:.10g}" for v in entry.mu)
        lines.append(f"{entry.source_id},{entry.label},{coords}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
