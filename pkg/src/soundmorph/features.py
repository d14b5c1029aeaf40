"""Signal features: MFCC extraction, dynamic time warping, k-means clustering.

These are the analysis tools used to score reconstructions (MFCC + DTW)
and to label drum corpora by their attack character (averaged MFCCs of the
first 70 ms, clustered with k-means).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@dataclass(frozen=True)
class MfccConfig:
    """Parameters of the MFCC pipeline. Durations are in milliseconds."""

    num_coeffs: int
    window_len: float
    hop_len: float
    num_mel_filters: int
    fft_size: int
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.num_coeffs <= 0 or self.num_mel_filters <= 0:
            raise ValueError("num_coeffs and num_mel_filters must be positive")
        if self.num_coeffs > self.num_mel_filters:
            raise ValueError(
                f"num_coeffs ({self.num_coeffs}) cannot exceed num_mel_filters "
                f"({self.num_mel_filters})"
            )
        if self.window_len < self.hop_len:
            raise ValueError("window_len must be at least hop_len")
        if self.hop_len <= 0:
            raise ValueError("hop_len must be positive")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    def window_samples(self, sample_rate: int) -> int:
        return int(self.window_len * sample_rate / 1000)

    def hop_samples(self, sample_rate: int) -> int:
        return int(self.hop_len * sample_rate / 1000)


def digit_mfcc_config() -> MfccConfig:
    """MFCC setting used for digit-reconstruction scoring.

    20 coefficients over 25 ms windows with a 10 ms hop and 40 mel filters;
    the FFT size is the next power of two above the 200-sample window.
    """
    return MfccConfig(
        num_coeffs=20, window_len=25.0, hop_len=10.0, num_mel_filters=40, fft_size=256
    )


def drum_attack_mfcc_config() -> MfccConfig:
    """MFCC setting for drum attack features: 20 coefficients on 10 ms windows."""
    return MfccConfig(
        num_coeffs=20, window_len=10.0, hop_len=10.0, num_mel_filters=40, fft_size=256
    )


@dataclass(frozen=True)
class MfccSequence:
    """A matrix of cepstral frames, one row per analysis window."""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError(f"expected a non-empty 2-D frame matrix, got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("MFCC frames contain non-finite values")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_coeffs(self) -> int:
        return self.frames.shape[1]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(num_filters: int, fft_size: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank over the rfft bins, (num_filters, fft_size//2 + 1).

    Filter edges are spaced uniformly on the mel scale between 0 Hz and the
    Nyquist frequency; each triangle is linear in Hz across the bin
    frequencies.
    """
    nyquist = sample_rate / 2.0
    mel_points = np.linspace(_hz_to_mel(0.0), _hz_to_mel(nyquist), num_filters + 2)
    hz_points = _mel_to_hz(mel_points)
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size

    bank = np.zeros((num_filters, fft_size // 2 + 1))
    for m in range(num_filters):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def _dct_ortho_matrix(num_coeffs: int, num_inputs: int) -> np.ndarray:
    """First num_coeffs rows of the orthonormal DCT-II matrix."""
    n = np.arange(num_inputs)
    k = np.arange(num_coeffs)[:, None]
    mat = np.cos(np.pi * k * (2 * n + 1) / (2 * num_inputs)) * np.sqrt(2.0 / num_inputs)
    mat[0] /= np.sqrt(2.0)
    return mat


def mfcc(clip: AudioClip, cfg: MfccConfig) -> MfccSequence:
    """Compute MFCC frames for a clip.

    Pipeline: frame → Hann window → rfft magnitude → mel filterbank →
    log (floored at cfg.log_floor) → orthonormal DCT-II, keeping the first
    cfg.num_coeffs coefficients (including the 0th, energy-like one).
    """
    win = cfg.window_samples(clip.sample_rate)
    hop = cfg.hop_samples(clip.sample_rate)
    if cfg.fft_size < win:
        raise ValueError(f"fft_size {cfg.fft_size} is smaller than the window ({win})")
    if len(clip) < win:
        raise ValueError(
            f"clip of {len(clip)} samples is shorter than one {win}-sample window"
        )

    samples = clip.samples.astype(np.float64)
    num_frames = (len(samples) - win) // hop + 1
    window = np.hanning(win)
    bank = mel_filterbank(cfg.num_mel_filters, cfg.fft_size, clip.sample_rate)
    dct = _dct_ortho_matrix(cfg.num_coeffs, cfg.num_mel_filters)

    frames = np.empty((num_frames, cfg.num_coeffs))
    for i in range(num_frames):
        frame = samples[i * hop : i * hop + win] * window
        spectrum = np.abs(np.fft.rfft(frame, n=cfg.fft_size))
        energies = bank @ spectrum
        logs = np.log(np.maximum(energies, cfg.log_floor))
        frames[i] = dct @ logs
    return MfccSequence(frames=frames)


def write_frames_csv(seq: MfccSequence, path: str | os.PathLike) -> None:
    """Dump a feature matrix as UTF-8 CSV, one analysis frame per row."""
    lines = [",".join(f"{v:.10g}" for v in row) for row in seq.frames]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def dtw(a: MfccSequence, b: MfccSequence) -> float:
    """Dynamic-time-warping distance between two frame sequences.

    Cumulative Euclidean frame distance over the cheapest monotone
    alignment with steps {(1,0),(0,1),(1,1)}, both endpoints anchored.
    The value is not normalized by path length.
    """
    if a.num_coeffs != b.num_coeffs:
        raise ValueError(
            f"coefficient dimensions differ: {a.num_coeffs} vs {b.num_coeffs}"
        )
    x, y = a.frames, b.frames
    n, m = len(x), len(y)
    # Pairwise Euclidean distances, then the classic DP over the cost grid.
    diffs = x[:, None, :] - y[None, :, :]
    local = np.sqrt(np.sum(diffs * diffs, axis=2))

    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = local[i - 1, j - 1] + min(
                acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1]
            )
    return float(acc[n, m])


DRUM_ATTACK_MS = 70.0


def drum_attack_features(clip: AudioClip) -> np.ndarray:
    """Average the MFCCs of the first 70 ms into a single 20-vector.

    This is the attack descriptor used to cluster drum hits: 20
    coefficients on consecutive 10 ms windows restricted to the onset.
    """
    cfg = drum_attack_mfcc_config()
    attack_len = int(DRUM_ATTACK_MS * clip.sample_rate / 1000)
    if len(clip) < attack_len:
        raise ValueError(
            f"clip of {len(clip)} samples is shorter than the "
            f"{attack_len}-sample attack window"
        )
    attack = AudioClip(samples=clip.samples[:attack_len], sample_rate=clip.sample_rate)
    seq = mfcc(attack, cfg)
    return seq.frames.mean(axis=0)


@dataclass(frozen=True)
class ClusterModel:
    """k centroids in feature space plus the seed that produced them."""

    centroids: np.ndarray
    k: int
    seed: int

    def __post_init__(self):
        centroids = np.asarray(self.centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[0] != self.k:
            raise ValueError(
                f"expected a ({self.k}, dim) centroid matrix, got {centroids.shape}"
            )
        if self.k < 1:
            raise ValueError("k must be at least 1")
        for i in range(self.k):
            for j in range(i + 1, self.k):
                if np.array_equal(centroids[i], centroids[j]):
                    raise ValueError(f"centroids {i} and {j} coincide")
        object.__setattr__(self, "centroids", centroids)


def kmeans_fit(vectors, k: int, seed: int) -> ClusterModel:
    """Lloyd's k-means with seeded initialization.

    Initial centroids are k pairwise-distinct input vectors chosen by a
    seeded uniform draw. Iteration stops at an assignment fixpoint or
    after 300 rounds; an emptied cluster keeps its previous centroid.
    Deterministic for a given (vectors, k, seed).
    """
    data = np.asarray(list(vectors), dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"expected a list of equal-length vectors, got shape {data.shape}")
    if len(data) < k:
        raise ValueError(f"need at least k={k} vectors, got {len(data)}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data))
    centroids: list[np.ndarray] = []
    for idx in order:
        if not any(np.array_equal(data[idx], c) for c in centroids):
            centroids.append(data[idx].copy())
        if len(centroids) == k:
            break
    if len(centroids) < k:
        raise ValueError(f"only {len(centroids)} distinct vectors, cannot seed k={k} clusters")
    centers = np.stack(centroids)

    assignments = None
    for _ in range(300):
        dists = np.linalg.norm(data[:, None, :] - centers[None, :, :], axis=2)
        new_assignments = np.argmin(dists, axis=1)  # argmin takes the lowest index on ties
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for c in range(k):
            members = data[assignments == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return ClusterModel(centroids=centers, k=k, seed=seed)


def kmeans_objective(model: ClusterModel, vectors) -> float:
    """Sum of squared distances from each vector to its assigned centroid."""
    data = np.asarray(list(vectors), dtype=np.float64)
    dists = np.linalg.norm(data[:, None, :] - model.centroids[None, :, :], axis=2)
    return float(np.sum(np.min(dists, axis=1) ** 2))


def assign_cluster(model: ClusterModel, v) -> int:
    """Index of the nearest centroid (Euclidean), ties going to the lowest index."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.centroids.shape[1],):
        raise ValueError(
            f"vector of dim {v.shape} does not match centroids of dim "
            f"{model.centroids.shape[1]}"
        )
    dists = np.linalg.norm(model.centroids - v[None, :], axis=1)
    return int(np.argmin(dists))
