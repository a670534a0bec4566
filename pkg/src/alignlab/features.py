"""Acoustic front end: MFCCs, per-speaker normalization, splicing, LDA.

The front end is a conventional 13-cepstra MFCC pipeline (pre-emphasis,
Hamming window, mel filterbank on the HTK scale, orthonormal DCT-II)
with delta and delta-delta appended for the 39-dim configuration.
Dimensionality reduction for later training stages splices static
frames and projects them with a regularized Fisher discriminant.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.linalg

from .audio import AudioClip, resample_clip
from .errors import FeatureError

VARIANCE_FLOOR = 1e-6
LDA_RIDGE = 1e-4


@dataclass(frozen=True)
class FeatureConfig:
    frame_length: float = 0.025
    frame_hop: float = 0.010
    pre_emphasis: float = 0.97
    mel_filters: int = 23
    cepstra: int = 13
    delta_window: int = 2
    sample_rate: int = 16000
    mel_low_hz: float = 20.0

    def __post_init__(self):
        if self.frame_hop > self.frame_length:
            raise FeatureError("frame hop must not exceed frame length")
        if self.cepstra > self.mel_filters:
            raise FeatureError("cannot keep more cepstra than mel filters")

    @property
    def window_samples(self) -> int:
        return int(round(self.frame_length * self.sample_rate))

    @property
    def hop_samples(self) -> int:
        return int(round(self.frame_hop * self.sample_rate))

    @property
    def fft_size(self) -> int:
        n = 1
        while n < self.window_samples:
            n *= 2
        return n


@dataclass(frozen=True)
class FeatureMatrix:
    """Frames-by-dims matrix plus the frame->time mapping."""

    data: np.ndarray
    frame_hop: float
    origin: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise FeatureError("feature matrix must be 2-D")
        if data.size and not np.all(np.isfinite(data)):
            raise FeatureError("feature matrix contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    def frame_time(self, index: int) -> float:
        return self.origin + index * self.frame_hop

    def with_data(self, data: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(data, self.frame_hop, self.origin)


@dataclass(frozen=True)
class SpeakerStats:
    speaker_id: str
    mean: np.ndarray
    variance: np.ndarray
    count: int

    def __post_init__(self):
        if self.count <= 0:
            raise FeatureError(f"speaker {self.speaker_id!r}: no frames")
        object.__setattr__(
            self, "variance", np.maximum(np.asarray(self.variance), VARIANCE_FLOOR)
        )


@dataclass(frozen=True)
class LdaTransform:
    matrix: np.ndarray  # (out_dim, in_dim)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or not np.all(np.isfinite(m)):
            raise FeatureError("LDA matrix must be a finite 2-D array")
        object.__setattr__(self, "matrix", m)

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]


def frame_count(n_samples: int, config: FeatureConfig) -> int:
    """Number of analysis frames for a signal of ``n_samples``."""
    window, hop = config.window_samples, config.hop_samples
    if n_samples < window:
        return 0
    return 1 + (n_samples - window) // hop


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: FeatureConfig) -> np.ndarray:
    """Triangular filters (mel_filters, fft_size//2 + 1)."""
    n_bins = config.fft_size // 2 + 1
    freqs = np.arange(n_bins) * config.sample_rate / config.fft_size
    edges = mel_to_hz(
        np.linspace(
            hz_to_mel(config.mel_low_hz),
            hz_to_mel(config.sample_rate / 2.0),
            config.mel_filters + 2,
        )
    )
    bank = np.zeros((config.mel_filters, n_bins))
    for m in range(config.mel_filters):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - freqs) / max(hi - mid, 1e-12)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def _deltas(x: np.ndarray, window: int) -> np.ndarray:
    """Standard regression deltas with edge replication."""
    n = x.shape[0]
    denom = 2.0 * sum(k * k for k in range(1, window + 1))
    padded = np.pad(x, ((window, window), (0, 0)), mode="edge")
    out = np.zeros_like(x)
    for k in range(1, window + 1):
        out += k * (padded[window + k : window + k + n] - padded[window - k : window - k + n])
    return out / denom


def mfcc(
    clip: AudioClip, config: FeatureConfig | None = None, with_deltas: bool = True
) -> FeatureMatrix:
    """Extract MFCCs; 39 dims with deltas, 13 static otherwise."""
    config = config or FeatureConfig()
    if clip.sample_rate != config.sample_rate:
        clip = resample_clip(clip, config.sample_rate)
    x = clip.samples.astype(np.float64)
    window, hop = config.window_samples, config.hop_samples
    n_frames = frame_count(len(x), config)
    if n_frames < 1:
        raise FeatureError(
            f"clip of {len(x)} samples shorter than one frame ({window} samples)"
        )
    emphasized = np.empty_like(x)
    emphasized[0] = x[0] * (1.0 - config.pre_emphasis)
    emphasized[1:] = x[1:] - config.pre_emphasis * x[:-1]

    frames = np.lib.stride_tricks.sliding_window_view(emphasized, window)[::hop][:n_frames]
    frames = frames * np.hamming(window)
    spectrum = np.fft.rfft(frames, n=config.fft_size, axis=1)
    power = np.abs(spectrum) ** 2
    energies = power @ mel_filterbank(config).T
    log_mel = np.log(np.maximum(energies, 1e-10))
    cepstra = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)[:, : config.cepstra]

    if with_deltas:
        d1 = _deltas(cepstra, config.delta_window)
        d2 = _deltas(d1, config.delta_window)
        cepstra = np.hstack([cepstra, d1, d2])
    return FeatureMatrix(cepstra, config.frame_hop)


def cmvn(
    features_by_speaker: dict[str, list[FeatureMatrix]]
) -> tuple[dict[str, list[FeatureMatrix]], dict[str, SpeakerStats]]:
    """Per-speaker mean/variance normalization.

    Every dimension ends up zero-mean unit-variance over each speaker's
    pooled frames (variance floored for constant dimensions).
    """
    normalized: dict[str, list[FeatureMatrix]] = {}
    stats: dict[str, SpeakerStats] = {}
    for speaker in sorted(features_by_speaker):
        mats = features_by_speaker[speaker]
        if not mats or sum(m.frames for m in mats) == 0:
            raise FeatureError(f"speaker {speaker!r}: no frames for CMVN")
        stacked = np.vstack([m.data for m in mats])
        mean = stacked.mean(axis=0)
        variance = np.maximum(stacked.var(axis=0), VARIANCE_FLOOR)
        scale = 1.0 / np.sqrt(variance)
        stats[speaker] = SpeakerStats(speaker, mean, variance, stacked.shape[0])
        normalized[speaker] = [m.with_data((m.data - mean) * scale) for m in mats]
    return normalized, stats


def splice(features: FeatureMatrix, context: int = 3) -> FeatureMatrix:
    """Concatenate +-context frames around each frame (edges replicated)."""
    if context < 0:
        raise FeatureError("context must be non-negative")
    x = features.data
    n = x.shape[0]
    padded = np.pad(x, ((context, context), (0, 0)), mode="edge")
    pieces = [padded[k : k + n] for k in range(2 * context + 1)]
    return features.with_data(np.hstack(pieces))


def estimate_lda(
    features: np.ndarray,
    labels: np.ndarray,
    out_dim: int = 40,
    ridge: float = LDA_RIDGE,
) -> LdaTransform:
    """Fisher discriminant projection from labeled frames.

    Rows of the result are the top generalized eigenvectors of the
    between-class versus (ridge-regularized) within-class scatter,
    orthonormal under the within-class metric.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise FeatureError("features must be (frames, dims)")
    n, d = features.shape
    classes = np.unique(labels)
    if len(classes) < 2:
        raise FeatureError(f"LDA needs >= 2 classes, got {len(classes)}")
    if n <= d:
        raise FeatureError(f"LDA needs more frames ({n}) than dimensions ({d})")
    if out_dim > d:
        warnings.warn(f"LDA out_dim {out_dim} reduced to input dimension {d}")
        out_dim = d

    global_mean = features.mean(axis=0)
    within = np.zeros((d, d))
    between = np.zeros((d, d))
    for cls in classes:
        rows = features[labels == cls]
        mean = rows.mean(axis=0)
        centered = rows - mean
        within += centered.T @ centered
        offset = (mean - global_mean)[:, None]
        between += rows.shape[0] * (offset @ offset.T)
    within /= n
    between /= n
    within += ridge * np.eye(d)

    eigvals, eigvecs = scipy.linalg.eigh(between, within)
    order = np.argsort(eigvals)[::-1]
    if eigvals[order[0]] < 1e-10:
        warnings.warn("LDA: class distributions are indistinguishable; directions arbitrary")
    basis = eigvecs[:, order[:out_dim]].T
    # Fix signs so serialization is stable run to run.
    for row in basis:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return LdaTransform(basis)


def apply_transform(features: FeatureMatrix, transform: LdaTransform) -> FeatureMatrix:
    if features.dims != transform.in_dim:
        raise FeatureError(
            f"feature dims {features.dims} do not match transform input {transform.in_dim}"
        )
    return features.with_data(features.data @ transform.matrix.T)


def write_features(features: FeatureMatrix, utterance_id: str, path: str | Path) -> None:
    """Debug dump: text header then little-endian float64 frames."""
    data = features.data
    header = (
        f"alignlab-features 1\nid {utterance_id}\nframes {data.shape[0]}\n"
        f"dims {data.shape[1]}\nhop {features.frame_hop:.9f}\norigin {features.origin:.9f}\n"
        "data\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(data.astype("<f8").tobytes())


def read_features(path: str | Path) -> tuple[FeatureMatrix, str]:
    blob = Path(path).read_bytes()
    marker = blob.index(b"data\n") + len(b"data\n")
    fields = dict(
        line.split(" ", 1) for line in blob[:marker].decode("utf-8").splitlines()[1:-1]
    )
    frames, dims = int(fields["frames"]), int(fields["dims"])
    data = np.frombuffer(blob[marker:], dtype="<f8").reshape(frames, dims)
    return (
        FeatureMatrix(data.copy(), float(fields["hop"]), float(fields["origin"])),
        fields["id"],
    )
