"""WAV reading/writing and the in-memory audio clip type.

Reading accepts 8/16/24-bit PCM and 32-bit float RIFF files, mono or
stereo; everything is normalized to mono float32 in [-1, 1]. Writing
always produces 16-bit PCM mono. The RIFF handling is done directly with
``struct`` so that error messages and sample normalization are fully
under our control.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import WavFormatError

# WAVE format tags we understand.
_FMT_PCM = 0x0001
_FMT_FLOAT = 0x0003
_FMT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    """Mono audio: float samples in [-1, 1] plus a sample rate."""

    samples: np.ndarray
    sample_rate: int
    clamp_count: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise WavFormatError(f"sample rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise WavFormatError("AudioClip samples must be a 1-D array")
        if samples.size and not np.all(np.isfinite(samples)):
            raise WavFormatError("AudioClip samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def channel_count(self) -> int:
        return 1

    def __len__(self) -> int:
        return len(self.samples)


def _clamp(samples: np.ndarray) -> tuple[np.ndarray, int]:
    clipped = np.clip(samples, -1.0, 1.0)
    count = int(np.count_nonzero(clipped != samples))
    return clipped, count


def clamp_clip(samples: np.ndarray, sample_rate: int) -> AudioClip:
    """Build a clip from raw samples, clamping to [-1, 1] and counting."""
    samples, count = _clamp(np.asarray(samples, dtype=np.float64))
    return AudioClip(samples.astype(np.float32), sample_rate, clamp_count=count)


def _parse_fmt_chunk(body: bytes) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise WavFormatError("fmt chunk too short")
    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", body, 0)
    if tag == _FMT_EXTENSIBLE:
        if len(body) < 40:
            raise WavFormatError("extensible fmt chunk too short")
        # First two GUID bytes carry the real format tag.
        tag = struct.unpack_from("<H", body, 24)[0]
    return tag, channels, rate, bits


def _decode_samples(data: bytes, tag: int, bits: int) -> np.ndarray:
    if tag == _FMT_PCM and bits == 8:
        raw = np.frombuffer(data, dtype=np.uint8)
        return (raw.astype(np.float64) - 128.0) / 128.0
    if tag == _FMT_PCM and bits == 16:
        raw = np.frombuffer(data, dtype="<i2")
        return raw.astype(np.float64) / 32768.0
    if tag == _FMT_PCM and bits == 24:
        raw = np.frombuffer(data, dtype=np.uint8)
        if raw.size % 3:
            raise WavFormatError("24-bit data chunk length not a multiple of 3")
        b = raw.reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v & 0x800000, v - 0x1000000, v)
        return v.astype(np.float64) / 8388608.0
    if tag == _FMT_PCM and bits == 32:
        raw = np.frombuffer(data, dtype="<i4")
        return raw.astype(np.float64) / 2147483648.0
    if tag == _FMT_FLOAT and bits == 32:
        return np.frombuffer(data, dtype="<f4").astype(np.float64)
    name = {_FMT_PCM: "PCM", _FMT_FLOAT: "float"}.get(tag, f"tag 0x{tag:04x}")
    raise WavFormatError(f"unsupported codec: {name} with {bits} bits per sample")


def read_wav(path: str | Path) -> AudioClip:
    """Read a RIFF WAV file as a mono clip with samples in [-1, 1].

    Stereo files are averaged to mono; the sample rate is preserved.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid, size = struct.unpack_from("<4sI", blob, pos)
        pos += 8
        body = blob[pos : pos + size]
        if len(body) < size:
            raise WavFormatError(f"{path}: truncated {cid.decode('latin1')!r} chunk")
        if cid == b"fmt ":
            fmt = _parse_fmt_chunk(body)
        elif cid == b"data":
            data = body
        pos += size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing data chunk")
    tag, channels, rate, bits = fmt
    if channels not in (1, 2):
        raise WavFormatError(f"{path}: {channels} channels unsupported (mono/stereo only)")
    if rate <= 0:
        raise WavFormatError(f"{path}: invalid sample rate {rate}")

    samples = _decode_samples(data, tag, bits)
    if channels == 2:
        if samples.size % 2:
            raise WavFormatError(f"{path}: stereo data with odd sample count")
        samples = samples.reshape(-1, 2).mean(axis=1)
    if samples.size == 0:
        raise WavFormatError(f"{path}: zero-length audio")
    samples = np.clip(samples, -1.0, 1.0)
    return AudioClip(samples.astype(np.float32), int(rate))


def write_wav(clip: AudioClip, path: str | Path) -> int:
    """Write a clip as 16-bit PCM mono.

    Samples outside [-1, 1] are clamped; returns the clamp count so the
    caller can surface it.
    """
    if len(clip) == 0:
        raise WavFormatError("refusing to write an empty clip")
    x = clip.samples.astype(np.float64)
    q = np.round(x * 32768.0)
    clipped = np.clip(q, -32768, 32767)
    clamp_count = int(np.count_nonzero(clipped != q))
    pcm = clipped.astype("<i2").tobytes()

    byte_rate = clip.sample_rate * 2
    header = b"".join(
        [
            struct.pack("<4sI4s", b"RIFF", 36 + len(pcm), b"WAVE"),
            struct.pack(
                "<4sIHHIIHH", b"fmt ", 16, _FMT_PCM, 1, clip.sample_rate, byte_rate, 2, 16
            ),
            struct.pack("<4sI", b"data", len(pcm)),
        ]
    )
    Path(path).write_bytes(header + pcm)
    return clamp_count


def resample_clip(clip: AudioClip, target_rate: int) -> AudioClip:
    """Resample to a new rate with scipy's polyphase filter."""
    if target_rate == clip.sample_rate:
        return clip
    ratio = Fraction(target_rate, clip.sample_rate)
    out = resample_poly(clip.samples.astype(np.float64), ratio.numerator, ratio.denominator)
    return clamp_clip(out, target_rate)
