"""Audio and annotation transforms for training-data augmentation.

Each transform is pure: it takes a clip (and, where relevant, tiers) and
returns new objects. Transforms that only touch audio never move
annotation times; ``shift`` only moves annotations; ``speed_change``
rescales both consistently. A corpus-level builder stacks the original
utterances with one tagged copy per requested transform.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter, sosfiltfilt, stft, istft, resample_poly

from .audio import AudioClip, clamp_clip, read_wav, resample_clip, write_wav
from .corpus import Corpus, Utterance
from .errors import AugmentError, CodecHookError
from .textgrid import Interval, Tier

KINDS = (
    "default",
    "bassboost",
    "downsample",
    "f0_up",
    "f0_down",
    "intensity_halve",
    "lowpass",
    "noisereduce",
    "codec_roundtrip",
    "shift",
    "speed_change",
)

# Transform suite that performed best in preliminary runs; applied on top
# of the unmodified data by build_augmented_dataset.
STANDARD_PRESET_NAME = "standard"

CLAMP_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class AugmentationSpec:
    kind: str
    params: dict[str, float] = field(default_factory=dict)
    tag: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise AugmentError(f"unknown augmentation kind {self.kind!r}")
        if not self.tag:
            object.__setattr__(self, "tag", self._default_tag())
        factor = self.params.get("factor")
        if self.kind == "speed_change" and factor is not None:
            if not (0.25 < factor <= 4.0):
                raise AugmentError(f"speed factor {factor} outside (0.25, 4]")
        if self.kind in ("f0_up", "f0_down") and factor is not None:
            if not (0.5 <= factor <= 2.0):
                raise AugmentError(f"pitch factor {factor} outside [0.5, 2]")
        delta = self.params.get("delta")
        if delta is not None and not np.isfinite(delta):
            raise AugmentError("shift delta must be finite")

    def _default_tag(self) -> str:
        if not self.params:
            return self.kind
        bits = "_".join(f"{k}{v:g}" for k, v in sorted(self.params.items()))
        return f"{self.kind}_{bits}"


def standard_preset() -> list[AugmentationSpec]:
    """The four retained transforms: bass boost x2, 4 kHz low-pass,
    128k codec round-trip, and a 20% slow-down."""
    return [
        AugmentationSpec("bassboost", {"factor": 2.0}),
        AugmentationSpec("lowpass", {"cutoff": 4000.0}),
        AugmentationSpec("codec_roundtrip", {"bitrate": 128000.0}),
        AugmentationSpec("speed_change", {"factor": 1.25}),
    ]


def _warn_clamps(name: str, clip: AudioClip) -> AudioClip:
    if len(clip) and clip.clamp_count > CLAMP_WARN_FRACTION * len(clip):
        warnings.warn(
            f"{name}: clamped {clip.clamp_count}/{len(clip)} samples",
            stacklevel=3,
        )
    return clip


def bass_boost(clip: AudioClip, factor: float = 2.0, shelf_hz: float = 250.0) -> AudioClip:
    """Low-shelf boost: amplitude gain ``factor`` below ``shelf_hz``.

    Realized as an RBJ low-shelf biquad with the shelf midpoint at
    ``shelf_hz``; the passband above the shelf stays within ~1 dB.
    """
    if factor <= 0:
        raise AugmentError(f"bass boost factor must be positive, got {factor}")
    if factor == 1.0:
        return clip
    gain_db = 20.0 * np.log10(factor)
    a_coef = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * np.pi * shelf_hz / clip.sample_rate
    cosw, sinw = np.cos(w0), np.sin(w0)
    slope = 1.5  # steeper than unity slope so the shelf settles within an octave
    alpha = sinw / 2.0 * np.sqrt((a_coef + 1.0 / a_coef) * (1.0 / slope - 1.0) + 2.0)
    two_ra = 2.0 * np.sqrt(a_coef) * alpha
    b = np.array(
        [
            a_coef * ((a_coef + 1) - (a_coef - 1) * cosw + two_ra),
            2 * a_coef * ((a_coef - 1) - (a_coef + 1) * cosw),
            a_coef * ((a_coef + 1) - (a_coef - 1) * cosw - two_ra),
        ]
    )
    a = np.array(
        [
            (a_coef + 1) + (a_coef - 1) * cosw + two_ra,
            -2 * ((a_coef - 1) + (a_coef + 1) * cosw),
            (a_coef + 1) + (a_coef - 1) * cosw - two_ra,
        ]
    )
    out = lfilter(b / a[0], a / a[0], clip.samples.astype(np.float64))
    return _warn_clamps("bass_boost", clamp_clip(out, clip.sample_rate))


def low_pass(clip: AudioClip, cutoff: float = 4000.0) -> AudioClip:
    """Zero-phase 4th-order Butterworth low-pass."""
    nyquist = clip.sample_rate / 2.0
    if cutoff >= nyquist:
        raise AugmentError(f"cutoff {cutoff} Hz must be below Nyquist {nyquist} Hz")
    sos = butter(4, cutoff, btype="low", fs=clip.sample_rate, output="sos")
    out = sosfiltfilt(sos, clip.samples.astype(np.float64))
    return _warn_clamps("low_pass", clamp_clip(out, clip.sample_rate))


def downsample(clip: AudioClip, target_rate: int = 8000) -> AudioClip:
    """Anti-alias filter and resample to a lower rate."""
    if target_rate >= clip.sample_rate:
        raise AugmentError(
            f"target rate {target_rate} must be below source rate {clip.sample_rate}"
        )
    return resample_clip(clip, target_rate)


def scale_intensity(clip: AudioClip, factor: float = 0.5) -> AudioClip:
    if factor <= 0:
        raise AugmentError(f"intensity factor must be positive, got {factor}")
    out = clip.samples.astype(np.float64) * factor
    return _warn_clamps("scale_intensity", clamp_clip(out, clip.sample_rate))


def _time_stretch(x: np.ndarray, rate: float, frame: int = 1024, hop: int = 256) -> np.ndarray:
    """WSOLA time stretch: output duration = input duration * rate."""
    n = len(x)
    out_len = int(round(n * rate))
    if n <= frame:
        # Too short for overlap-add; nearest-sample repeat/skip.
        idx = np.clip(np.round(np.arange(out_len) / rate).astype(int), 0, n - 1)
        return x[idx]
    window = np.hanning(frame)
    search = hop // 2
    out = np.zeros(out_len + frame, dtype=np.float64)
    norm = np.zeros(out_len + frame, dtype=np.float64)
    prev_tail = None
    k = 0
    while k * hop < out_len:
        target = int(round(k * hop / rate))
        target = min(max(target, 0), n - frame)
        start = target
        if prev_tail is not None and search > 0:
            lo = max(0, target - search)
            hi = min(n - frame, target + search)
            best_score = -np.inf
            for cand in range(lo, hi + 1):
                seg = x[cand : cand + hop]
                score = float(np.dot(seg, prev_tail))
                if score > best_score:
                    best_score = score
                    start = cand
        seg = x[start : start + frame]
        pos = k * hop
        out[pos : pos + frame] += seg * window
        norm[pos : pos + frame] += window
        prev_tail = x[start + hop : start + hop + hop]
        if len(prev_tail) < hop:
            prev_tail = np.pad(prev_tail, (0, hop - len(prev_tail)))
        k += 1
    norm[norm < 1e-8] = 1.0
    return out[:out_len] / norm[:out_len]


def change_pitch(clip: AudioClip, factor: float) -> AudioClip:
    """Scale pitch by ``factor`` keeping duration (resample + stretch)."""
    if not (0.5 <= factor <= 2.0):
        raise AugmentError(f"pitch factor {factor} outside [0.5, 2]")
    if factor == 1.0:
        return clip
    ratio = Fraction(factor).limit_denominator(1000)
    shifted = resample_poly(
        clip.samples.astype(np.float64), ratio.denominator, ratio.numerator
    )
    stretched = _time_stretch(shifted, len(clip) / len(shifted) if len(shifted) else 1.0)
    # Force the exact original length; stretch is within a frame already.
    if len(stretched) < len(clip):
        stretched = np.pad(stretched, (0, len(clip) - len(stretched)))
    return _warn_clamps("change_pitch", clamp_clip(stretched[: len(clip)], clip.sample_rate))


@dataclass(frozen=True)
class NoiseGateSettings:
    frame: int = 512
    hop: int = 128
    quantile: float = 0.10
    threshold: float = 3.0
    attenuation_db: float = 25.0
    floor_cap_vs_median: float = 8.0


def reduce_noise(clip: AudioClip, params: NoiseGateSettings | None = None) -> AudioClip:
    """Stationary spectral gating.

    The per-bin noise floor comes from the quietest 10% of frames; bins
    below threshold*floor are attenuated. Floors are capped relative to
    the median floor so steady narrowband components (speech harmonics,
    test tones) are not mistaken for noise.
    """
    p = params or NoiseGateSettings()
    x = clip.samples.astype(np.float64)
    if len(x) < p.frame + p.hop:
        raise AugmentError(
            f"clip of {len(x)} samples too short for noise reduction "
            f"(needs >= {p.frame + p.hop})"
        )
    freqs, times, spec = stft(
        x, fs=clip.sample_rate, nperseg=p.frame, noverlap=p.frame - p.hop, window="hann"
    )
    mag = np.abs(spec)
    frame_energy = (mag**2).sum(axis=0)
    n_quiet = max(1, int(np.ceil(p.quantile * mag.shape[1])))
    quiet = np.argsort(frame_energy, kind="stable")[:n_quiet]
    floor = mag[:, quiet].mean(axis=1)
    positive = floor[floor > 0]
    if positive.size:
        cap = p.floor_cap_vs_median * float(np.median(positive))
        floor = np.minimum(floor, cap)
    gain = np.where(
        mag < p.threshold * floor[:, None], 10.0 ** (-p.attenuation_db / 20.0), 1.0
    )
    _, recon = istft(
        spec * gain, fs=clip.sample_rate, nperseg=p.frame, noverlap=p.frame - p.hop,
        window="hann",
    )
    if len(recon) < len(x):
        recon = np.pad(recon, (0, len(x) - len(recon)))
    return _warn_clamps("reduce_noise", clamp_clip(recon[: len(x)], clip.sample_rate))


@dataclass(frozen=True)
class CodecHook:
    """External encode/decode command templates with {in}/{out} slots."""

    encode: str
    decode: str
    intermediate_suffix: str = ".mp3"


def _run_hook(template: str, in_path: Path, out_path: Path) -> None:
    cmd = [
        part.replace("{in}", str(in_path)).replace("{out}", str(out_path))
        for part in shlex.split(template)
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise CodecHookError(" ".join(cmd), proc.returncode, proc.stderr)


_CODEC_BASE_CUTOFF = 7000.0  # Hz retained at 128k in the built-in approximation
_CODEC_BITS = {128000: 10, 64000: 8}


def codec_roundtrip(
    clip: AudioClip,
    bitrate: int = 128000,
    codec_hook: CodecHook | None = None,
    target_rate: int = 16000,
) -> AudioClip:
    """Lossy codec round-trip ending at 16 kHz.

    With a hook configured the audio is piped through the external
    encode+decode commands; otherwise a deterministic approximation runs:
    resample to 16 kHz, brickwall above a bitrate-dependent cutoff, and
    requantize with triangular dither.
    """
    if codec_hook is not None:
        with tempfile.TemporaryDirectory(prefix="alignlab-codec-") as tmp:
            tmp_path = Path(tmp)
            src = tmp_path / "in.wav"
            mid = tmp_path / ("mid" + codec_hook.intermediate_suffix)
            dst = tmp_path / "out.wav"
            write_wav(clip, src)
            _run_hook(codec_hook.encode, src, mid)
            _run_hook(codec_hook.decode, mid, dst)
            return resample_clip(read_wav(dst), target_rate)

    out = resample_clip(clip, target_rate)
    x = out.samples.astype(np.float64)
    cutoff = min(
        _CODEC_BASE_CUTOFF * np.sqrt(bitrate / 128000.0), 0.45 * target_rate
    )
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(len(x), 1.0 / target_rate)
    spectrum[freqs > cutoff] = 0.0
    x = np.fft.irfft(spectrum, n=len(x))
    bits = _CODEC_BITS.get(int(bitrate), max(6, int(round(10 * np.sqrt(bitrate / 128000.0)))))
    step = 2.0 ** (1 - bits)
    rng = np.random.default_rng(int(bitrate) % (2**32))
    dither = (rng.random(len(x)) - rng.random(len(x))) * step  # TPDF
    x = np.round((x + dither) / step) * step
    return _warn_clamps("codec_roundtrip", clamp_clip(x, target_rate))


def shift_boundaries(
    tiers: list[Tier], delta: float, duration: float
) -> tuple[list[Tier], list[str]]:
    """Move every interior boundary by ``delta`` seconds.

    Tier start (0) and end (``duration``) stay fixed; intervals squeezed
    to non-positive length are merged into a neighbour and reported.
    """
    if not np.isfinite(delta):
        raise AugmentError("shift delta must be finite")
    eps = 1e-9
    out_tiers = []
    reports: list[str] = []
    for tier in tiers:
        moved = []
        for iv in tier.intervals:
            start = iv.start if abs(iv.start) < eps else iv.start + delta
            end = iv.end if abs(iv.end - duration) < eps else iv.end + delta
            start = min(max(start, 0.0), duration)
            end = min(max(end, 0.0), duration)
            moved.append((start, end, iv.label))
        merged: list[list] = []
        for start, end, label in moved:
            if end - start <= eps:
                reports.append(
                    f"tier {tier.name!r}: interval {label!r} collapsed by shift; merged"
                )
                if merged:
                    merged[-1][1] = max(merged[-1][1], end)
                continue
            if merged and start < merged[-1][1] - eps:
                start = merged[-1][1]
                if end - start <= eps:
                    reports.append(
                        f"tier {tier.name!r}: interval {label!r} collapsed by shift; merged"
                    )
                    continue
            merged.append([start, end, label])
        out_tiers.append(
            tier.with_intervals([Interval(s, e, l) for s, e, l in merged])
        )
    return out_tiers, reports


def change_speed(
    clip: AudioClip, tiers: list[Tier], factor: float
) -> tuple[AudioClip, list[Tier]]:
    """Rescale duration by ``factor`` (pitch co-varies), scaling tiers."""
    if not (0.25 < factor < 4.0):
        raise AugmentError(f"speed factor {factor} outside (0.25, 4)")
    if factor == 1.0:
        return clip, list(tiers)
    ratio = Fraction(factor).limit_denominator(10000)
    resampled = resample_poly(
        clip.samples.astype(np.float64), ratio.numerator, ratio.denominator
    )
    new_clip = clamp_clip(resampled, clip.sample_rate)
    new_tiers = [
        tier.with_intervals(
            [Interval(iv.start * factor, iv.end * factor, iv.label) for iv in tier.intervals]
        )
        for tier in tiers
    ]
    return _warn_clamps("change_speed", new_clip), new_tiers


def apply_spec(utterance: Utterance, spec: AugmentationSpec) -> Utterance:
    """Produce the augmented copy of one utterance."""
    p = spec.params
    clip = utterance.audio
    word_tier = utterance.word_tier
    phone_tier = utterance.phone_tier

    if spec.kind == "default":
        pass
    elif spec.kind == "bassboost":
        clip = bass_boost(clip, p.get("factor", 2.0), p.get("shelf_hz", 250.0))
    elif spec.kind == "downsample":
        clip = downsample(clip, int(p.get("target_rate", 8000)))
    elif spec.kind == "f0_up":
        clip = change_pitch(clip, p.get("factor", 1.2))
    elif spec.kind == "f0_down":
        clip = change_pitch(clip, p.get("factor", 0.8))
    elif spec.kind == "intensity_halve":
        clip = scale_intensity(clip, p.get("factor", 0.5))
    elif spec.kind == "lowpass":
        clip = low_pass(clip, p.get("cutoff", 4000.0))
    elif spec.kind == "noisereduce":
        clip = reduce_noise(clip)
    elif spec.kind == "codec_roundtrip":
        clip = codec_roundtrip(clip, int(p.get("bitrate", 128000)))
    elif spec.kind == "shift":
        tiers, _ = shift_boundaries(
            utterance.tiers(), p.get("delta", 0.005), clip.duration_seconds
        )
        word_tier = tiers[0]
        phone_tier = tiers[1] if len(tiers) > 1 else None
    elif spec.kind == "speed_change":
        clip, tiers = change_speed(clip, utterance.tiers(), p.get("factor", 1.25))
        word_tier = tiers[0]
        phone_tier = tiers[1] if len(tiers) > 1 else None
    else:  # pragma: no cover - guarded by AugmentationSpec
        raise AugmentError(f"unknown augmentation kind {spec.kind!r}")

    return Utterance(
        id=f"{utterance.id}__{spec.tag}",
        audio=clip,
        word_tier=word_tier,
        phone_tier=phone_tier,
        speaker_id=utterance.speaker_id,
        language_id=utterance.language_id,
        provenance=spec.tag,
    )


def build_augmented_dataset(corpus: Corpus, specs: list[AugmentationSpec]) -> Corpus:
    """Originals plus one copy per spec, utterance-major ordering."""
    if not specs:
        raise AugmentError("augmentation spec list is empty")
    tags = [s.tag for s in specs]
    if len(set(tags)) != len(tags):
        raise AugmentError(f"duplicate augmentation tags: {tags}")
    utterances: list[Utterance] = []
    for utt in corpus:
        utterances.append(utt)
        for spec in specs:
            utterances.append(apply_spec(utt, spec))
    return Corpus(f"{corpus.name}-aug", tuple(utterances))


def parse_spec_file(path: str | Path) -> list[AugmentationSpec]:
    """Read 'kind key=value ...' lines into specs."""
    specs = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        params: dict[str, float] = {}
        tag = ""
        for part in parts[1:]:
            if "=" not in part:
                raise AugmentError(f"spec file line {lineno}: expected key=value, got {part!r}")
            key, value = part.split("=", 1)
            if key == "tag":
                tag = value
            elif key == "bitrate":
                params[key] = _parse_bitrate(value)
            else:
                try:
                    params[key] = float(value)
                except ValueError:
                    raise AugmentError(f"spec file line {lineno}: bad number {value!r}")
        specs.append(AugmentationSpec(kind, params, tag))
    if not specs:
        raise AugmentError(f"spec file {path} defines no transforms")
    return specs


def _parse_bitrate(text: str) -> float:
    text = text.strip().lower()
    if text.endswith("k"):
        return float(text[:-1]) * 1000.0
    return float(text)
