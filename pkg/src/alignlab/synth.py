"""Synthetic speech-like corpora with known boundary ground truth.

Each pseudo-phone is a distinct timbre (a harmonic complex or a noise
band), tokens get randomized durations and levels, adjacent phones are
crossfaded, and each speaker imposes a spectral tilt. The generator
emits a corpus with word and phone tiers whose boundary times are the
nominal segment edges, which makes boundary-recovery experiments
self-scoring.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip
from .corpus import Corpus, Utterance
from .lexicon import (
    NATURAL_CLASSES,
    GraphemeMap,
    Lexicon,
    NaturalClassMap,
    compile_lexicon,
)
from .textgrid import PHONE_TIER, WORD_TIER, Interval, Tier

PHONE_LETTERS = "abcdefghijkl"


@dataclass(frozen=True)
class SynthSpec:
    minutes: float = 10.0
    n_phones: int = 8
    n_speakers: int = 4
    seed: int = 0
    sample_rate: int = 16000
    phone_min_s: float = 0.080
    phone_max_s: float = 0.300
    utterance_min_s: float = 2.2
    utterance_max_s: float = 3.2
    words_min: int = 1
    words_max: int = 3
    crossfade_s: float = 0.024
    pause_prob: float = 0.30
    pause_min_s: float = 0.10
    pause_max_s: float = 0.25
    edge_silence_min_s: float = 0.06
    edge_silence_max_s: float = 0.15
    level_jitter_db: float = 4.0
    noise_floor_db: float = -38.0
    tilt_db_per_octave: tuple[float, ...] = (-4.0, -1.5, 2.0, 4.5)
    harmonic_spacing: float = 1.42  # f0 ratio between harmonic phones
    noise_spacing: float = 1.85  # center ratio between noise-band phones
    # Per-speaker frequency scaling makes phone distributions multimodal,
    # which is what the later schedule stages exist to absorb.
    speaker_freq_scale: tuple[float, ...] = (0.92, 1.0, 1.06, 1.13)

    def __post_init__(self):
        if not (1 <= self.n_phones <= len(PHONE_LETTERS)):
            raise ValueError(f"n_phones must be in [1, {len(PHONE_LETTERS)}]")


@dataclass
class SynthResult:
    corpus: Corpus
    grapheme_map: GraphemeMap
    lexicon: Lexicon
    natural_classes: NaturalClassMap
    language_id: str = "synth"


def _phone_recipe(index: int, spec: SynthSpec) -> dict:
    """Alternating harmonic complexes and noise bands, low to high."""
    if index % 2 == 0:
        f0 = 120.0 * (spec.harmonic_spacing ** (index // 2))
        return {"kind": "harmonic", "f0": f0}
    center = 450.0 * (spec.noise_spacing ** (index // 2))
    return {"kind": "noise", "low": center * 0.60, "high": center * 1.65}


def _render_phone(
    recipe: dict, n: int, rate: int, rng: np.random.Generator, freq_scale: float = 1.0
) -> np.ndarray:
    t = np.arange(n) / rate
    if recipe["kind"] == "harmonic":
        f0 = recipe["f0"] * freq_scale
        signal = np.zeros(n)
        k = 1
        while k * f0 < 0.40 * rate and k <= 12:
            phase = rng.uniform(0, 2 * np.pi)
            signal += np.sin(2 * np.pi * k * f0 * t + phase) / k
            k += 1
        return signal / max(np.abs(signal).max(), 1e-9)
    noise = rng.standard_normal(n)
    spectrum = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, 1.0 / rate)
    band = (freqs >= recipe["low"] * freq_scale) & (freqs <= recipe["high"] * freq_scale)
    spectrum[~band] = 0.0
    shaped = np.fft.irfft(spectrum, n=n)
    return shaped / max(np.abs(shaped).max(), 1e-9)


def _apply_tilt(signal: np.ndarray, rate: int, db_per_octave: float) -> np.ndarray:
    if db_per_octave == 0.0 or len(signal) < 8:
        return signal
    spectrum = np.fft.rfft(signal)
    freqs = np.maximum(np.fft.rfftfreq(len(signal), 1.0 / rate), 60.0)
    gain = 10.0 ** (db_per_octave * np.log2(freqs / 1000.0) / 20.0)
    return np.fft.irfft(spectrum * gain, n=len(signal))


def _build_vocabulary(spec: SynthSpec, rng: np.random.Generator) -> list[str]:
    phones = PHONE_LETTERS[: spec.n_phones]
    words = list(phones)  # every phone is also a one-letter word
    target = max(12, spec.n_phones + 4)
    while len(words) < target:
        length = int(rng.integers(spec.words_min, spec.words_max + 1))
        word = "".join(rng.choice(list(phones), size=length))
        if word not in words:
            words.append(word)
    return words


def generate_corpus(spec: SynthSpec | None = None) -> SynthResult:
    """Build the corpus, its 1:1 grapheme map, and a lexicon."""
    spec = spec or SynthSpec()
    rng = np.random.default_rng(spec.seed)
    rate = spec.sample_rate
    phones = list(PHONE_LETTERS[: spec.n_phones])
    recipes = {p: _phone_recipe(i, spec) for i, p in enumerate(phones)}
    vocabulary = _build_vocabulary(spec, rng)
    xfade = int(spec.crossfade_s * rate)

    utterances = []
    total_target = spec.minutes * 60.0
    total = 0.0
    index = 0
    while total < total_target:
        speaker = index % spec.n_speakers
        target_len = rng.uniform(spec.utterance_min_s, spec.utterance_max_s)

        # Lay out the segment timeline first.
        cursor = rng.uniform(spec.edge_silence_min_s, spec.edge_silence_max_s)
        word_items: list[tuple[str, float, float]] = []
        phone_items: list[tuple[str, float, float]] = []
        while cursor < target_len:
            word = vocabulary[int(rng.integers(0, len(vocabulary)))]
            word_start = cursor
            for phone in word:
                duration = rng.uniform(spec.phone_min_s, spec.phone_max_s)
                phone_items.append((phone, cursor, cursor + duration))
                cursor += duration
            word_items.append((word, word_start, cursor))
            if rng.uniform() < spec.pause_prob:
                cursor += rng.uniform(spec.pause_min_s, spec.pause_max_s)
        duration = cursor + rng.uniform(spec.edge_silence_min_s, spec.edge_silence_max_s)
        n = int(round(duration * rate))

        freq_scale = spec.speaker_freq_scale[speaker % len(spec.speaker_freq_scale)]
        signal = 10.0 ** (spec.noise_floor_db / 20.0) * rng.standard_normal(n)
        for phone, start, end in phone_items:
            s = int(round(start * rate))
            e = int(round(end * rate))
            lo = max(0, s - xfade // 2)
            hi = min(n, e + xfade // 2)
            tone = _render_phone(recipes[phone], hi - lo, rate, rng, freq_scale)
            level_db = rng.uniform(-spec.level_jitter_db, spec.level_jitter_db)
            tone *= 0.30 * 10.0 ** (level_db / 20.0)
            envelope = np.ones(hi - lo)
            ramp = min(xfade, hi - lo)
            if ramp > 1:
                fade = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, ramp))
                envelope[:ramp] *= fade
                envelope[-ramp:] *= fade[::-1]
            signal[lo:hi] += tone * envelope

        signal = _apply_tilt(signal, rate, spec.tilt_db_per_octave[speaker % len(spec.tilt_db_per_octave)])
        peak = np.abs(signal).max()
        if peak > 0.95:
            signal *= 0.95 / peak

        word_tier = Tier(
            "words", WORD_TIER, tuple(Interval(s, e, w) for w, s, e in word_items)
        )
        phone_tier = Tier(
            "phones", PHONE_TIER, tuple(Interval(s, e, p) for p, s, e in phone_items)
        )
        utterances.append(
            Utterance(
                id=f"utt{index:04d}",
                audio=AudioClip(signal.astype(np.float32), rate),
                word_tier=word_tier,
                phone_tier=phone_tier,
                speaker_id=f"spk{speaker}",
                language_id="synth",
            )
        )
        total += duration
        index += 1

    corpus = Corpus(f"synth{spec.minutes:g}min", tuple(utterances))
    gmap = GraphemeMap("synth", tuple((p, (p,)) for p in phones))
    lexicon = compile_lexicon([corpus], {"synth": gmap})
    natural = NaturalClassMap(
        {p: NATURAL_CLASSES[i % len(NATURAL_CLASSES)] for i, p in enumerate(phones)}
    )
    return SynthResult(corpus, gmap, lexicon, natural)
