"""Acoustic model containers and their on-disk format.

A model is a set of left-to-right HMMs with diagonal-covariance GMM
states, keyed by phone (monophone stage) or by class-collapsed context
(later stages), plus optional feature-space extras: an LDA projection
and per-speaker affine transforms. Context keys not seen in training
back off to a context-independent model of the center phone.

The file format is a versioned text header followed by framed binary
float64 blocks; everything is written in sorted order so identical
models serialize to identical bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..errors import ValidationError
from ..features import FeatureConfig, LdaTransform
from ..lexicon import PhoneClassMap

LOG_ZERO = -1.0e30

# Context symbols: a class id rendered as its integer, or one of the two
# markers below. Neighbouring silence is covered by the word-boundary
# marker, so context alphabets have at most class_count + 2 symbols.
EDGE_MARKER = "#"
CROSSWORD_MARKER = "~"

_KEY_SEP = "^"


class ContextKey(NamedTuple):
    """Collapsed triphone context: left symbol, center phone, right symbol."""

    left: str
    center: str
    right: str


ModelKey = "str | ContextKey"


def key_to_text(key) -> str:
    if isinstance(key, ContextKey):
        return _KEY_SEP.join(key)
    return key


def key_from_text(text: str):
    parts = text.split(_KEY_SEP)
    if len(parts) == 3:
        return ContextKey(*parts)
    return text


def center_phone(key) -> str:
    return key.center if isinstance(key, ContextKey) else key


@dataclass
class GmmState:
    """Diagonal-covariance Gaussian mixture for one HMM state."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, D)
    variances: np.ndarray  # (K, D)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if abs(self.weights.sum() - 1.0) > 1e-6:
            raise ValidationError(f"mixture weights sum to {self.weights.sum()}, not 1")
        if np.any(self.variances <= 0):
            raise ValidationError("mixture variances must be positive")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dims(self) -> int:
        return self.means.shape[1]

    def log_weights(self) -> np.ndarray:
        out = np.full(len(self.weights), LOG_ZERO)
        positive = self.weights > 0
        out[positive] = np.log(self.weights[positive])
        return out

    def component_logliks(self, x: np.ndarray, x_sq: np.ndarray | None = None) -> np.ndarray:
        """Per-component Gaussian log-densities, shape (T, K)."""
        if x_sq is None:
            x_sq = x * x
        inv = 1.0 / self.variances  # (K, D)
        const = -0.5 * (
            self.dims * np.log(2.0 * np.pi) + np.log(self.variances).sum(axis=1)
        )  # (K,)
        quad = (
            x_sq @ inv.T
            - 2.0 * (x @ (self.means * inv).T)
            + ((self.means**2) * inv).sum(axis=1)
        )
        return const - 0.5 * quad

    def loglik(self, x: np.ndarray, x_sq: np.ndarray | None = None) -> np.ndarray:
        """Mixture log-density per frame, shape (T,)."""
        if self.n_components == 1:
            return self.component_logliks(x, x_sq)[:, 0]
        scores = self.component_logliks(x, x_sq) + self.log_weights()
        top = scores.max(axis=1)
        safe = np.maximum(top, LOG_ZERO / 2)
        return safe + np.log(np.exp(scores - safe[:, None]).sum(axis=1))

    def posteriors(self, x: np.ndarray, x_sq: np.ndarray | None = None) -> np.ndarray:
        """Component responsibilities per frame, shape (T, K)."""
        scores = self.component_logliks(x, x_sq) + self.log_weights()
        scores -= scores.max(axis=1, keepdims=True)
        p = np.exp(scores)
        return p / p.sum(axis=1, keepdims=True)

    def copy(self) -> "GmmState":
        return GmmState(self.weights.copy(), self.means.copy(), self.variances.copy())


@dataclass
class HmmPhoneModel:
    """Left-to-right HMM: one GMM per emitting state plus loop/forward."""

    states: list[GmmState]
    loop_logp: np.ndarray  # (S,)
    fwd_logp: np.ndarray  # (S,)

    def __post_init__(self):
        self.loop_logp = np.asarray(self.loop_logp, dtype=np.float64)
        self.fwd_logp = np.asarray(self.fwd_logp, dtype=np.float64)
        total = np.exp(self.loop_logp) + np.exp(self.fwd_logp)
        if np.any(np.abs(total - 1.0) > 1e-6):
            raise ValidationError(f"transition rows sum to {total}, not 1")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_components(self) -> int:
        return sum(s.n_components for s in self.states)

    def copy(self) -> "HmmPhoneModel":
        return HmmPhoneModel(
            [s.copy() for s in self.states], self.loop_logp.copy(), self.fwd_logp.copy()
        )


@dataclass(frozen=True)
class SpeakerTransform:
    """Per-dimension affine feature transform for one speaker."""

    speaker_id: str
    scale: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        scale = np.asarray(self.scale, dtype=np.float64)
        offset = np.asarray(self.offset, dtype=np.float64)
        if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
            raise ValidationError("transform scales must be positive and finite")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def identity(cls, speaker_id: str, dims: int) -> "SpeakerTransform":
        return cls(speaker_id, np.ones(dims), np.zeros(dims))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x * self.scale + self.offset

    def is_identity(self) -> bool:
        return bool(np.all(self.scale == 1.0) and np.all(self.offset == 0.0))


@dataclass
class AcousticModel:
    stage: str  # mono | tri | lda | sat
    dims: int
    silence_phone: str
    n_phone_states: int
    n_silence_states: int
    inventory: tuple[str, ...]
    models: dict  # ModelKey -> HmmPhoneModel
    backoff: dict  # center phone -> HmmPhoneModel
    feature_config: FeatureConfig
    class_map: PhoneClassMap | None = None
    lda: LdaTransform | None = None
    speaker_transforms: dict = field(default_factory=dict)
    schedule_label: str = ""
    seed: int = 0

    def resolve(self, key) -> HmmPhoneModel:
        model = self.models.get(key)
        if model is not None:
            return model
        return self.backoff[center_phone(key)]

    def total_gaussians(self) -> int:
        return sum(m.n_components for m in self.models.values())

    def states_for(self, phone: str) -> int:
        return self.n_silence_states if phone == self.silence_phone else self.n_phone_states

    def transform_for(self, speaker_id: str) -> SpeakerTransform:
        transform = self.speaker_transforms.get(speaker_id)
        if transform is None:
            return SpeakerTransform.identity(speaker_id, self.dims)
        return transform


def _write_array(fh, array: np.ndarray) -> None:
    array = np.asarray(array, dtype=np.float64)
    fh.write(struct.pack("<B", array.ndim))
    fh.write(struct.pack(f"<{array.ndim}q", *array.shape))
    fh.write(array.astype("<f8").tobytes())


def _read_array(fh) -> np.ndarray:
    ndim = struct.unpack("<B", fh.read(1))[0]
    shape = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(fh.read(8 * count), dtype="<f8")
    return data.reshape(shape).copy()


def _write_phone_model(fh, model: HmmPhoneModel) -> None:
    _write_array(fh, np.array([model.n_states], dtype=np.float64))
    _write_array(fh, model.loop_logp)
    _write_array(fh, model.fwd_logp)
    for state in model.states:
        _write_array(fh, state.weights)
        _write_array(fh, state.means)
        _write_array(fh, state.variances)


def _read_phone_model(fh) -> HmmPhoneModel:
    n_states = int(_read_array(fh)[0])
    loop_logp = _read_array(fh)
    fwd_logp = _read_array(fh)
    states = []
    for _ in range(n_states):
        weights = _read_array(fh)
        means = _read_array(fh)
        variances = _read_array(fh)
        states.append(GmmState(weights, means, variances))
    return HmmPhoneModel(states, loop_logp, fwd_logp)


def _feature_config_text(config: FeatureConfig) -> str:
    return " ".join(
        f"{name}={getattr(config, name)!r}"
        for name in (
            "frame_length",
            "frame_hop",
            "pre_emphasis",
            "mel_filters",
            "cepstra",
            "delta_window",
            "sample_rate",
            "mel_low_hz",
        )
    )


def _feature_config_from_text(text: str) -> FeatureConfig:
    kwargs = {}
    for part in text.split():
        name, value = part.split("=", 1)
        try:
            kwargs[name] = int(value)
        except ValueError:
            kwargs[name] = float(value)
    return FeatureConfig(**kwargs)


def save_model(model: AcousticModel, path: str | Path) -> None:
    """Write the versioned text header plus binary parameter blocks."""
    model_keys = sorted(model.models, key=key_to_text)
    backoff_keys = sorted(model.backoff)
    speaker_ids = sorted(model.speaker_transforms)
    header = [
        "ALIGNLAB_AM 1",
        f"stage = {model.stage}",
        f"dims = {model.dims}",
        f"silence_phone = {model.silence_phone}",
        f"n_phone_states = {model.n_phone_states}",
        f"n_silence_states = {model.n_silence_states}",
        f"schedule = {model.schedule_label}",
        f"seed = {model.seed}",
        f"feature = {_feature_config_text(model.feature_config)}",
        "inventory = " + " ".join(model.inventory),
    ]
    if model.class_map is not None:
        header.append(f"class_map = {model.class_map.name} {model.class_map.class_count}")
        header.append(
            "classes = "
            + " ".join(f"{p}:{c}" for p, c in sorted(model.class_map.mapping.items()))
        )
    if model.lda is not None:
        header.append(f"lda = {model.lda.out_dim} {model.lda.in_dim}")
    header.append(f"n_models = {len(model_keys)}")
    header.extend(f"model = {key_to_text(k)}" for k in model_keys)
    header.append(f"n_backoff = {len(backoff_keys)}")
    header.extend(f"backoff = {k}" for k in backoff_keys)
    header.append(f"n_speakers = {len(speaker_ids)}")
    header.extend(f"speaker = {s}" for s in speaker_ids)
    header.append("BINARY")

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("utf-8"))
        if model.lda is not None:
            _write_array(fh, model.lda.matrix)
        for key in model_keys:
            _write_phone_model(fh, model.models[key])
        for key in backoff_keys:
            _write_phone_model(fh, model.backoff[key])
        for speaker in speaker_ids:
            transform = model.speaker_transforms[speaker]
            _write_array(fh, transform.scale)
            _write_array(fh, transform.offset)


def load_model(path: str | Path) -> AcousticModel:
    with open(path, "rb") as fh:
        lines = []
        while True:
            line = fh.readline().decode("utf-8").rstrip("\n")
            if line == "BINARY":
                break
            if not line:
                raise ValidationError(f"{path}: truncated model header")
            lines.append(line)
        if not lines or lines[0].split() != ["ALIGNLAB_AM", "1"]:
            raise ValidationError(f"{path}: not an acoustic model file")
        fields: dict[str, list[str]] = {}
        for line in lines[1:]:
            key, _, value = line.partition(" = ")
            fields.setdefault(key, []).append(value)

        def one(name: str, default=None):
            if name not in fields:
                if default is not None:
                    return default
                raise ValidationError(f"{path}: missing header field {name!r}")
            return fields[name][0]

        class_map = None
        if "class_map" in fields:
            name, count = one("class_map").rsplit(" ", 1)
            mapping = {}
            for pair in one("classes").split():
                phone, cid = pair.rsplit(":", 1)
                mapping[phone] = int(cid)
            class_map = PhoneClassMap(name, mapping, int(count))

        lda = None
        if "lda" in fields:
            lda = LdaTransform(_read_array(fh))

        model_keys = [key_from_text(t) for t in fields.get("model", [])]
        models = {k: _read_phone_model(fh) for k in model_keys}
        backoff = {k: _read_phone_model(fh) for k in fields.get("backoff", [])}
        transforms = {}
        for speaker in fields.get("speaker", []):
            scale = _read_array(fh)
            offset = _read_array(fh)
            transforms[speaker] = SpeakerTransform(speaker, scale, offset)

        inventory_text = one("inventory", default="")
        return AcousticModel(
            stage=one("stage"),
            dims=int(one("dims")),
            silence_phone=one("silence_phone"),
            n_phone_states=int(one("n_phone_states")),
            n_silence_states=int(one("n_silence_states")),
            inventory=tuple(inventory_text.split()),
            models=models,
            backoff=backoff,
            feature_config=_feature_config_from_text(one("feature")),
            class_map=class_map,
            lda=lda,
            speaker_transforms=transforms,
            schedule_label=one("schedule", default=""),
            seed=int(one("seed", default="0")),
        )
