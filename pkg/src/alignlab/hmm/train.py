"""Four-stage acoustic-model training and corpus alignment.

Training is hard-assignment (Viterbi) EM: each pass accumulates
sufficient statistics under the current alignment, re-estimates the
model, then realigns. The reported per-iteration log-likelihood is the
best-path score after realignment, which is non-decreasing across
passes within a stage as long as no mixture splitting intervenes.

Stages:
  mono  flat start on 39-dim MFCCs, context-independent phones
  tri   same features, contexts collapsed through a phone-class map
  lda   13-dim statics spliced +-3, Fisher projection, re-built GMMs
  sat   per-speaker affine feature transforms alternated with EM
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..corpus import Corpus, Utterance
from ..errors import FeatureError, OovError, ValidationError
from ..features import (
    FeatureConfig,
    FeatureMatrix,
    apply_transform,
    cmvn,
    estimate_lda,
    mfcc,
    splice,
)
from ..lexicon import Lexicon, PhoneClassMap, default_identity_classes
from ..textgrid import PHONE_TIER, WORD_TIER, Interval, Tier
from .graph import AlignGraph, compile_training_graph
from .model import (
    AcousticModel,
    GmmState,
    HmmPhoneModel,
    SpeakerTransform,
    center_phone,
    key_to_text,
    save_model,
)
from .schedule import STAGES, TrainSchedule
from .viterbi import Alignment, path_to_phones, viterbi_align


@dataclass(frozen=True)
class TrainerConfig:
    variance_floor: float = 1e-3
    transition_floor: float = 1e-3
    min_component_occupancy: float = 1e-2
    per_state_max_components: int = 32
    silence_prob: float = 0.5
    silence_phone: str = "sil"
    n_phone_states: int = 3
    n_silence_states: int = 5
    speaker_min_frames: int = 100
    scale_min: float = 0.1
    scale_max: float = 10.0
    lda_dim: int = 40
    splice_context: int = 3


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    log_likelihood: float
    n_gaussians: int
    zero_occupancy: int

    def render(self) -> str:
        return (
            f"iter {self.iteration} loglik {self.log_likelihood:.6f} "
            f"gaussians {self.n_gaussians} zero_occ {self.zero_occupancy}"
        )


@dataclass
class EmStats:
    log_likelihood: float
    zero_occupancy: int
    n_gaussians: int
    n_frames: int
    occupancy: dict  # key -> list of (K,) occupancy arrays per state


@dataclass
class TrainingData:
    """Per-utterance material shared by every run on one corpus."""

    corpus_name: str
    lexicon: Lexicon
    config: TrainerConfig
    feature_config: FeatureConfig
    ids: list[str]
    words: dict[str, list[str]]
    speakers: dict[str, str]
    feats39: dict[str, np.ndarray]
    statics13: dict[str, np.ndarray]
    mono_graphs: dict[str, AlignGraph]
    inventory: tuple[str, ...]
    skipped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def frame_hop(self) -> float:
        return self.feature_config.frame_hop

    def total_frames(self) -> int:
        return sum(self.feats39[i].shape[0] for i in self.ids)


def prepare_training_data(
    corpus: Corpus,
    lexicon: Lexicon,
    config: TrainerConfig | None = None,
    feature_config: FeatureConfig | None = None,
) -> TrainingData:
    """Extract features, normalize per speaker, and compile graphs."""
    config = config or TrainerConfig()
    feature_config = feature_config or FeatureConfig()
    if config.silence_phone in lexicon.phone_inventory:
        raise ValidationError(
            f"silence phone {config.silence_phone!r} collides with the inventory"
        )
    missing = sorted(
        {w for u in corpus for w in (t.lower() for t in u.words()) if w not in lexicon}
    )
    if missing:
        raise OovError(missing)

    by_speaker: dict[str, list] = {}
    feats_raw: dict[str, FeatureMatrix] = {}
    skipped: list[tuple[str, str]] = []
    for utt in corpus:
        try:
            feats_raw[utt.id] = mfcc(utt.audio, feature_config)
        except FeatureError as exc:
            skipped.append((utt.id, str(exc)))
            continue
        by_speaker.setdefault(utt.speaker_id, []).append(utt.id)

    normalized, _ = cmvn(
        {spk: [feats_raw[i] for i in ids] for spk, ids in by_speaker.items()}
    )
    feats39: dict[str, np.ndarray] = {}
    for spk, ids in by_speaker.items():
        for uid, mat in zip(ids, normalized[spk]):
            feats39[uid] = mat.data

    ids: list[str] = []
    words: dict[str, list[str]] = {}
    speakers: dict[str, str] = {}
    graphs: dict[str, AlignGraph] = {}
    for utt in corpus:
        if utt.id not in feats39:
            continue
        tokens = [t.lower() for t in utt.words()]
        graph = compile_training_graph(
            tokens,
            lexicon,
            silence_phone=config.silence_phone,
            silence_prob=config.silence_prob,
            n_phone_states=config.n_phone_states,
            n_silence_states=config.n_silence_states,
        )
        n_frames = feats39[utt.id].shape[0]
        if n_frames < graph.min_frames:
            skipped.append(
                (utt.id, f"{n_frames} frames < {graph.min_frames} mandatory states")
            )
            del feats39[utt.id]
            continue
        ids.append(utt.id)
        words[utt.id] = tokens
        speakers[utt.id] = utt.speaker_id
        graphs[utt.id] = graph

    if not ids:
        raise ValidationError(f"corpus {corpus.name!r}: no trainable utterances")
    ids.sort()
    statics = feature_config.cepstra
    return TrainingData(
        corpus_name=corpus.name,
        lexicon=lexicon,
        config=config,
        feature_config=feature_config,
        ids=ids,
        words=words,
        speakers=speakers,
        feats39=feats39,
        statics13={i: feats39[i][:, :statics] for i in ids},
        mono_graphs=graphs,
        inventory=tuple(sorted(lexicon.phone_inventory)),
        skipped=skipped,
    )


def _partition(total: int, minimums: list[int]) -> list[int]:
    """Near-equal split of ``total`` with per-part minimums."""
    n = len(minimums)
    cuts = [round(total * k / n) for k in range(n + 1)]
    sizes = [cuts[k + 1] - cuts[k] for k in range(n)]
    for i in range(n):
        while sizes[i] < minimums[i]:
            donor = max(
                (j for j in range(n) if sizes[j] > minimums[j]),
                key=lambda j: sizes[j] - minimums[j],
            )
            sizes[donor] -= 1
            sizes[i] += 1
    return sizes


def _uniform_state_path(graph: AlignGraph, n_frames: int) -> np.ndarray:
    """Flat-start segmentation: equal share per mandatory phone."""
    slots = graph.mandatory_slots()
    per_slot = _partition(n_frames, [s.n_states for s in slots])
    path = np.empty(n_frames, dtype=np.int32)
    pos = 0
    for slot, size in zip(slots, per_slot):
        per_state = _partition(size, [1] * slot.n_states)
        for k, count in enumerate(per_state):
            path[pos : pos + count] = slot.first_state + k
            pos += count
    return path


def _uniform_transitions(n_states: int) -> tuple[np.ndarray, np.ndarray]:
    half = np.log(0.5)
    return np.full(n_states, half), np.full(n_states, half)


def flat_start(
    data: TrainingData, feats: dict[str, np.ndarray] | None = None
) -> tuple[AcousticModel, dict[str, Alignment]]:
    """Monophone initialization: global stats and uniform segmentation."""
    feats = feats or data.feats39
    config = data.config
    stacked = np.vstack([feats[i] for i in data.ids])
    mean = stacked.mean(axis=0)
    var = np.maximum(stacked.var(axis=0), config.variance_floor)
    dims = stacked.shape[1]

    def fresh(n_states: int) -> HmmPhoneModel:
        loop, fwd = _uniform_transitions(n_states)
        return HmmPhoneModel(
            [GmmState(np.ones(1), mean[None, :].copy(), var[None, :].copy()) for _ in range(n_states)],
            loop,
            fwd,
        )

    models = {p: fresh(config.n_phone_states) for p in data.inventory}
    models[config.silence_phone] = fresh(config.n_silence_states)
    model = AcousticModel(
        stage="mono",
        dims=dims,
        silence_phone=config.silence_phone,
        n_phone_states=config.n_phone_states,
        n_silence_states=config.n_silence_states,
        inventory=data.inventory,
        models=models,
        backoff=models,
        feature_config=data.feature_config,
    )
    alignments = {}
    for uid in data.ids:
        path = _uniform_state_path(data.mono_graphs[uid], feats[uid].shape[0])
        alignments[uid] = Alignment(
            utterance_id=uid,
            phones=tuple(
                path_to_phones(data.mono_graphs[uid], path, data.frame_hop)
            ),
            log_likelihood=float("nan"),
            frame_hop=data.frame_hop,
            n_frames=len(path),
            state_path=path,
        )
    return model, alignments


class _Accumulator:
    """Sufficient statistics for one phone model."""

    def __init__(self, phone_model: HmmPhoneModel, dims: int):
        self.occ = [np.zeros(s.n_components) for s in phone_model.states]
        self.sum = [np.zeros((s.n_components, dims)) for s in phone_model.states]
        self.sumsq = [np.zeros((s.n_components, dims)) for s in phone_model.states]
        self.trans = np.zeros((phone_model.n_states, 2))  # [loop, forward]


def _accumulate(
    model: AcousticModel,
    data: TrainingData,
    feats: dict[str, np.ndarray],
    graphs: dict[str, AlignGraph],
    alignments: dict[str, Alignment],
) -> dict:
    accs = {key: _Accumulator(m, model.dims) for key, m in model.models.items()}
    for uid in data.ids:
        graph = graphs[uid]
        path = alignments[uid].state_path
        x = feats[uid]
        x_sq = x * x
        frame_pdf = graph.state_pdf[path]
        for row, (key, state_index) in enumerate(graph.pdfs):
            acc = accs.get(key)
            if acc is None:
                continue
            mask = frame_pdf == row
            count = int(mask.sum())
            if count == 0:
                continue
            xa = x[mask]
            gmm = model.models[key].states[state_index]
            if gmm.n_components == 1:
                acc.occ[state_index][0] += count
                acc.sum[state_index][0] += xa.sum(axis=0)
                acc.sumsq[state_index][0] += x_sq[mask].sum(axis=0)
            else:
                gamma = gmm.posteriors(xa)
                acc.occ[state_index] += gamma.sum(axis=0)
                acc.sum[state_index] += gamma.T @ xa
                acc.sumsq[state_index] += gamma.T @ x_sq[mask]
        # Transition events: self-loops, forward moves, and the final exit.
        stay = path[1:] == path[:-1]
        loop_counts = np.bincount(path[:-1][stay], minlength=graph.n_states)
        fwd_counts = np.bincount(path[:-1][~stay], minlength=graph.n_states)
        fwd_counts[path[-1]] += 1  # leaving through the exit
        for state in np.nonzero(loop_counts + fwd_counts)[0]:
            slot = graph.slots[graph.state_slot[state]]
            acc = accs.get(slot.model_key)
            if acc is None:
                continue
            offset = int(graph.state_offset[state])
            acc.trans[offset, 0] += loop_counts[state]
            acc.trans[offset, 1] += fwd_counts[state]
    return accs


def _update_model(model: AcousticModel, accs: dict, config: TrainerConfig):
    """M-step; returns (new model, zero-occupancy state count, occupancy)."""
    new_models = {}
    zero_occupancy = 0
    occupancy = {}
    for key in sorted(model.models, key=key_to_text):
        old = model.models[key]
        acc = accs[key]
        states = []
        for s, gmm in enumerate(old.states):
            total = acc.occ[s].sum()
            if total <= 0:
                zero_occupancy += 1
                states.append(gmm.copy())
                continue
            weights = acc.occ[s] / total
            means = gmm.means.copy()
            variances = gmm.variances.copy()
            live = acc.occ[s] > config.min_component_occupancy
            occ_live = acc.occ[s][live][:, None]
            means[live] = acc.sum[s][live] / occ_live
            variances[live] = np.maximum(
                acc.sumsq[s][live] / occ_live - means[live] ** 2,
                config.variance_floor,
            )
            states.append(GmmState(weights / weights.sum(), means, variances))
        loop = np.exp(old.loop_logp)
        row_totals = acc.trans.sum(axis=1)
        observed = row_totals > 0
        floor = config.transition_floor
        loop[observed] = np.clip(
            acc.trans[observed, 0] / row_totals[observed], floor, 1.0 - floor
        )
        new_models[key] = HmmPhoneModel(states, np.log(loop), np.log(1.0 - loop))
        occupancy[key] = [a.copy() for a in acc.occ]

    new_model = AcousticModel(
        stage=model.stage,
        dims=model.dims,
        silence_phone=model.silence_phone,
        n_phone_states=model.n_phone_states,
        n_silence_states=model.n_silence_states,
        inventory=model.inventory,
        models=new_models,
        backoff=new_models if model.backoff is model.models else model.backoff,
        feature_config=model.feature_config,
        class_map=model.class_map,
        lda=model.lda,
        speaker_transforms=model.speaker_transforms,
        schedule_label=model.schedule_label,
        seed=model.seed,
    )
    return new_model, zero_occupancy, occupancy


def em_iteration(
    model: AcousticModel,
    data: TrainingData,
    feats: dict[str, np.ndarray],
    graphs: dict[str, AlignGraph],
    alignments: dict[str, Alignment],
    config: TrainerConfig | None = None,
) -> tuple[AcousticModel, dict[str, Alignment], EmStats]:
    """One Viterbi-EM pass: accumulate, update, realign."""
    config = config or data.config
    accs = _accumulate(model, data, feats, graphs, alignments)
    new_model, zero_occupancy, occupancy = _update_model(model, accs, config)

    new_alignments = {}
    total_ll = 0.0
    n_frames = 0
    for uid in data.ids:
        ali = viterbi_align(
            new_model,
            FeatureMatrix(feats[uid], data.frame_hop),
            graphs[uid],
            utterance_id=uid,
        )
        new_alignments[uid] = ali
        total_ll += ali.log_likelihood
        n_frames += ali.n_frames
    stats = EmStats(
        log_likelihood=total_ll,
        zero_occupancy=zero_occupancy,
        n_gaussians=new_model.total_gaussians(),
        n_frames=n_frames,
        occupancy=occupancy,
    )
    return new_model, new_alignments, stats


def split_gaussians(
    model: AcousticModel,
    target_count: int,
    occupancy: dict,
    rng: np.random.Generator,
    config: TrainerConfig,
) -> AcousticModel:
    """Grow mixtures by splitting heavy components until the target."""
    total = model.total_gaussians()
    if target_count < total:
        raise ValidationError(
            f"split target {target_count} below current total {total}"
        )
    if target_count == total:
        return model
    models = {k: m.copy() for k, m in model.models.items()}
    heap = []
    for key in sorted(models, key=key_to_text):
        occ_states = occupancy.get(key)
        if occ_states is None:
            continue
        for s, occ in enumerate(occ_states):
            for c, value in enumerate(occ):
                heapq.heappush(heap, (-float(value), key_to_text(key), key, s, c))

    while total < target_count and heap:
        neg_occ, _, key, s, c = heapq.heappop(heap)
        gmm = models[key].states[s]
        if gmm.n_components >= config.per_state_max_components:
            continue
        sigma = np.sqrt(gmm.variances[c])
        direction = rng.integers(0, 2, size=gmm.dims) * 2.0 - 1.0
        perturb = 0.1 * sigma * direction
        weights = np.concatenate([gmm.weights, [gmm.weights[c] / 2.0]])
        weights[c] /= 2.0
        means = np.vstack([gmm.means, gmm.means[c] - perturb])
        means[c] = means[c] + perturb
        variances = np.vstack([gmm.variances, gmm.variances[c]])
        models[key].states[s] = GmmState(weights / weights.sum(), means, variances)
        total += 1
        half = neg_occ / 2.0
        heapq.heappush(heap, (half, key_to_text(key), key, s, c))
        heapq.heappush(heap, (half, key_to_text(key), key, s, len(weights) - 1))

    return AcousticModel(
        stage=model.stage,
        dims=model.dims,
        silence_phone=model.silence_phone,
        n_phone_states=model.n_phone_states,
        n_silence_states=model.n_silence_states,
        inventory=model.inventory,
        models=models,
        backoff=models if model.backoff is model.models else model.backoff,
        feature_config=model.feature_config,
        class_map=model.class_map,
        lda=model.lda,
        speaker_transforms=model.speaker_transforms,
        schedule_label=model.schedule_label,
        seed=model.seed,
    )


def _run_stage(
    model: AcousticModel,
    data: TrainingData,
    feats: dict[str, np.ndarray],
    graphs: dict[str, AlignGraph],
    alignments: dict[str, Alignment],
    iters: int,
    max_gaussians: int,
    rng: np.random.Generator,
    config: TrainerConfig,
):
    """EM passes with mixture doubling every ceil(iters/4) passes."""
    split_every = max(1, -(-iters // 4))
    log: list[IterationRecord] = []
    occupancy = None
    for i in range(1, iters + 1):
        if i > 1 and (i - 1) % split_every == 0 and occupancy is not None:
            current = model.total_gaussians()
            target = min(2 * current, max_gaussians)
            if target > current:
                model = split_gaussians(model, target, occupancy, rng, config)
        model, alignments, stats = em_iteration(
            model, data, feats, graphs, alignments, config
        )
        occupancy = stats.occupancy
        log.append(
            IterationRecord(i, stats.log_likelihood, stats.n_gaussians, stats.zero_occupancy)
        )
    return model, alignments, log


def train_monophone(
    data: TrainingData,
    schedule: TrainSchedule,
    rng: np.random.Generator | None = None,
    config: TrainerConfig | None = None,
):
    """Flat start plus the schedule's monophone EM passes."""
    config = config or data.config
    rng = rng if rng is not None else np.random.default_rng(0)
    model, alignments = flat_start(data)
    model.schedule_label = schedule.label
    return _run_stage(
        model,
        data,
        data.feats39,
        data.mono_graphs,
        alignments,
        schedule.mono_iters,
        schedule.max_gaussians[0],
        rng,
        config,
    )


def build_context_graphs(
    data: TrainingData, class_map: PhoneClassMap
) -> dict[str, AlignGraph]:
    """Recompile every utterance graph with collapsed context keys."""
    config = data.config
    return {
        uid: compile_training_graph(
            data.words[uid],
            data.lexicon,
            silence_phone=config.silence_phone,
            class_map=class_map,
            silence_prob=config.silence_prob,
            n_phone_states=config.n_phone_states,
            n_silence_states=config.n_silence_states,
        )
        for uid in data.ids
    }


def train_triphone(
    data: TrainingData,
    mono_model: AcousticModel,
    mono_alignments: dict[str, Alignment],
    class_map: PhoneClassMap,
    iters: int,
    rng: np.random.Generator | None = None,
    config: TrainerConfig | None = None,
    max_gaussians: int = 512,
):
    """Clone seen context keys from their center phones, then EM."""
    config = config or data.config
    rng = rng if rng is not None else np.random.default_rng(0)
    graphs = build_context_graphs(data, class_map)

    seen = set()
    for graph in graphs.values():
        seen.update(key for key, _ in graph.pdfs)
    backoff = {p: m.copy() for p, m in mono_model.models.items()}
    models = {}
    for key in sorted(seen, key=key_to_text):
        models[key] = backoff[center_phone(key)].copy()

    model = AcousticModel(
        stage="tri",
        dims=mono_model.dims,
        silence_phone=mono_model.silence_phone,
        n_phone_states=mono_model.n_phone_states,
        n_silence_states=mono_model.n_silence_states,
        inventory=mono_model.inventory,
        models=models,
        backoff=backoff,
        feature_config=mono_model.feature_config,
        class_map=class_map,
        schedule_label=mono_model.schedule_label,
        seed=mono_model.seed,
    )
    # Mono and context graphs share state structure, so paths carry over.
    return (
        graphs,
        *_run_stage(
            model,
            data,
            data.feats39,
            graphs,
            mono_alignments,
            iters,
            max_gaussians,
            rng,
            config,
        ),
    )


def _init_stage_models(
    reference: AcousticModel,
    data: TrainingData,
    feats: dict[str, np.ndarray],
    graphs: dict[str, AlignGraph],
    alignments: dict[str, Alignment],
    config: TrainerConfig,
) -> tuple[dict, dict]:
    """Single-Gaussian states from aligned statistics in a new space."""
    dims = next(iter(feats.values())).shape[1]
    stacked = np.vstack([feats[i] for i in data.ids])
    global_mean = stacked.mean(axis=0)
    global_var = np.maximum(stacked.var(axis=0), config.variance_floor)

    sums: dict = {}
    # key -> per state [count, sum, sumsq]; also pooled per center phone
    def bucket(store, key, n_states):
        if key not in store:
            store[key] = [
                [0.0, np.zeros(dims), np.zeros(dims)] for _ in range(n_states)
            ]
        return store[key]

    pooled: dict = {}
    for uid in data.ids:
        graph = graphs[uid]
        path = alignments[uid].state_path
        x = feats[uid]
        frame_pdf = graph.state_pdf[path]
        for row, (key, state_index) in enumerate(graph.pdfs):
            mask = frame_pdf == row
            count = int(mask.sum())
            if count == 0:
                continue
            xa = x[mask]
            phone = center_phone(key)
            n_states = reference.states_for(phone)
            for store, bucket_key in ((sums, key), (pooled, phone)):
                entry = bucket(store, bucket_key, n_states)[state_index]
                entry[0] += count
                entry[1] += xa.sum(axis=0)
                entry[2] += (xa * xa).sum(axis=0)

    def build(store_entry, old_model):
        states = []
        for count, total, total_sq in store_entry:
            if count > 0:
                mean = total / count
                var = np.maximum(total_sq / count - mean**2, config.variance_floor)
            else:
                mean, var = global_mean.copy(), global_var.copy()
            states.append(GmmState(np.ones(1), mean[None, :], var[None, :]))
        return HmmPhoneModel(states, old_model.loop_logp.copy(), old_model.fwd_logp.copy())

    models = {
        key: build(sums[key], reference.models[key])
        for key in sorted(reference.models, key=key_to_text)
        if key in sums
    }
    backoff = {}
    for phone in list(reference.inventory) + [reference.silence_phone]:
        old = reference.backoff[phone]
        if phone in pooled:
            backoff[phone] = build(pooled[phone], old)
        else:
            states = [
                GmmState(np.ones(1), global_mean[None, :].copy(), global_var[None, :].copy())
                for _ in range(old.n_states)
            ]
            backoff[phone] = HmmPhoneModel(states, old.loop_logp.copy(), old.fwd_logp.copy())
    return models, backoff


def train_lda_stage(
    data: TrainingData,
    tri_model: AcousticModel,
    graphs: dict[str, AlignGraph],
    alignments: dict[str, Alignment],
    iters: int,
    rng: np.random.Generator | None = None,
    config: TrainerConfig | None = None,
    max_gaussians: int = 512,
):
    """Estimate the Fisher projection from aligned states and retrain."""
    config = config or data.config
    rng = rng if rng is not None else np.random.default_rng(0)

    spliced = {
        uid: splice(
            FeatureMatrix(data.statics13[uid], data.frame_hop), config.splice_context
        ).data
        for uid in data.ids
    }
    label_of: dict = {}
    all_labels = []
    for uid in data.ids:
        graph = graphs[uid]
        path = alignments[uid].state_path
        labels = np.empty(len(path), dtype=np.int64)
        for t, state in enumerate(path):
            slot = graph.slots[graph.state_slot[state]]
            pair = (slot.phone, int(graph.state_offset[state]))
            if pair not in label_of:
                label_of[pair] = len(label_of)
            labels[t] = label_of[pair]
        all_labels.append(labels)
    frames = np.vstack([spliced[uid] for uid in data.ids])
    labels = np.concatenate(all_labels)
    out_dim = min(config.lda_dim, frames.shape[1])
    lda = estimate_lda(frames, labels, out_dim=out_dim)

    lda_feats = {uid: spliced[uid] @ lda.matrix.T for uid in data.ids}
    models, backoff = _init_stage_models(
        tri_model, data, lda_feats, graphs, alignments, config
    )
    model = AcousticModel(
        stage="lda",
        dims=out_dim,
        silence_phone=tri_model.silence_phone,
        n_phone_states=tri_model.n_phone_states,
        n_silence_states=tri_model.n_silence_states,
        inventory=tri_model.inventory,
        models=models,
        backoff=backoff,
        feature_config=tri_model.feature_config,
        class_map=tri_model.class_map,
        lda=lda,
        schedule_label=tri_model.schedule_label,
        seed=tri_model.seed,
    )
    model, alignments, log = _run_stage(
        model, data, lda_feats, graphs, alignments, iters, max_gaussians, rng, config
    )
    return lda_feats, model, alignments, log


def estimate_speaker_transform(
    model: AcousticModel,
    utterance_ids: list[str],
    feats_raw: dict[str, np.ndarray],
    graphs: dict[str, AlignGraph],
    alignments: dict[str, Alignment],
    current: SpeakerTransform,
    config: TrainerConfig,
    speaker_id: str,
) -> SpeakerTransform:
    """Occupancy-weighted least-squares affine transform for one speaker.

    Responsibilities come from the current model and transform; the
    regression maps raw features onto the aligned state means, solved
    independently per dimension with the scale kept in safe bounds.
    """
    total_frames = sum(feats_raw[uid].shape[0] for uid in utterance_ids)
    if total_frames < config.speaker_min_frames:
        warnings.warn(
            f"speaker {speaker_id!r}: {total_frames} frames "
            f"< {config.speaker_min_frames}; using identity transform"
        )
        return SpeakerTransform.identity(speaker_id, model.dims)

    dims = model.dims
    g0 = np.zeros(dims)
    g1 = np.zeros(dims)
    g2 = np.zeros(dims)
    p0 = np.zeros(dims)
    p1 = np.zeros(dims)
    for uid in utterance_ids:
        graph = graphs[uid]
        path = alignments[uid].state_path
        x = feats_raw[uid]
        y = current.apply(x)
        frame_pdf = graph.state_pdf[path]
        for row, (key, state_index) in enumerate(graph.pdfs):
            mask = frame_pdf == row
            if not mask.any():
                continue
            gmm = model.resolve(key).states[state_index]
            xa = x[mask]
            inv = 1.0 / gmm.variances  # (K, D)
            mu_inv = gmm.means * inv
            if gmm.n_components == 1:
                weights = np.ones((xa.shape[0], 1))
            else:
                weights = gmm.posteriors(y[mask])
            winv = weights @ inv  # (n, D)
            wmu = weights @ mu_inv
            g0 += winv.sum(axis=0)
            g1 += (xa * winv).sum(axis=0)
            g2 += (xa * xa * winv).sum(axis=0)
            p0 += wmu.sum(axis=0)
            p1 += (xa * wmu).sum(axis=0)

    denom = g2 - g1 * g1 / g0
    numer = p1 - g1 * p0 / g0
    scale = np.where(np.abs(denom) > 1e-8, numer / np.maximum(np.abs(denom), 1e-12), 1.0)
    scale = np.clip(scale, config.scale_min, config.scale_max)
    offset = (p0 - scale * g1) / g0
    return SpeakerTransform(speaker_id, scale, offset)


def train_sat(
    data: TrainingData,
    lda_model: AcousticModel,
    graphs: dict[str, AlignGraph],
    alignments: dict[str, Alignment],
    lda_feats: dict[str, np.ndarray],
    iters: int,
    rng: np.random.Generator | None = None,
    config: TrainerConfig | None = None,
    max_gaussians: int = 512,
):
    """Alternate per-speaker transform estimation with EM passes."""
    config = config or data.config
    rng = rng if rng is not None else np.random.default_rng(0)
    by_speaker: dict[str, list[str]] = {}
    for uid in data.ids:
        by_speaker.setdefault(data.speakers[uid], []).append(uid)

    model = AcousticModel(
        stage="sat",
        dims=lda_model.dims,
        silence_phone=lda_model.silence_phone,
        n_phone_states=lda_model.n_phone_states,
        n_silence_states=lda_model.n_silence_states,
        inventory=lda_model.inventory,
        models={k: m.copy() for k, m in lda_model.models.items()},
        backoff={k: m.copy() for k, m in lda_model.backoff.items()},
        feature_config=lda_model.feature_config,
        class_map=lda_model.class_map,
        lda=lda_model.lda,
        schedule_label=lda_model.schedule_label,
        seed=lda_model.seed,
    )
    transforms = {
        spk: SpeakerTransform.identity(spk, model.dims) for spk in by_speaker
    }
    split_every = max(1, -(-iters // 4))
    cap = max_gaussians
    log: list[IterationRecord] = []
    occupancy = None
    for i in range(1, iters + 1):
        for spk in sorted(by_speaker):
            transforms[spk] = estimate_speaker_transform(
                model,
                by_speaker[spk],
                lda_feats,
                graphs,
                alignments,
                transforms[spk],
                config,
                spk,
            )
        feats_t = {
            uid: transforms[data.speakers[uid]].apply(lda_feats[uid])
            for uid in data.ids
        }
        if i > 1 and (i - 1) % split_every == 0 and occupancy is not None:
            current = model.total_gaussians()
            target = min(2 * current, cap)
            if target > current:
                model = split_gaussians(model, target, occupancy, rng, config)
        model, alignments, stats = em_iteration(
            model, data, feats_t, graphs, alignments, config
        )
        occupancy = stats.occupancy
        log.append(
            IterationRecord(i, stats.log_likelihood, stats.n_gaussians, stats.zero_occupancy)
        )
    model.speaker_transforms = dict(sorted(transforms.items()))
    return model, alignments, log


@dataclass
class PipelineResult:
    model: AcousticModel
    alignments: dict[str, Alignment]
    stage_logs: dict[str, list[IterationRecord]]
    class_map: PhoneClassMap


def train_pipeline(
    data: TrainingData,
    schedule: TrainSchedule,
    class_map: PhoneClassMap | None = None,
    seed: int = 0,
    out_dir: str | Path | None = None,
) -> PipelineResult:
    """mono -> tri -> lda -> sat with the schedule's four counts.

    Deterministic for a fixed seed, corpus, schedule, and class map.
    With ``out_dir`` set, each completed stage persists its model and
    iteration log before the next begins.
    """
    config = data.config
    rng = np.random.default_rng(seed)
    if class_map is None:
        class_map = default_identity_classes(set(data.inventory))
    logs: dict[str, list[IterationRecord]] = {}

    def persist(stage: str, model: AcousticModel, log):
        logs[stage] = log
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            model.seed = seed
            save_model(model, out / f"{stage}.am")
            (out / f"{stage}.log").write_text(
                "".join(r.render() + "\n" for r in log), encoding="utf-8"
            )

    mono_model, mono_ali, mono_log = train_monophone(data, schedule, rng, config)
    mono_model.seed = seed
    persist("mono", mono_model, mono_log)

    graphs, tri_model, tri_ali, tri_log = train_triphone(
        data, mono_model, mono_ali, class_map, schedule.tri_iters, rng, config,
        max_gaussians=schedule.max_gaussians[1],
    )
    tri_model.seed = seed
    persist("tri", tri_model, tri_log)

    lda_feats, lda_model, lda_ali, lda_log = train_lda_stage(
        data, tri_model, graphs, tri_ali, schedule.lda_iters, rng, config,
        max_gaussians=schedule.max_gaussians[2],
    )
    lda_model.seed = seed
    persist("lda", lda_model, lda_log)

    sat_model, sat_ali, sat_log = train_sat(
        data, lda_model, graphs, lda_ali, lda_feats, schedule.sat_iters, rng, config,
        max_gaussians=schedule.max_gaussians[3],
    )
    sat_model.seed = seed
    sat_model.schedule_label = schedule.label
    persist("sat", sat_model, sat_log)

    return PipelineResult(sat_model, sat_ali, logs, class_map)


def features_for_model(
    model: AcousticModel, data: TrainingData
) -> dict[str, np.ndarray]:
    """Feature space the model was trained in, from prepared data."""
    if model.lda is None:
        return data.feats39
    config = data.config
    return {
        uid: splice(
            FeatureMatrix(data.statics13[uid], data.frame_hop), config.splice_context
        ).data
        @ model.lda.matrix.T
        for uid in data.ids
    }


def align_training_data(
    model: AcousticModel, data: TrainingData
) -> dict[str, Alignment]:
    """Align prepared training data with a finished model."""
    feats = features_for_model(model, data)
    graphs = (
        data.mono_graphs
        if model.class_map is None
        else build_context_graphs(data, model.class_map)
    )
    alignments = {}
    for uid in data.ids:
        alignments[uid] = viterbi_align(
            model,
            FeatureMatrix(feats[uid], data.frame_hop),
            graphs[uid],
            speaker_transform=model.transform_for(data.speakers[uid]),
            utterance_id=uid,
        )
    return alignments


def alignment_to_tiers(
    alignment: Alignment, words: list[str], silence_phone: str
) -> tuple[Tier, Tier]:
    """Hypothesis word and phone tiers from one alignment."""
    phone_intervals = [
        Interval(p.start, p.end, silence_phone if p.word_index is None else p.phone)
        for p in alignment.phones
    ]
    word_spans: dict[int, list[float]] = {}
    for p in alignment.phones:
        if p.word_index is None:
            continue
        span = word_spans.setdefault(p.word_index, [p.start, p.end])
        span[0] = min(span[0], p.start)
        span[1] = max(span[1], p.end)
    word_intervals = [
        Interval(span[0], span[1], words[w]) for w, span in sorted(word_spans.items())
    ]
    return (
        Tier("words", WORD_TIER, tuple(word_intervals)),
        Tier("phones", PHONE_TIER, tuple(phone_intervals)),
    )


def align_corpus(
    model: AcousticModel,
    corpus: Corpus,
    lexicon: Lexicon,
    config: TrainerConfig | None = None,
) -> tuple[Corpus, list[tuple[str, str]]]:
    """Align a corpus; returns hypothesis utterances and skipped ids.

    Out-of-vocabulary words raise; utterances too short for their graph
    are skipped and reported. Unseen speakers use the identity transform.
    """
    config = config or TrainerConfig(
        silence_phone=model.silence_phone,
        n_phone_states=model.n_phone_states,
        n_silence_states=model.n_silence_states,
    )
    data = prepare_training_data(corpus, lexicon, config, model.feature_config)
    alignments = align_training_data(model, data)
    by_id = {u.id: u for u in corpus}
    hyp_utterances = []
    for uid in data.ids:
        utt = by_id[uid]
        word_tier, phone_tier = alignment_to_tiers(
            alignments[uid], data.words[uid], model.silence_phone
        )
        hyp_utterances.append(
            Utterance(
                id=uid,
                audio=utt.audio,
                word_tier=word_tier,
                phone_tier=phone_tier,
                speaker_id=utt.speaker_id,
                language_id=utt.language_id,
                provenance=utt.provenance,
            )
        )
    return Corpus(f"{corpus.name}-aligned", tuple(hyp_utterances)), data.skipped
