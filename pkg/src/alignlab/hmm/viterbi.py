"""Exact max-likelihood alignment over linear graphs.

Forced-alignment graphs are chains with optional-silence detours, so no
pruning is used: the recursion visits every (frame, state) cell. Phone
boundaries fall on frame times (multiples of the hop).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoPathError
from ..features import FeatureMatrix
from .graph import AlignGraph
from .model import LOG_ZERO, AcousticModel, SpeakerTransform


@dataclass(frozen=True)
class AlignedPhone:
    phone: str
    start: float
    end: float
    word_index: int | None  # None for silence


@dataclass
class Alignment:
    utterance_id: str
    phones: tuple[AlignedPhone, ...]
    log_likelihood: float
    frame_hop: float
    n_frames: int
    state_path: np.ndarray  # graph-state index per frame

    def boundaries(self) -> list[float]:
        return [p.start for p in self.phones] + [self.phones[-1].end]


def emission_matrix(model: AcousticModel, graph: AlignGraph, x: np.ndarray) -> np.ndarray:
    """Log-densities for every distinct pdf in the graph, (n_pdfs, T)."""
    x_sq = x * x
    rows = np.empty((len(graph.pdfs), x.shape[0]))
    for row, (key, state_index) in enumerate(graph.pdfs):
        gmm = model.resolve(key).states[state_index]
        rows[row] = gmm.loglik(x, x_sq)
    return rows


def transition_arrays(model: AcousticModel, graph: AlignGraph):
    """Per-state loop/forward log-probs and combined edge weights."""
    n_pdfs = len(graph.pdfs)
    loop_by_pdf = np.empty(n_pdfs)
    fwd_by_pdf = np.empty(n_pdfs)
    for row, (key, state_index) in enumerate(graph.pdfs):
        phone_model = model.resolve(key)
        loop_by_pdf[row] = phone_model.loop_logp[state_index]
        fwd_by_pdf[row] = phone_model.fwd_logp[state_index]
    loop_lp = loop_by_pdf[graph.state_pdf]
    fwd_lp = fwd_by_pdf[graph.state_pdf]
    edge_logp = np.where(
        graph.pred_is_loop,
        loop_lp[graph.pred_idx],
        fwd_lp[graph.pred_idx] + graph.pred_extra,
    )
    exit_bonus = np.full(graph.n_states, LOG_ZERO)
    exit_bonus[graph.exit_idx] = fwd_lp[graph.exit_idx] + graph.exit_extra
    return loop_lp, fwd_lp, edge_logp, exit_bonus


def viterbi_align(
    model: AcousticModel,
    features: FeatureMatrix,
    graph: AlignGraph,
    speaker_transform: SpeakerTransform | None = None,
    utterance_id: str = "",
) -> Alignment:
    """Best state path by dynamic programming; exact, no pruning."""
    x = features.data
    if speaker_transform is not None and not speaker_transform.is_identity():
        x = speaker_transform.apply(x)
    n_frames = x.shape[0]
    if n_frames < graph.min_frames:
        raise NoPathError(
            f"utterance {utterance_id!r}: {n_frames} frames cannot cover "
            f"{graph.min_frames} mandatory states"
        )
    emit = emission_matrix(model, graph, x)
    path, score = best_path(graph, emit, model)
    if score <= LOG_ZERO / 2:
        raise NoPathError(f"utterance {utterance_id!r}: no valid path")
    return Alignment(
        utterance_id=utterance_id,
        phones=tuple(path_to_phones(graph, path, features.frame_hop, features.origin)),
        log_likelihood=float(score),
        frame_hop=features.frame_hop,
        n_frames=n_frames,
        state_path=path,
    )


def _numpy_kernel(pred_idx, edge_logp, emit_states, entry_idx, entry_extra, exit_bonus):
    n_states, n_frames = emit_states.shape
    delta = np.full(n_states, LOG_ZERO)
    delta[entry_idx] = entry_extra + emit_states[entry_idx, 0]
    backpointer = np.empty((n_frames, n_states), dtype=np.int32)
    cols = np.arange(n_states)
    for t in range(1, n_frames):
        cand = delta[pred_idx] + edge_logp
        best = np.argmax(cand, axis=0)
        delta = cand[best, cols] + emit_states[:, t]
        backpointer[t] = pred_idx[best, cols]

    final = delta + exit_bonus
    last = int(np.argmax(final))
    score = float(final[last])

    path = np.empty(n_frames, dtype=np.int32)
    path[-1] = last
    for t in range(n_frames - 1, 0, -1):
        path[t - 1] = backpointer[t, path[t]]
    return path, score


def _make_jit_kernel():
    """Compiled twin of ``_numpy_kernel``; same arithmetic, same order."""
    import os

    if os.environ.get("ALIGNLAB_NO_NUMBA"):
        return None
    try:
        from numba import njit
    except ImportError:
        return None

    @njit(cache=True)
    def kernel(pred_idx, edge_logp, emit_states, entry_idx, entry_extra, exit_bonus):
        n_states, n_frames = emit_states.shape
        n_preds = pred_idx.shape[0]
        delta = np.full(n_states, LOG_ZERO)
        for j in range(entry_idx.shape[0]):
            s = entry_idx[j]
            delta[s] = entry_extra[j] + emit_states[s, 0]
        backpointer = np.empty((n_frames, n_states), dtype=np.int32)
        new_delta = np.empty(n_states)
        for t in range(1, n_frames):
            for s in range(n_states):
                best = delta[pred_idx[0, s]] + edge_logp[0, s]
                best_pred = pred_idx[0, s]
                for k in range(1, n_preds):
                    value = delta[pred_idx[k, s]] + edge_logp[k, s]
                    if value > best:
                        best = value
                        best_pred = pred_idx[k, s]
                new_delta[s] = best + emit_states[s, t]
                backpointer[t, s] = best_pred
            delta, new_delta = new_delta, delta

        last = 0
        score = delta[0] + exit_bonus[0]
        for s in range(1, n_states):
            value = delta[s] + exit_bonus[s]
            if value > score:
                score = value
                last = s
        path = np.empty(n_frames, dtype=np.int32)
        path[-1] = last
        for t in range(n_frames - 1, 0, -1):
            path[t - 1] = backpointer[t, path[t]]
        return path, score

    return kernel


_JIT_KERNEL = _make_jit_kernel()


def best_path(
    graph: AlignGraph, emit: np.ndarray, model: AcousticModel
) -> tuple[np.ndarray, float]:
    """Run the recursion; returns (state path, path log-probability)."""
    _, _, edge_logp, exit_bonus = transition_arrays(model, graph)
    emit_states = np.ascontiguousarray(emit[graph.state_pdf])  # (S, T)
    kernel = _JIT_KERNEL or _numpy_kernel
    path, score = kernel(
        graph.pred_idx,
        edge_logp,
        emit_states,
        graph.entry_idx,
        graph.entry_extra,
        exit_bonus,
    )
    return path, float(score)


def path_to_phones(
    graph: AlignGraph, path: np.ndarray, hop: float, origin: float = 0.0
) -> list[AlignedPhone]:
    """Collapse a state path into phone segments at frame boundaries."""
    slots_on_path = graph.state_slot[path]
    out = []
    start = 0
    for t in range(1, len(path) + 1):
        if t == len(path) or slots_on_path[t] != slots_on_path[start]:
            slot = graph.slots[slots_on_path[start]]
            out.append(
                AlignedPhone(
                    phone=slot.phone,
                    start=origin + start * hop,
                    end=origin + t * hop,
                    word_index=slot.word_index,
                )
            )
            start = t
    return out
