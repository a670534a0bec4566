"""Independent reference computations used to check the implementations.

Everything here deliberately avoids the library's own code paths:
tone levels are measured with a plain DFT, alignment scores by
exhaustive path enumeration, LDA by the two-class closed form, and so
on. Tests compare library output against these.
"""

from __future__ import annotations

import numpy as np


def sine(freq: float, seconds: float, rate: int = 16000, amplitude: float = 1.0) -> np.ndarray:
    t = np.arange(int(seconds * rate)) / rate
    return amplitude * np.sin(2 * np.pi * freq * t)


def tone_amplitude(samples: np.ndarray, rate: int, freq: float, half_width: float = 8.0) -> float:
    """Amplitude of a tone measured from the DFT magnitude near ``freq``."""
    spectrum = np.fft.rfft(samples)
    freqs = np.fft.rfftfreq(len(samples), 1.0 / rate)
    band = np.abs(freqs - freq) <= half_width
    # Peak magnitude * 2/N recovers the sine amplitude.
    return 2.0 * np.abs(spectrum[band]).max() / len(samples)


def band_energy(samples: np.ndarray, rate: int, low: float, high: float) -> float:
    spectrum = np.fft.rfft(samples)
    freqs = np.fft.rfftfreq(len(samples), 1.0 / rate)
    band = (freqs >= low) & (freqs <= high)
    return float(np.sum(np.abs(spectrum[band]) ** 2))


def dominant_frequency(samples: np.ndarray, rate: int, above_hz: float = 20.0) -> float:
    spectrum = np.abs(np.fft.rfft(samples))
    freqs = np.fft.rfftfreq(len(samples), 1.0 / rate)
    spectrum[freqs < above_hz] = 0.0
    return float(freqs[np.argmax(spectrum)])


def rms(samples: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.asarray(samples, dtype=np.float64) ** 2)))


def db(ratio: float) -> float:
    return 20.0 * np.log10(max(ratio, 1e-30))


def exhaustive_segmentations(word: str, graphemes: list[str]) -> list[list[str]]:
    """All ways to tile ``word`` with the grapheme set."""
    if not word:
        return [[]]
    out = []
    for g in graphemes:
        if word.startswith(g):
            for rest in exhaustive_segmentations(word[len(g):], graphemes):
                out.append([g] + rest)
    return out


def fisher_direction(class_a: np.ndarray, class_b: np.ndarray, ridge: float = 1e-4) -> np.ndarray:
    """Two-class closed form: Sw^-1 (mu_a - mu_b), unit length."""
    mu_a, mu_b = class_a.mean(axis=0), class_b.mean(axis=0)
    centered = np.vstack([class_a - mu_a, class_b - mu_b])
    sw = centered.T @ centered / len(centered) + ridge * np.eye(class_a.shape[1])
    w = np.linalg.solve(sw, mu_a - mu_b)
    return w / np.linalg.norm(w)


def enumerate_paths(graph, edge_logp, emit_states, entry_pairs, exit_bonus):
    """Every legal state sequence with its score, accumulated in the
    same left-to-right order as the aligner."""
    n_frames = emit_states.shape[1]
    # successor list from the predecessor arrays
    succs = {s: [] for s in range(graph.n_states)}
    n_preds, n_states = graph.pred_idx.shape
    for s in range(n_states):
        for k in range(n_preds):
            src = int(graph.pred_idx[k, s])
            w = float(edge_logp[k, s])
            if w <= -1e29:
                continue
            succs[src].append((s, w))

    best_score = -np.inf
    best_path = None
    stack = []
    for s, extra in entry_pairs:
        stack.append(([int(s)], float(extra) + float(emit_states[int(s), 0])))
    while stack:
        path, score = stack.pop()
        t = len(path)
        if t == n_frames:
            total = score + float(exit_bonus[path[-1]])
            if total > best_score:
                best_score = total
                best_path = path
            continue
        for target, w in succs[path[-1]]:
            stack.append((path + [target], (score + w) + float(emit_states[target, t])))
    return best_path, best_score
