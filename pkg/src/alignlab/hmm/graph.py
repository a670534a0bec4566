"""Linear forced-alignment graphs with optional silence.

A graph is the state chain for one transcript: each word's phones in
order, three emitting states per phone (five for silence), with a
skippable silence instance allowed at the utterance edges and between
words. Transition structure is precomputed as predecessor arrays so the
Viterbi recursion can run vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import OovError, ValidationError
from ..lexicon import Lexicon, PhoneClassMap
from .model import CROSSWORD_MARKER, EDGE_MARKER, LOG_ZERO, ContextKey

DEFAULT_SILENCE_PHONE = "sil"
N_PHONE_STATES = 3
N_SILENCE_STATES = 5
SILENCE_PROB = 0.5  # chance of taking an optional silence slot


@dataclass(frozen=True)
class PhoneSlot:
    phone: str
    model_key: object  # phone str or ContextKey
    word_index: int | None  # None for silence
    optional: bool
    first_state: int
    n_states: int


@dataclass
class AlignGraph:
    """States plus vectorized transition structure for one utterance."""

    slots: list[PhoneSlot]
    # Per graph state:
    state_slot: np.ndarray  # (S,) slot index
    state_pdf: np.ndarray  # (S,) index into pdfs
    state_offset: np.ndarray  # (S,) state index within its phone model
    pdfs: list  # distinct (model_key, state_index) pairs
    # Transition structure: predecessors per state, padded.
    pred_idx: np.ndarray  # (P, S) int32, -1 padding handled via pred_ok
    pred_extra: np.ndarray  # (P, S) additive log-prob (silence choice)
    pred_is_loop: np.ndarray  # (P, S) bool; loop edges use the state's own loop prob
    entry_idx: np.ndarray  # (E,) states reachable at t=0
    entry_extra: np.ndarray  # (E,)
    exit_idx: np.ndarray  # (X,) states allowed at t=T-1
    exit_extra: np.ndarray  # (X,) added on top of the state's forward log-prob

    @property
    def n_states(self) -> int:
        return len(self.state_slot)

    @property
    def min_frames(self) -> int:
        return sum(s.n_states for s in self.slots if not s.optional)

    @property
    def n_phone_states(self) -> int:
        return sum(s.n_states for s in self.slots if s.word_index is not None)

    @property
    def n_optional_silence_slots(self) -> int:
        return sum(1 for s in self.slots if s.optional)

    def mandatory_slots(self) -> list[PhoneSlot]:
        return [s for s in self.slots if not s.optional]


def _context_symbol(
    phones: list[str], words: list[int], index: int, side: int, class_map: PhoneClassMap
) -> str:
    neighbor = index + side
    if neighbor < 0 or neighbor >= len(phones):
        return EDGE_MARKER
    if words[neighbor] != words[index]:
        return CROSSWORD_MARKER
    return str(class_map.class_of(phones[neighbor]))


def compile_training_graph(
    words: list[str],
    lexicon: Lexicon,
    silence_phone: str = DEFAULT_SILENCE_PHONE,
    class_map: PhoneClassMap | None = None,
    silence_prob: float = SILENCE_PROB,
    n_phone_states: int = N_PHONE_STATES,
    n_silence_states: int = N_SILENCE_STATES,
) -> AlignGraph:
    """Compile a transcript into its alignment graph.

    Uses the first pronunciation of each word. With a class map, phone
    slots carry collapsed context keys: word-internal neighbours
    contribute their class, word boundaries the cross-word marker, and
    utterance edges the edge marker; silence stays context-independent.
    """
    missing = [w for w in words if w not in lexicon]
    if missing:
        raise OovError(missing)
    if not (0.0 < silence_prob < 1.0):
        raise ValidationError(f"silence probability {silence_prob} outside (0, 1)")

    phones: list[str] = []
    word_of_phone: list[int] = []
    for w_index, word in enumerate(words):
        for phone in lexicon.pronunciation(word):
            phones.append(phone)
            word_of_phone.append(w_index)

    slots: list[PhoneSlot] = []
    cursor = 0

    def add_slot(phone, key, word_index, optional, n_states):
        nonlocal cursor
        slots.append(PhoneSlot(phone, key, word_index, optional, cursor, n_states))
        cursor += n_states

    if not phones:
        # Silence-only utterance: one mandatory silence instance.
        add_slot(silence_phone, silence_phone, None, False, n_silence_states)
    else:
        add_slot(silence_phone, silence_phone, None, True, n_silence_states)
        for index, phone in enumerate(phones):
            if class_map is not None:
                key = ContextKey(
                    _context_symbol(phones, word_of_phone, index, -1, class_map),
                    phone,
                    _context_symbol(phones, word_of_phone, index, +1, class_map),
                )
            else:
                key = phone
            add_slot(phone, key, word_of_phone[index], False, n_phone_states)
            boundary = (
                index + 1 < len(phones)
                and word_of_phone[index + 1] != word_of_phone[index]
            )
            if boundary:
                add_slot(silence_phone, silence_phone, None, True, n_silence_states)
        add_slot(silence_phone, silence_phone, None, True, n_silence_states)

    n_states = cursor
    state_slot = np.empty(n_states, dtype=np.int32)
    state_offset = np.empty(n_states, dtype=np.int32)
    for slot_index, slot in enumerate(slots):
        for k in range(slot.n_states):
            state_slot[slot.first_state + k] = slot_index
            state_offset[slot.first_state + k] = k

    pdf_index: dict = {}
    pdfs: list = []
    state_pdf = np.empty(n_states, dtype=np.int32)
    for s in range(n_states):
        slot = slots[state_slot[s]]
        pair = (slot.model_key, int(state_offset[s]))
        if pair not in pdf_index:
            pdf_index[pair] = len(pdfs)
            pdfs.append(pair)
        state_pdf[s] = pdf_index[pair]

    log_sil = math.log(silence_prob)
    log_skip = math.log(1.0 - silence_prob)

    def slot_entries(start_index: int) -> list[tuple[int, float]]:
        """Entry states (and extra log-prob) from slot position onward."""
        entries: list[tuple[int, float]] = []
        index = start_index
        carried = 0.0
        while index < len(slots):
            slot = slots[index]
            if slot.optional:
                entries.append((slot.first_state, carried + log_sil))
                carried += log_skip
                index += 1
            else:
                entries.append((slot.first_state, carried))
                return entries
        return entries  # ran off the end: all remaining slots optional

    # Incoming edges per state.
    incoming: list[list[tuple[int, float]]] = [[] for _ in range(n_states)]
    exit_options: list[tuple[int, float]] = []
    for slot_index, slot in enumerate(slots):
        for k in range(slot.n_states - 1):
            s = slot.first_state + k
            incoming[s + 1].append((s, 0.0))
        last = slot.first_state + slot.n_states - 1
        targets = slot_entries(slot_index + 1)
        for target, extra in targets:
            incoming[target].append((last, extra))
        # Exiting from here is allowed if every later slot is optional.
        if all(s.optional for s in slots[slot_index + 1 :]):
            skip_all = sum(log_skip for s in slots[slot_index + 1 :] if s.optional)
            exit_options.append((last, skip_all))

    entries = slot_entries(0)
    max_preds = max(1 + len(incoming[s]) for s in range(n_states))
    pred_idx = np.zeros((max_preds, n_states), dtype=np.int32)
    pred_extra = np.full((max_preds, n_states), LOG_ZERO)
    pred_is_loop = np.zeros((max_preds, n_states), dtype=bool)
    for s in range(n_states):
        pred_idx[0, s] = s
        pred_extra[0, s] = 0.0
        pred_is_loop[0, s] = True
        for row, (src, extra) in enumerate(incoming[s], start=1):
            pred_idx[row, s] = src
            pred_extra[row, s] = extra
            pred_is_loop[row, s] = False

    return AlignGraph(
        slots=slots,
        state_slot=state_slot,
        state_pdf=state_pdf,
        state_offset=state_offset,
        pdfs=pdfs,
        pred_idx=pred_idx,
        pred_extra=pred_extra,
        pred_is_loop=pred_is_loop,
        entry_idx=np.array([s for s, _ in entries], dtype=np.int32),
        entry_extra=np.array([extra for _, extra in entries]),
        exit_idx=np.array([s for s, _ in exit_options], dtype=np.int32),
        exit_extra=np.array([extra for _, extra in exit_options]),
    )
