"""Transcript cleanup rules applied when a corpus is ingested.

The rules mirror common documentation-corpus conventions: tokens marked
as partially transcribed are dropped, annotator notes in brackets or
parentheses are dropped, and hyphens inside words are deleted. The
marker conventions are configurable because source corpora differ.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .textgrid import Interval, Tier

DEFAULT_NOTE_PATTERNS = (r"\[[^\]]*\]", r"\([^)]*\)")


@dataclass(frozen=True)
class NormalizationRules:
    partial_word_pattern: str = r"\S*-$"
    note_patterns: tuple[str, ...] = DEFAULT_NOTE_PATTERNS
    remove_hyphens: bool = True

    def partial_regex(self) -> re.Pattern:
        return re.compile(self.partial_word_pattern)


def normalize_transcript(raw: str, rules: NormalizationRules | None = None) -> str:
    """Clean one transcript string; always succeeds, may return ''."""
    rules = rules or NormalizationRules()
    text = raw
    for pattern in rules.note_patterns:
        text = re.sub(pattern, " ", text)
    partial = rules.partial_regex()
    tokens = []
    for token in text.split():
        if partial.fullmatch(token):
            continue
        if rules.remove_hyphens:
            token = token.replace("-", "")
        if token:
            tokens.append(token)
    return " ".join(tokens)


def filter_short_intervals(
    tier: Tier, min_duration: float = 0.100
) -> tuple[Tier, int]:
    """Blank out labeled intervals strictly shorter than ``min_duration``.

    The span stays in place with an empty label so tier timing is
    untouched; returns the new tier and how many labels were removed.
    """
    removed = 0
    intervals = []
    for iv in tier.intervals:
        if iv.label and iv.duration < min_duration:
            intervals.append(Interval(iv.start, iv.end, ""))
            removed += 1
        else:
            intervals.append(iv)
    return tier.with_intervals(intervals), removed


def normalize_tier(tier: Tier, rules: NormalizationRules | None = None) -> Tier:
    """Apply transcript normalization to every label of a tier."""
    out = [
        Interval(iv.start, iv.end, normalize_transcript(iv.label, rules))
        for iv in tier.intervals
    ]
    return tier.with_intervals(out)
