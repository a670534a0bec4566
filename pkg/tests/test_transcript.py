from hypothesis import given, settings, strategies as st

from alignlab.textgrid import Interval, Tier
from alignlab.transcript import (
    NormalizationRules,
    filter_short_intervals,
    normalize_tier,
    normalize_transcript,
)


def test_partial_word_and_note_dropped():
    assert normalize_transcript("wirri- [laughs] wirriji") == "wirriji"


def test_hyphen_deleted():
    assert normalize_transcript("yan-nhangu") == "yannhangu"


def test_whitespace_collapsed():
    assert normalize_transcript("ngaju   marri") == "ngaju marri"


def test_parenthesized_note_dropped_case_preserved():
    assert normalize_transcript("Ngaju (coughs) MARRI") == "Ngaju MARRI"


def test_empty_output_allowed():
    assert normalize_transcript("[note only]") == ""
    assert normalize_transcript("wirri-") == ""


def test_custom_rules():
    rules = NormalizationRules(partial_word_pattern=r"\S*\+$", remove_hyphens=False)
    assert normalize_transcript("abc+ yan-nhangu", rules) == "yan-nhangu"


@given(st.text(max_size=64))
@settings(max_examples=150, deadline=None)
def test_normalize_idempotent(raw):
    once = normalize_transcript(raw)
    assert normalize_transcript(once) == once


def _tier(spans):
    return Tier("words", "word", tuple(Interval(s, e, l) for s, e, l in spans))


def test_short_interval_removed():
    tier = _tier([(0.0, 0.095, "a"), (0.095, 1.0, "b")])
    out, removed = filter_short_intervals(tier)
    assert removed == 1
    assert [iv.label for iv in out.intervals] == ["", "b"]
    assert out.intervals[0].start == 0.0 and out.intervals[0].end == 0.095


def test_exactly_100ms_kept():
    tier = _tier([(0.0, 0.100, "a")])
    out, removed = filter_short_intervals(tier)
    assert removed == 0
    assert out.intervals[0].label == "a"


def test_empty_labels_untouched():
    tier = _tier([(0.0, 0.05, ""), (0.05, 0.09, "")])
    out, removed = filter_short_intervals(tier)
    assert removed == 0
    assert out == tier


def test_filter_idempotent():
    tier = _tier([(0.0, 0.05, "x"), (0.05, 0.3, "y"), (0.3, 0.35, "z")])
    once, removed_once = filter_short_intervals(tier)
    twice, removed_twice = filter_short_intervals(once)
    assert removed_once == 2
    assert removed_twice == 0
    assert once == twice


def test_normalize_tier_applies_rules():
    tier = _tier([(0.0, 0.5, "wirri- wirriji"), (0.5, 1.0, "(note)")])
    out = normalize_tier(tier)
    assert [iv.label for iv in out.intervals] == ["wirriji", ""]
