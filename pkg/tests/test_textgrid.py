import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alignlab.errors import PointTierError, TextGridParseError
from alignlab.textgrid import (
    Interval,
    Tier,
    load_textgrid,
    parse_textgrid,
    save_textgrid,
    serialize_textgrid,
)

LONG_GRID = """File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 2
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 2
        intervals: size = 2
        intervals [1]:
            xmin = 0
            xmax = 1
            text = "ngaju"
        intervals [2]:
            xmin = 1
            xmax = 2
            text = ""
"""

SHORT_GRID = """File type = "ooTextFile"
Object class = "TextGrid"

0
2
<exists>
1
"IntervalTier"
"words"
0
2
2
0
1
"ngaju"
1
2
""
"""


def test_long_format_basic():
    tiers, duration = parse_textgrid(LONG_GRID)
    assert duration == 2.0
    assert len(tiers) == 1
    tier = tiers[0]
    assert tier.name == "words"
    assert len(tier.intervals) == 2
    assert tier.intervals[0].label == "ngaju"
    assert tier.intervals[1].label == ""


def test_short_format_matches_long():
    long_tiers, long_dur = parse_textgrid(LONG_GRID)
    short_tiers, short_dur = parse_textgrid(SHORT_GRID)
    assert long_dur == short_dur
    assert long_tiers == short_tiers


def test_utf16_roundtrip(tmp_path):
    for encoding, bom in (("utf-16-le", b"\xff\xfe"), ("utf-16-be", b"\xfe\xff")):
        path = tmp_path / f"{encoding}.TextGrid"
        path.write_bytes(bom + LONG_GRID.encode(encoding))
        tiers, duration = load_textgrid(path)
        assert tiers == parse_textgrid(LONG_GRID)[0]
        assert duration == 2.0


def test_point_tier_rejected():
    grid = LONG_GRID.replace('"IntervalTier"', '"TextTier"')
    with pytest.raises(PointTierError):
        parse_textgrid(grid)


def test_syntax_error_carries_line_number():
    broken = LONG_GRID.replace('text = "ngaju"', "text = ")
    with pytest.raises(TextGridParseError) as err:
        parse_textgrid(broken)
    assert "line" in str(err.value)


def test_overlapping_intervals_rejected():
    bad = LONG_GRID.replace("xmin = 1\n", "xmin = 0.5\n", 1)
    with pytest.raises(TextGridParseError, match="overlap"):
        parse_textgrid(bad)


def test_interval_beyond_xmax_rejected():
    bad = LONG_GRID.replace(
        "            xmax = 2\n            text = \"\"",
        "            xmax = 9\n            text = \"\"",
    )
    with pytest.raises(TextGridParseError, match="exceeds"):
        parse_textgrid(bad)


def test_serializer_fills_gaps():
    tier = Tier("words", "word", (Interval(0, 1, "a"), Interval(2, 3, "b")))
    text = serialize_textgrid([tier], 3.0)
    tiers, duration = parse_textgrid(text)
    assert duration == 3.0
    spans = [(iv.start, iv.end, iv.label) for iv in tiers[0].intervals]
    assert spans == [(0.0, 1.0, "a"), (1.0, 2.0, ""), (2.0, 3.0, "b")]


def test_empty_tier_list():
    text = serialize_textgrid([], 1.0)
    tiers, duration = parse_textgrid(text)
    assert tiers == []
    assert duration == 1.0


def test_quote_escaping_roundtrip():
    tier = Tier("words", "word", (Interval(0, 1, 'say "hi" now'),))
    tiers, _ = parse_textgrid(serialize_textgrid([tier], 1.0))
    assert tiers[0].intervals[0].label == 'say "hi" now'


@st.composite
def random_tiers(draw):
    n_tiers = draw(st.integers(1, 3))
    duration = draw(st.floats(1.0, 8.0))
    labels = st.text(
        alphabet=st.characters(
            whitelist_categories=("L", "N"), whitelist_characters=' "ːɳŋ'
        ),
        max_size=6,
    )
    tiers = []
    for t in range(n_tiers):
        n = draw(st.integers(1, 6))
        cuts = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=n - 1, max_size=n - 1, unique=True)))
        bounds = [0.0] + [c * duration for c in cuts] + [duration]
        intervals = []
        for i in range(n):
            if bounds[i + 1] - bounds[i] < 1e-3:
                continue
            intervals.append(Interval(bounds[i], bounds[i + 1], draw(labels)))
        if not intervals:
            intervals = [Interval(0.0, duration, "x")]
        tiers.append(Tier(f"tier{t}", "word", tuple(intervals)))
    return tiers, duration


@given(random_tiers())
@settings(max_examples=60, deadline=None)
def test_parse_serialize_identity(tiers_duration):
    tiers, duration = tiers_duration
    text = serialize_textgrid(tiers, duration)
    parsed, parsed_duration = parse_textgrid(text)
    assert parsed_duration == pytest.approx(duration, abs=1e-6)
    assert len(parsed) == len(tiers)
    for original, back in zip(tiers, parsed):
        assert back.name == original.name
        # every labeled original interval survives with times within 1e-6
        labeled_back = [iv for iv in back.intervals if iv.label]
        labeled_orig = [iv for iv in original.intervals if iv.label]
        assert [iv.label for iv in labeled_back] == [iv.label for iv in labeled_orig]
        for a, b in zip(labeled_orig, labeled_back):
            assert abs(a.start - b.start) <= 1e-6
            assert abs(a.end - b.end) <= 1e-6


def test_save_and_load(tmp_path):
    tier = Tier("phones", "phone", (Interval(0.0, 0.5, "a"), Interval(0.5, 1.0, "b")))
    save_textgrid([tier], 1.0, tmp_path / "x.TextGrid")
    tiers, duration = load_textgrid(tmp_path / "x.TextGrid")
    assert duration == 1.0
    assert tiers[0].kind == "phone"
    assert [iv.label for iv in tiers[0].intervals] == ["a", "b"]
