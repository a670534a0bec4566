"""Praat TextGrid parsing and serialization.

Both the long ("verbose") and short text formats are accepted on input.
The two formats carry the same value sequence; the parser tokenizes the
whole stream into numbers, quoted strings, and flags, and interprets it
positionally, which handles either layout and labels containing newlines.
Output is always the long format in UTF-8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import PointTierError, TextGridParseError

WORD_TIER = "word"
PHONE_TIER = "phone"

_PHONE_NAME_HINTS = ("phone", "segment", "mau", "kan")


@dataclass(frozen=True)
class Interval:
    start: float
    end: float
    label: str

    def __post_init__(self):
        if not (0.0 <= self.start < self.end):
            raise TextGridParseError(
                f"bad interval [{self.start}, {self.end}] {self.label!r}: need 0 <= start < end"
            )

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Tier:
    """An ordered, non-overlapping interval tier.

    Empty-label intervals are kept: they represent unannotated spans
    (silence/gaps) exactly as Praat stores them.
    """

    name: str
    kind: str
    intervals: tuple[Interval, ...]

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        prev_end = 0.0
        for iv in self.intervals:
            if iv.start < prev_end - 1e-9:
                raise TextGridParseError(
                    f"tier {self.name!r}: interval at {iv.start:.6f} overlaps previous "
                    f"(ends {prev_end:.6f})"
                )
            prev_end = iv.end

    def labeled(self) -> list[Interval]:
        return [iv for iv in self.intervals if iv.label]

    def end_time(self) -> float:
        return self.intervals[-1].end if self.intervals else 0.0

    def with_intervals(self, intervals) -> "Tier":
        return Tier(self.name, self.kind, tuple(intervals))


def infer_tier_kind(name: str) -> str:
    low = name.lower()
    if any(h in low for h in _PHONE_NAME_HINTS):
        return PHONE_TIER
    return WORD_TIER


@dataclass(frozen=True)
class _Token:
    value: object  # float, str, or flag string like "<exists>"
    kind: str  # "number" | "string" | "flag"
    line: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if c == '"':
            start_line = line
            i += 1
            out = []
            while True:
                if i >= n:
                    raise TextGridParseError("unterminated string", line=start_line)
                c = text[i]
                if c == '"':
                    if i + 1 < n and text[i + 1] == '"':  # Praat escapes " as ""
                        out.append('"')
                        i += 2
                        continue
                    i += 1
                    break
                if c == "\n":
                    line += 1
                out.append(c)
                i += 1
            tokens.append(_Token("".join(out), "string", start_line))
            continue
        # Bare word: number, <flag>, or long-format decoration to discard.
        j = i
        while j < n and not text[j].isspace():
            j += 1
        word = text[i:j]
        if word.startswith("<") and word.endswith(">"):
            tokens.append(_Token(word, "flag", line))
        else:
            try:
                tokens.append(_Token(float(word), "number", line))
            except ValueError:
                pass  # key names, '=', 'item', brackets: carry no value
        i = j
    return tokens


class _TokenReader:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    @property
    def line(self) -> int:
        if self._pos < len(self._tokens):
            return self._tokens[self._pos].line
        return self._tokens[-1].line if self._tokens else 1

    def _next(self, kind: str, what: str):
        if self._pos >= len(self._tokens):
            raise TextGridParseError(f"unexpected end of file, expected {what}", line=self.line)
        tok = self._tokens[self._pos]
        if tok.kind != kind:
            raise TextGridParseError(
                f"expected {what}, found {tok.value!r}", line=tok.line
            )
        self._pos += 1
        return tok.value

    def number(self, what: str) -> float:
        return self._next("number", what)

    def integer(self, what: str) -> int:
        value = self.number(what)
        if value != int(value):
            raise TextGridParseError(f"expected integer {what}, got {value}", line=self.line)
        return int(value)

    def string(self, what: str) -> str:
        return self._next("string", what)

    def peek_kind(self) -> str | None:
        if self._pos >= len(self._tokens):
            return None
        return self._tokens[self._pos].kind

    def skip_flag(self):
        if self.peek_kind() == "flag":
            self._pos += 1


def parse_textgrid(text: str) -> tuple[list[Tier], float]:
    """Parse TextGrid text (long or short format) into interval tiers.

    Returns the tiers and the grid duration (global xmax). Point tiers
    raise :class:`PointTierError`.
    """
    reader = _TokenReader(_tokenize(text))
    file_type = reader.string("file type")
    if file_type != "ooTextFile":
        raise TextGridParseError(f"not a TextGrid: file type {file_type!r}", line=1)
    object_class = reader.string("object class")
    if object_class != "TextGrid":
        raise TextGridParseError(f"not a TextGrid: object class {object_class!r}", line=1)

    xmin = reader.number("grid xmin")
    xmax = reader.number("grid xmax")
    if xmax <= xmin:
        raise TextGridParseError(f"grid xmax {xmax} not after xmin {xmin}", line=reader.line)
    reader.skip_flag()  # tiers? <exists>
    tier_count = reader.integer("tier count")

    tiers: list[Tier] = []
    for _ in range(tier_count):
        tier_class = reader.string("tier class")
        tier_name = reader.string("tier name")
        if tier_class == "TextTier":
            raise PointTierError(
                f"tier {tier_name!r} is a point tier; only interval tiers are supported",
                line=reader.line,
            )
        if tier_class != "IntervalTier":
            raise TextGridParseError(
                f"unknown tier class {tier_class!r}", line=reader.line
            )
        reader.number("tier xmin")
        tier_xmax = reader.number("tier xmax")
        if tier_xmax > xmax + 1e-6:
            raise TextGridParseError(
                f"tier {tier_name!r} xmax {tier_xmax} exceeds grid xmax {xmax}",
                line=reader.line,
            )
        n_intervals = reader.integer("interval count")
        intervals = []
        for _ in range(n_intervals):
            line = reader.line
            start = reader.number("interval xmin")
            end = reader.number("interval xmax")
            label = reader.string("interval text")
            if end > xmax + 1e-6:
                raise TextGridParseError(
                    f"interval end {end} exceeds grid xmax {xmax}", line=line
                )
            if end <= start:
                raise TextGridParseError(
                    f"interval [{start}, {end}] has non-positive length", line=line
                )
            intervals.append(Interval(max(start, 0.0), end, label))
        try:
            tiers.append(Tier(tier_name, infer_tier_kind(tier_name), tuple(intervals)))
        except TextGridParseError as exc:
            raise TextGridParseError(str(exc), line=reader.line) from None
    return tiers, xmax


def load_textgrid(path: str | Path) -> tuple[list[Tier], float]:
    """Read a TextGrid file, handling UTF-8 and UTF-16 with BOM."""
    blob = Path(path).read_bytes()
    if blob[:2] == b"\xff\xfe":
        text = blob.decode("utf-16-le")
    elif blob[:2] == b"\xfe\xff":
        text = blob.decode("utf-16-be")
    else:
        text = blob.decode("utf-8-sig")
    return parse_textgrid(text.lstrip("﻿"))


def _fill_gaps(intervals: tuple[Interval, ...], duration: float) -> list[Interval]:
    out: list[Interval] = []
    cursor = 0.0
    for iv in intervals:
        if iv.start > cursor + 1e-9:
            out.append(Interval(cursor, iv.start, ""))
        out.append(iv)
        cursor = iv.end
    if cursor < duration - 1e-9:
        out.append(Interval(cursor, duration, ""))
    return out


def _quote(label: str) -> str:
    return '"' + label.replace('"', '""') + '"'


def serialize_textgrid(tiers: list[Tier], duration: float) -> str:
    """Render tiers as a long-format TextGrid string.

    Gaps are filled with empty intervals so every tier tiles
    [0, duration]; times are written with 6 decimal places.
    """
    for tier in tiers:
        for iv in tier.intervals:
            if iv.end > duration + 1e-9:
                raise TextGridParseError(
                    f"tier {tier.name!r}: interval end {iv.end} outside [0, {duration}]"
                )
    lines = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0.000000",
        f"xmax = {duration:.6f}",
        "tiers? <exists>",
        f"size = {len(tiers)}",
        "item []:",
    ]
    for t_index, tier in enumerate(tiers, 1):
        filled = _fill_gaps(tier.intervals, duration)
        lines += [
            f"    item [{t_index}]:",
            '        class = "IntervalTier"',
            f"        name = {_quote(tier.name)}",
            "        xmin = 0.000000",
            f"        xmax = {duration:.6f}",
            f"        intervals: size = {len(filled)}",
        ]
        for i_index, iv in enumerate(filled, 1):
            lines += [
                f"        intervals [{i_index}]:",
                f"            xmin = {iv.start:.6f}",
                f"            xmax = {iv.end:.6f}",
                f"            text = {_quote(iv.label)}",
            ]
    return "\n".join(lines) + "\n"


def save_textgrid(tiers: list[Tier], duration: float, path: str | Path) -> None:
    Path(path).write_text(serialize_textgrid(tiers, duration), encoding="utf-8")
