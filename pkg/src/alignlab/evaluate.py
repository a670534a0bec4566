"""Boundary evaluation against human annotation.

Hypothesis phone tiers may contain inserted silences; these are skipped
and the remaining label sequences must match the reference exactly
(seen-data alignment guarantees identical transcripts). Differences are
reported in milliseconds, positive when the hypothesis boundary falls
after the reference, aggregated by natural class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EvalError
from .lexicon import NaturalClassMap
from .textgrid import Tier

DEFAULT_SILENCE_LABELS = frozenset({"sil", "sp", "spn", "<sil>", ""})


@dataclass(frozen=True)
class BoundaryPair:
    utterance_id: str
    phone: str
    kind: str  # "onset" | "offset"
    reference: float
    hypothesis: float


@dataclass(frozen=True)
class ClassRow:
    mean_signed_ms: float
    mean_abs_ms: float
    count: int


@dataclass(frozen=True)
class EvalReport:
    model_label: str
    dataset_label: str
    classes: dict[str, ClassRow]
    overall_abs_ms: float
    overall_signed_ms: float
    count: int

    def class_order(self) -> list[str]:
        return list(self.classes)


def match_boundaries(
    ref_tier: Tier,
    hyp_tier: Tier,
    utterance_id: str = "",
    silence_labels: frozenset[str] = DEFAULT_SILENCE_LABELS,
) -> list[BoundaryPair]:
    """Pair up phone onsets plus the final offset.

    Hypothesis silence intervals are dropped before matching; a label
    mismatch after that is an error naming the first divergence.
    """
    ref = [iv for iv in ref_tier.intervals if iv.label]
    hyp = [iv for iv in hyp_tier.intervals if iv.label and iv.label not in silence_labels]
    labels_ref = [iv.label for iv in ref]
    labels_hyp = [iv.label for iv in hyp]
    if labels_ref != labels_hyp:
        position = next(
            (i for i, (a, b) in enumerate(zip(labels_ref, labels_hyp)) if a != b),
            min(len(labels_ref), len(labels_hyp)),
        )
        raise EvalError(
            f"utterance {utterance_id!r}: phone sequences diverge at position {position} "
            f"(ref {labels_ref[position:position+3]}, hyp {labels_hyp[position:position+3]})"
        )
    if not ref:
        return []
    pairs = [
        BoundaryPair(utterance_id, r.label, "onset", r.start, h.start)
        for r, h in zip(ref, hyp)
    ]
    pairs.append(
        BoundaryPair(utterance_id, ref[-1].label, "offset", ref[-1].end, hyp[-1].end)
    )
    return pairs


def signed_diff(pair: BoundaryPair) -> float:
    """(hypothesis - reference) in milliseconds; positive = late."""
    return (pair.hypothesis - pair.reference) * 1000.0


def aggregate(
    pairs: list[BoundaryPair],
    class_map: NaturalClassMap,
    model_label: str = "",
    dataset_label: str = "",
    attribute_to: str = "onset",
) -> EvalReport:
    """Per-natural-class mean signed/absolute differences.

    A boundary is attributed to the phone starting at it (or, with
    ``attribute_to='offset'``, ending at it); phones missing from the
    class map fall into "other".
    """
    if not pairs:
        raise EvalError("cannot aggregate zero boundary pairs")
    if attribute_to not in ("onset", "offset"):
        raise EvalError(f"unknown attribution convention {attribute_to!r}")
    known = set(class_map.class_order)
    sums: dict[str, list[float]] = {}
    for index, pair in enumerate(pairs):
        phone = pair.phone
        if attribute_to == "offset" and pair.kind == "onset" and index > 0:
            prev = pairs[index - 1]
            # The phone ending at this boundary, when it exists in the
            # same utterance; utterance-initial onsets keep their own.
            if prev.utterance_id == pair.utterance_id and prev.kind == "onset":
                phone = prev.phone
        label = class_map.label_of(phone)
        if label not in known:
            label = "other"
        diff = signed_diff(pair)
        entry = sums.setdefault(label, [0.0, 0.0, 0])
        entry[0] += diff
        entry[1] += abs(diff)
        entry[2] += 1

    classes = {}
    for label in class_map.class_order:
        if label in sums:
            signed, absolute, count = sums[label]
            classes[label] = ClassRow(signed / count, absolute / count, count)
    total = sum(row.count for row in classes.values())
    overall_abs = sum(row.mean_abs_ms * row.count for row in classes.values()) / total
    overall_signed = sum(
        row.mean_signed_ms * row.count for row in classes.values()
    ) / total
    return EvalReport(model_label, dataset_label, classes, overall_abs, overall_signed, total)


def compare_models(reports: list[EvalReport]) -> list[EvalReport]:
    """Ascending by overall mean absolute difference, ties by label."""
    if not reports:
        raise EvalError("no reports to compare")
    return sorted(reports, key=lambda r: (r.overall_abs_ms, r.model_label))


def _format_cell(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def _table_csv(reports: list[EvalReport], classes: list[str], signed: bool) -> str:
    lines = ["model," + ",".join(classes) + ",overall"]
    for report in reports:
        cells = []
        for cls in classes:
            row = report.classes.get(cls)
            if row is None:
                cells.append(_format_cell(None))
            else:
                cells.append(_format_cell(row.mean_signed_ms if signed else row.mean_abs_ms))
        overall = report.overall_signed_ms if signed else report.overall_abs_ms
        lines.append(f"{report.model_label}," + ",".join(cells) + f",{overall:.2f}")
    return "\n".join(lines) + "\n"


def _diverging_color(value: float, limit: float) -> str:
    """Blue for early (negative), red for late (positive)."""
    if limit <= 0:
        limit = 1.0
    frac = max(-1.0, min(1.0, value / limit))
    if frac >= 0:
        r, g, b = 255, round(255 * (1 - frac)), round(255 * (1 - frac))
    else:
        r, g, b = round(255 * (1 + frac)), round(255 * (1 + frac)), 255
    return f"rgb({r},{g},{b})"


def _sequential_color(value: float, limit: float) -> str:
    if limit <= 0:
        limit = 1.0
    frac = max(0.0, min(1.0, value / limit))
    r = 255
    g = round(255 * (1 - 0.75 * frac))
    b = round(255 * (1 - frac))
    return f"rgb({r},{g},{b})"


_CELL_W, _CELL_H, _LEFT, _TOP, _GAP = 64, 26, 170, 46, 44


def _svg_panel(
    out: list[str],
    reports: list[EvalReport],
    classes: list[str],
    signed: bool,
    y0: int,
    title: str,
) -> int:
    columns = classes + ["overall"]
    values = []
    for report in reports:
        row = []
        for cls in classes:
            cell = report.classes.get(cls)
            row.append(
                None
                if cell is None
                else (cell.mean_signed_ms if signed else cell.mean_abs_ms)
            )
        row.append(report.overall_signed_ms if signed else report.overall_abs_ms)
        values.append(row)
    flat = [v for row in values for v in row if v is not None]
    limit = max((abs(v) for v in flat), default=1.0)
    out.append(
        f'<text x="{_LEFT}" y="{y0 - 26}" font-size="14" font-weight="bold">{title}</text>'
    )
    for c, name in enumerate(columns):
        out.append(
            f'<text x="{_LEFT + c*_CELL_W + _CELL_W//2}" y="{y0 - 8}" font-size="10" '
            f'text-anchor="middle">{name}</text>'
        )
    for r, report in enumerate(reports):
        y = y0 + r * _CELL_H
        out.append(
            f'<text x="{_LEFT - 6}" y="{y + _CELL_H - 9}" font-size="10" '
            f'text-anchor="end">{report.model_label}</text>'
        )
        for c, value in enumerate(values[r]):
            x = _LEFT + c * _CELL_W
            if value is None:
                fill = "rgb(238,238,238)"
                text = ""
            else:
                fill = (
                    _diverging_color(value, limit)
                    if signed
                    else _sequential_color(value, limit)
                )
                text = f"{value:.2f}"
            out.append(
                f'<rect x="{x}" y="{y}" width="{_CELL_W}" height="{_CELL_H}" '
                f'fill="{fill}" stroke="rgb(180,180,180)"/>'
            )
            out.append(
                f'<text x="{x + _CELL_W//2}" y="{y + _CELL_H - 9}" font-size="10" '
                f'text-anchor="middle">{text}</text>'
            )
    return y0 + len(reports) * _CELL_H + _GAP


def emit_heatmap(reports: list[EvalReport], path_base: str | Path) -> list[Path]:
    """Write signed/absolute CSV tables and a two-panel SVG heatmap.

    Output is byte-deterministic for identical inputs. Returns the
    written paths.
    """
    if not reports:
        raise EvalError("no reports to render")
    classes = list(reports[0].class_order())
    for report in reports[1:]:
        for cls in report.class_order():
            if cls not in classes:
                classes.append(cls)

    base = Path(path_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    signed_path = base.with_name(base.name + "_signed.csv")
    abs_path = base.with_name(base.name + "_absolute.csv")
    svg_path = base.with_name(base.name + ".svg")
    signed_path.write_text(_table_csv(reports, classes, signed=True), encoding="utf-8")
    abs_path.write_text(_table_csv(reports, classes, signed=False), encoding="utf-8")

    width = _LEFT + (len(classes) + 1) * _CELL_W + 30
    body: list[str] = []
    y = _TOP + 30
    y = _svg_panel(body, reports, classes, True, y, "Mean signed difference (ms)")
    y = _svg_panel(body, reports, classes, False, y + 30, "Mean absolute difference (ms)")
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{y}" '
        f'font-family="sans-serif">\n' + "\n".join(body) + "\n</svg>\n"
    )
    svg_path.write_text(svg, encoding="utf-8")
    return [signed_path, abs_path, svg_path]
