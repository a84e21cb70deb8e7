"""Deterministic metadata -> chart program compiler (the coder fallback and judge oracle)."""

from __future__ import annotations

import math
import re

from ..metadata import Alignment, ChartKind, MetadataDoc, StatSeries, Subchart
from .ir import DEFAULT_PALETTE, Arrangement, ChartIR, IRError, PanelSpec, Series
from .layout import required_canvas

__all__ = [
    "EmptySeries",
    "UnrenderableKind",
    "classify_placement",
    "compile_metadata",
    "heading_anchor",
    "infer_arrangement",
]

DEFAULT_PANEL_W = 640
DEFAULT_PANEL_H = 360


class UnrenderableKind(IRError):
    def __init__(self, index: int, raw: str):
        self.index = index
        self.raw = raw
        super().__init__(f"subchart {index}: chart kind {raw!r} cannot be rendered")


class EmptySeries(IRError):
    def __init__(self, index: int, detail: str = "no numeric statistics"):
        self.index = index
        super().__init__(f"subchart {index}: {detail}")


_VERTICAL = re.compile(r"\b(?:below|beneath|under|underneath|bottom|above|top|on top|vertically|stacked)\b", re.I)
_HORIZONTAL = re.compile(r"\b(?:right|left|beside|next to|side by side|side-by-side|adjacent|horizontally)\b", re.I)


def classify_placement(phrase: str) -> str | None:
    """'vertical', 'horizontal', 'mixed', or None for a phrase with no direction words.

    Compound corners such as "top-left" count as mixed.
    """
    v = bool(_VERTICAL.search(phrase or ""))
    h = bool(_HORIZONTAL.search(phrase or ""))
    if v and h:
        return "mixed"
    if v:
        return "vertical"
    if h:
        return "horizontal"
    return None


def infer_arrangement(doc: MetadataDoc) -> tuple[Arrangement, list[str]]:
    """Arrangement implied by the placement phrases, plus warnings.

    All directional phrases vertical gives a column, all horizontal a row;
    any disagreement downgrades to a grid with ceil(sqrt(n)) columns.  When no
    phrase carries a direction the subchart alignments are consulted, and
    failing that the column order is used with a warning.
    """
    n = len(doc.subcharts)
    if n <= 1:
        return Arrangement("column"), []
    directions = {d for d in (classify_placement(s.position_chart) for s in doc.subcharts) if d}
    if not directions:
        aligns = {s.alignment for s in doc.subcharts} - {Alignment.UNSPECIFIED}
        if aligns == {Alignment.VERTICAL}:
            directions = {"vertical"}
        elif aligns == {Alignment.HORIZONTAL}:
            directions = {"horizontal"}
    if directions == {"vertical"}:
        return Arrangement("column"), []
    if directions == {"horizontal"}:
        return Arrangement("row"), []
    if not directions:
        return Arrangement("column"), ["placement phrases carry no direction; using column order"]
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    return Arrangement("grid", rows, cols), []


def heading_anchor(phrase: str | None) -> str:
    s = (phrase or "").lower()
    if re.search(r"\b(?:above|top|over)\b", s):
        return "above"
    if re.search(r"\b(?:below|bottom|under|beneath)\b", s):
        return "below"
    if re.search(r"\bleft\b", s):
        return "left"
    if re.search(r"\bright\b", s):
        return "right"
    return "above"


def _series(stat: StatSeries) -> Series:
    units = {item.unit for item in stat.items}
    unit = "percent" if units == {"percent"} else ""
    return Series(stat.category, tuple(stat.labels), tuple(stat.values), unit)


def _panel_series(index: int, sub: Subchart, kind: ChartKind) -> tuple[Series, ...]:
    series = tuple(_series(s) for s in sub.stats.series if s.items)
    if not series:
        raise EmptySeries(index)
    if kind in (ChartKind.STACKED_BAR, ChartKind.GROUPED_BAR) and len(series) < 2:
        only = series[0]
        if len(only.values) < 2:
            raise EmptySeries(index, f"{kind.value} needs at least 2 values")
        series = tuple(Series(label, (only.name,), (v,), only.unit) for label, v in zip(only.labels, only.values))
    if kind in (ChartKind.LINE, ChartKind.AREA) and any(len(s.values) < 2 for s in series):
        if all(len(s.values) == 1 for s in series) and len(series) >= 2:
            unit = series[0].unit if len({s.unit for s in series}) == 1 else ""
            series = (Series("", tuple(s.name or s.labels[0] for s in series), tuple(s.values[0] for s in series), unit),)
        else:
            raise EmptySeries(index, f"{kind.value} needs at least 2 points per series")
    if kind in (ChartKind.PIE, ChartKind.STACKED_BAR) and any(v < 0 for s in series for v in s.values):
        raise EmptySeries(index, f"{kind.value} values must be non-negative")
    return series


def compile_metadata(doc: MetadataDoc) -> ChartIR:
    """One panel per subchart, in order, with series taken from the stats verbatim."""
    if not doc.subcharts:
        raise EmptySeries(0, "document has no subcharts")
    panels = []
    for i, sub in enumerate(doc.subcharts, start=1):
        kind = sub.kind
        if kind is ChartKind.UNKNOWN:
            raise UnrenderableKind(i, sub.kind_raw)
        dims = sub.dimensions
        box = None
        if dims.width_px and dims.height_px and dims.width_px > 0 and dims.height_px > 0:
            box = (dims.width_px, dims.height_px)
        panels.append(
            PanelSpec(
                kind=kind,
                series=_panel_series(i, sub, kind),
                heading=sub.text,
                heading_anchor=heading_anchor(sub.position_chart_text),
                x_label=sub.axis.x_label or "",
                y_label=sub.axis.y_label or "",
                palette=DEFAULT_PALETTE,
                show_value_labels=kind.is_bar or kind is ChartKind.HISTOGRAM,
                requested_box=box,
            )
        )
    arrangement, _ = infer_arrangement(doc)
    rows, cols = arrangement.shape(len(panels))
    widths = [p.requested_box[0] if p.requested_box else DEFAULT_PANEL_W for p in panels]
    heights = [p.requested_box[1] if p.requested_box else DEFAULT_PANEL_H for p in panels]
    width = cols * max(widths) + 48 + 16 * (cols - 1)
    height = sum(
        max(heights[r * cols : (r + 1) * cols]) for r in range(math.ceil(len(panels) / cols))
    ) + 48 + 16 * (rows - 1)
    ir = ChartIR(doc.title, doc.summary, (width, height), tuple(panels), arrangement)
    ir.validate()
    need = required_canvas(ir)
    return ChartIR(doc.title, doc.summary, (max(width, need[0]), max(height, need[1])), tuple(panels), arrangement)
