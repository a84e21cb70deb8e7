"""Deterministic layout: every text line, bar, point and axis gets an absolute box.

Text is measured with a fixed width factor (``CHAR_WIDTH`` x font size per
character, ``LINE_HEIGHT`` x font size tall) so results do not depend on the
fonts installed.  The SVG renderer and the overlap detector both consume the
boxes computed here.
"""

from __future__ import annotations

import math
import textwrap
from dataclasses import dataclass, field

from ..metadata import ChartKind
from .ir import ChartIR, IRError, PanelSpec, resolve_palette

__all__ = [
    "Box",
    "Element",
    "InfeasibleLayout",
    "LayoutedFigure",
    "PanelLayout",
    "format_value",
    "layout",
    "required_canvas",
    "text_box",
    "text_width",
]

MARGIN = 24.0
CHAR_WIDTH = 0.6
LINE_HEIGHT = 1.2
BASELINE = 0.9
TITLE_SIZE = 20.0
SUMMARY_SIZE = 12.0
HEADING_SIZE = 14.0
TICK_SIZE = 10.0
AXIS_TITLE_SIZE = 11.0
VALUE_SIZE = 10.0
LEGEND_SIZE = 10.0
MIN_SPACING = 16.0
SPACING_FRACTION = 0.04
GROWTH_CAP = 4.0
TEXT_COLOR = "#1F2A44"
AXIS_COLOR = "#1F2A44"


class InfeasibleLayout(ValueError):
    pass


def r2(v: float) -> float:
    return round(v + 0.0, 2)


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    def overlap(self, other: Box) -> tuple[float, float]:
        return (
            min(self.right, other.right) - max(self.x, other.x),
            min(self.bottom, other.bottom) - max(self.y, other.y),
        )

    def intersects(self, other: Box, eps: float = 0.5) -> bool:
        dx, dy = self.overlap(other)
        return dx > eps and dy > eps

    def contains(self, other: Box, eps: float = 0.5) -> bool:
        return (
            other.x >= self.x - eps
            and other.y >= self.y - eps
            and other.right <= self.right + eps
            and other.bottom <= self.bottom + eps
        )

    def to_list(self) -> list[float]:
        return [r2(self.x), r2(self.y), r2(self.w), r2(self.h)]


def text_width(text: str, size: float) -> float:
    return CHAR_WIDTH * size * len(text)


def text_box(x: float, y: float, size: float, anchor: str, text: str) -> Box:
    """Box of a single text line whose anchor point is ``(x, baseline y)``."""
    w = text_width(text, size)
    left = x if anchor == "start" else x - w / 2 if anchor == "middle" else x - w
    return Box(left, y - BASELINE * size, w, LINE_HEIGHT * size)


def wrap(text: str, width: float, size: float, max_lines: int | None = None) -> list[str]:
    chars = max(1, int(width // (CHAR_WIDTH * size)))
    lines = textwrap.wrap(text or "", chars, break_long_words=True, break_on_hyphens=False)
    if max_lines is not None and len(lines) > max_lines:
        lines = lines[:max_lines]
        last = lines[-1][: max(chars - 1, 0)].rstrip()
        lines[-1] = last + "…"
    return lines


def truncate(text: str, width: float, size: float) -> str:
    chars = int(width // (CHAR_WIDTH * size))
    if len(text) <= chars:
        return text
    if chars <= 1:
        return ""
    return text[: chars - 1].rstrip() + "…"


def format_value(value: float, unit: str = "") -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        text = str(int(value))
    else:
        text = repr(float(value))
    return text + ("%" if unit == "percent" else "")


def _tick_text(t: float) -> str:
    text = f"{t:.6g}"
    return "0" if text in ("-0", "0") else text


def nice_ticks(lo: float, hi: float, count: int) -> list[float]:
    if hi <= lo or count < 2:
        return [lo]
    raw = (hi - lo) / (count - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


@dataclass(frozen=True)
class Element:
    id: str
    kind: str
    role: str
    box: Box
    panel: int | None = None
    text: str = ""
    size: float = 0.0
    anchor: str = "start"
    x: float = 0.0
    y: float = 0.0
    fill: str = ""
    owner: str = ""
    points: tuple[tuple[float, float], ...] = ()
    d: str = ""
    is_mark: bool = False
    value: float | None = None


@dataclass
class PanelLayout:
    index: int
    cell: Box
    heading: Box | None
    plot: Box
    legend: Box | None
    elements: list[Element] = field(default_factory=list)


@dataclass
class LayoutedFigure:
    canvas: Box
    header: Box | None
    header_elements: list[Element]
    panels: list[PanelLayout]
    spacing: float
    rows: int
    cols: int
    warnings: list[str] = field(default_factory=list)

    @property
    def normalized_vertical_spacing(self) -> float:
        return self.spacing / self.canvas.h

    def spacing_bound_ok(self) -> bool:
        if self.rows < 2:
            return True
        return self.normalized_vertical_spacing < 1.0 / (self.rows - 1)

    def elements(self) -> list[Element]:
        out = list(self.header_elements)
        for p in self.panels:
            out.extend(p.elements)
        return out

    def geometry_summary(self) -> dict:
        return {
            "canvas": self.canvas.to_list(),
            "rows": self.rows,
            "cols": self.cols,
            "spacing": r2(self.spacing),
            "normalized_vertical_spacing": round(self.normalized_vertical_spacing, 6),
            "panels": [
                {
                    "index": p.index,
                    "cell": p.cell.to_list(),
                    "heading": p.heading.to_list() if p.heading else None,
                    "plot": p.plot.to_list(),
                    "legend": p.legend.to_list() if p.legend else None,
                }
                for p in self.panels
            ],
        }


# --------------------------------------------------------------------------
# element builders


class _Sink:
    def __init__(self, prefix: str, panel: int | None):
        self.prefix = prefix
        self.panel = panel
        self.items: list[Element] = []
        self._n = 0

    def _id(self, role: str) -> str:
        self._n += 1
        return f"{self.prefix}-{role}-{self._n}"

    def text(self, text: str, x: float, top: float, size: float, anchor: str, role: str, fill: str = TEXT_COLOR,
             owner: str = "", value: float | None = None) -> Element:
        x, y = r2(x), r2(top + BASELINE * size)
        el = Element(self._id(role), "text", role, text_box(x, y, size, anchor, text), self.panel, text, size,
                     anchor, x, y, fill, owner, value=value)
        self.items.append(el)
        return el

    def lines(self, lines: list[str], left: float, top: float, width: float, size: float, anchor: str, role: str) -> None:
        x = left if anchor == "start" else left + width / 2 if anchor == "middle" else left + width
        for i, line in enumerate(lines):
            self.text(line, x, top + i * LINE_HEIGHT * size, size, anchor, role)

    def rect(self, x: float, y: float, w: float, h: float, role: str, fill: str, mark: bool = True,
             value: float | None = None) -> Element:
        box = Box(r2(x), r2(y), r2(max(w, 0.0)), r2(max(h, 0.0)))
        el = Element(self._id(role), "rect", role, box, self.panel, fill=fill, is_mark=mark, value=value)
        self.items.append(el)
        return el

    def line(self, x1: float, y1: float, x2: float, y2: float, role: str) -> Element:
        pts = ((r2(x1), r2(y1)), (r2(x2), r2(y2)))
        box = Box(min(pts[0][0], pts[1][0]), min(pts[0][1], pts[1][1]), abs(pts[1][0] - pts[0][0]), abs(pts[1][1] - pts[0][1]))
        el = Element(self._id(role), "line", role, box, self.panel, points=pts, fill=AXIS_COLOR)
        self.items.append(el)
        return el

    def circle(self, cx: float, cy: float, r: float, role: str, fill: str, mark: bool = True) -> Element:
        cx, cy, r = r2(cx), r2(cy), r2(r)
        el = Element(self._id(role), "circle", role, Box(cx - r, cy - r, 2 * r, 2 * r), self.panel,
                     x=cx, y=cy, size=r, fill=fill, is_mark=mark)
        self.items.append(el)
        return el

    def path(self, d: str, box: Box, role: str, fill: str) -> Element:
        el = Element(self._id(role), "path", role, box, self.panel, d=d, fill=fill)
        self.items.append(el)
        return el

    def polyline(self, points: list[tuple[float, float]], role: str, color: str) -> Element:
        pts = tuple((r2(x), r2(y)) for x, y in points)
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        el = Element(self._id(role), "polyline", role, Box(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)),
                     self.panel, points=pts, fill=color)
        self.items.append(el)
        return el


# --------------------------------------------------------------------------
# panel content model


@dataclass(frozen=True)
class _Bar:
    value: float
    text: str
    color: int


@dataclass(frozen=True)
class _Band:
    label: str
    bars: tuple[_Bar, ...]


def _bands(panel: PanelSpec) -> tuple[list[_Band], list[str], bool]:
    """Category bands, legend labels and whether bars in a band stack."""
    stacked = panel.kind is ChartKind.STACKED_BAR
    series = panel.series
    if panel.kind is ChartKind.HISTOGRAM or (len(series) == 1 and not stacked):
        bands = []
        i = 0
        for s in series:
            for label, value in zip(s.labels, s.values):
                bands.append(_Band(label, (_Bar(value, format_value(value, s.unit), i),)))
                i += 1
        return bands, [], False
    legend: list[str] = []
    for s in series:
        for label in s.labels:
            if label not in legend:
                legend.append(label)
    bands = []
    for s in series:
        bars = tuple(
            _Bar(v, format_value(v, s.unit), legend.index(label)) for label, v in zip(s.labels, s.values)
        )
        bands.append(_Band(s.name, bars))
    if all(not label for label in legend):
        legend = []
    return bands, legend, stacked


def _legend_entries(panel: PanelSpec) -> list[str]:
    if panel.kind is ChartKind.PIE:
        return [text for text, _ in _pie_slices(panel)]
    if panel.kind in (ChartKind.LINE, ChartKind.AREA):
        return [s.name for s in panel.series] if len(panel.series) > 1 else []
    return _bands(panel)[1]


def _pie_slices(panel: PanelSpec) -> list[tuple[str, float]]:
    named = len(panel.series) > 1
    out = []
    for s in panel.series:
        for label, value in zip(s.labels, s.values):
            text = f"{s.name}: {label}" if named and s.name else label
            out.append((f"{text} ({format_value(value, s.unit)})".strip(), value))
    return out


LEGEND_ROW = 16.0
SWATCH = 10.0


def _legend_rows(entries: list[str], width: float) -> list[list[tuple[str, float]]]:
    rows: list[list[tuple[str, float]]] = []
    cur: list[tuple[str, float]] = []
    used = 0.0
    for entry in entries:
        text = truncate(entry, max(width - SWATCH - 4, 0), LEGEND_SIZE)
        w = SWATCH + 4 + text_width(text, LEGEND_SIZE)
        gap = 12.0 if cur else 0.0
        if cur and used + gap + w > width:
            rows.append(cur)
            cur, used, gap = [], 0.0, 0.0
        cur.append((text, w))
        used += gap + w
    if cur:
        rows.append(cur)
    return rows


def _legend_height(entries: list[str], width: float) -> float:
    if not entries:
        return 0.0
    return len(_legend_rows(entries, width)) * LEGEND_ROW + 6


def _draw_legend(sink: _Sink, entries: list[str], box: Box, palette: tuple[str, ...]) -> None:
    top = box.y + 6
    n = 0
    for row in _legend_rows(entries, box.w):
        x = box.x
        for text, w in row:
            color = palette[n % len(palette)]
            sink.rect(x, top + (LEGEND_ROW - SWATCH) / 2 - 2, SWATCH, SWATCH, "swatch", color)
            text_top = top + (LEGEND_ROW - LINE_HEIGHT * LEGEND_SIZE) / 2 - 2
            if text:
                sink.text(text, x + SWATCH + 4, text_top, LEGEND_SIZE, "start", "legend")
            x += w + 12
            n += 1
        top += LEGEND_ROW


LH_TICK = LINE_HEIGHT * TICK_SIZE
LH_VALUE = LINE_HEIGHT * VALUE_SIZE
LH_AXIS = LINE_HEIGHT * AXIS_TITLE_SIZE


def _title_rows(panel: PanelSpec) -> tuple[float, float]:
    top = LH_AXIS + 4 if panel.y_label else 0.0
    bottom = LH_AXIS + 4 if panel.x_label else 0.0
    return top, bottom


def _value_extent(panel: PanelSpec, bands: list[_Band], stacked: bool) -> tuple[float, float]:
    if stacked:
        totals = [sum(b.value for b in band.bars) for band in bands]
        lo, hi = 0.0, max(totals + [0.0])
    else:
        values = [b.value for band in bands for b in band.bars]
        lo, hi = min(values + [0.0]), max(values + [0.0])
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def _max_label_width(bands: list[_Band]) -> float:
    return max((text_width(b.text, VALUE_SIZE) for band in bands for b in band.bars), default=0.0)


def _ytick_width(lo: float, hi: float) -> float:
    ticks = nice_ticks(lo, hi, 5)
    return max(text_width(_tick_text(t), TICK_SIZE) for t in ticks) + 8


# ---- vertical bars ---------------------------------------------------------


def _vbar_geometry(panel: PanelSpec, width: float):
    bands, legend, stacked = _bands(panel)
    lo, hi = _value_extent(panel, bands, stacked)
    ytick_w = _ytick_width(lo, hi)
    aw = width - ytick_w - 4
    slot = aw / len(bands) if bands else aw
    label_lines = [wrap(b.label, max(slot - 4, 1), TICK_SIZE, max_lines=4) for b in bands]
    xtick_h = max((len(ls) for ls in label_lines), default=0) * LH_TICK + 10
    return bands, legend, stacked, lo, hi, ytick_w, aw, slot, label_lines, xtick_h


def _vbar_pads(panel: PanelSpec, bands: list[_Band], stacked: bool, lo: float) -> tuple[float, float]:
    if not panel.show_value_labels:
        return 8.0, 0.0
    k = max(len(b.bars) for b in bands)
    top = (k * (LH_VALUE + 2) + 4) if stacked else LH_VALUE + 6
    bottom = LH_VALUE + 6 if lo < 0 else 0.0
    return max(top, 8.0), bottom


def _vbar_min_width(panel: PanelSpec) -> float:
    bands, _, stacked = _bands(panel)
    lo, hi = _value_extent(panel, bands, stacked)
    per_bar = (_max_label_width(bands) + 4) if panel.show_value_labels else 6.0
    nbars = sum(1 if stacked else len(b.bars) for b in bands)
    return _ytick_width(lo, hi) + 4 + max(per_bar, 6.0) * nbars / 0.8


def _vbar_min_height(panel: PanelSpec, width: float) -> float:
    bands, _, stacked, lo, _, _, _, _, _, xtick_h = _vbar_geometry(panel, width)
    top, bottom = _title_rows(panel)
    pad_top, pad_bottom = _vbar_pads(panel, bands, stacked, lo)
    return top + bottom + xtick_h + pad_top + pad_bottom + 60


def _draw_vbars(sink: _Sink, panel: PanelSpec, region: Box, palette: tuple[str, ...]) -> None:
    bands, _, stacked, lo, hi, ytick_w, aw, slot, label_lines, xtick_h = _vbar_geometry(panel, region.w)
    title_top, title_bottom = _title_rows(panel)
    ax, ay = region.x + ytick_w, region.y + title_top
    ah = region.h - title_top - title_bottom - xtick_h
    pad_top, pad_bottom = _vbar_pads(panel, bands, stacked, lo)
    scale = (ah - pad_top - pad_bottom) / (hi - lo)
    y0 = ay + pad_top + hi * scale
    if panel.y_label:
        sink.text(truncate(panel.y_label, region.w, AXIS_TITLE_SIZE), region.x, region.y, AXIS_TITLE_SIZE, "start", "axis-title")
    if panel.x_label:
        sink.text(truncate(panel.x_label, aw, AXIS_TITLE_SIZE), ax + aw / 2, region.bottom - LH_AXIS - 2,
                  AXIS_TITLE_SIZE, "middle", "axis-title")

    for bi, band in enumerate(bands):
        sx = ax + bi * slot
        group_x = sx + slot * 0.1
        group_w = slot * 0.8
        n = 1 if stacked else len(band.bars)
        bw = group_w / n
        outside_above = 0
        base = 0.0
        for k, bar in enumerate(band.bars):
            color = palette[bar.color % len(palette)]
            if stacked:
                x = group_x
                top_v, bot_v = base + bar.value, base
                base += bar.value
            else:
                x = group_x + k * bw
                top_v, bot_v = max(bar.value, 0.0), min(bar.value, 0.0)
            y_top, y_bot = y0 - top_v * scale, y0 - bot_v * scale
            rect = sink.rect(x, y_top, bw, y_bot - y_top, "bar", color, value=bar.value)
            if not panel.show_value_labels:
                continue
            lw = text_width(bar.text, VALUE_SIZE)
            cx = x + bw / 2
            if bw >= lw + 4 and (y_bot - y_top) >= LH_VALUE + 4:
                top = y_top + 2 if bar.value >= 0 else y_bot - 2 - LH_VALUE
                sink.text(bar.text, cx, top, VALUE_SIZE, "middle", "value-label", "#FFFFFF", owner=rect.id, value=bar.value)
            elif stacked:
                col_top = y0 - sum(b.value for b in band.bars) * scale
                outside_above += 1
                top = col_top - 2 - outside_above * (LH_VALUE + 2) + 2
                sink.text(bar.text, cx, top, VALUE_SIZE, "middle", "value-label", value=bar.value)
            elif bar.value >= 0:
                sink.text(bar.text, cx, y_top - 2 - LH_VALUE, VALUE_SIZE, "middle", "value-label", value=bar.value)
            else:
                sink.text(bar.text, cx, y_bot + 2, VALUE_SIZE, "middle", "value-label", value=bar.value)
        lines = label_lines[bi]
        sink.lines(lines, sx + 2, ay + ah + 8, slot - 4, TICK_SIZE, "middle", "category-label")

    _y_ticks(sink, lo, hi, ax, y0, scale, ay, ay + ah - pad_bottom)
    sink.line(ax, y0, ax + aw, y0, "x-axis")
    sink.line(ax, ay, ax, ay + ah, "y-axis")


def _y_ticks(sink: _Sink, lo: float, hi: float, ax: float, y0: float, scale: float, top: float, bottom: float) -> None:
    for count in (6, 5, 4, 3, 2):
        ticks = [t for t in nice_ticks(lo, hi, count) if lo - 1e-9 <= t <= hi + 1e-9]
        ys = [y0 - t * scale for t in ticks]
        if all(abs(a - b) >= LH_TICK + 2 for a, b in zip(ys, ys[1:])):
            break
    else:
        ticks, ys = [0.0], [y0]
    for t, y in zip(ticks, ys):
        if y < top - 1 or y > bottom + 1:
            continue
        sink.line(ax - 3, y, ax, y, "tick")
        sink.text(_tick_text(t), ax - 5, y - LH_TICK / 2, TICK_SIZE, "end", "tick-label")


def _x_ticks(sink: _Sink, lo: float, hi: float, x0: float, scale: float, y: float, left: float, right: float) -> None:
    chosen: list[tuple[float, float, str]] = []
    for count in (6, 5, 4, 3, 2):
        ticks = [t for t in nice_ticks(lo, hi, count) if lo - 1e-9 <= t <= hi + 1e-9]
        placed = [(t, x0 + t * scale, _tick_text(t)) for t in ticks]
        placed = [p for p in placed if p[1] - text_width(p[2], TICK_SIZE) / 2 >= left and p[1] + text_width(p[2], TICK_SIZE) / 2 <= right]
        ok = all(
            (b[1] - text_width(b[2], TICK_SIZE) / 2) - (a[1] + text_width(a[2], TICK_SIZE) / 2) >= 4
            for a, b in zip(placed, placed[1:])
        )
        if ok and placed:
            chosen = placed
            break
    for _, x, text in chosen:
        sink.line(x, y, x, y + 3, "tick")
        sink.text(text, x, y + 4, TICK_SIZE, "middle", "tick-label")


# ---- horizontal bars -------------------------------------------------------

BAND_GAP = 8.0
MIN_PITCH = LH_VALUE + 4


def _hbar_label_col(bands: list[_Band], width: float) -> float:
    desired = max((text_width(b.label, TICK_SIZE) for b in bands), default=0.0) + 8
    return min(desired, 0.35 * width)


def _hbar_band_need(band: _Band, stacked: bool, label_col: float) -> float:
    k = 1 if stacked else len(band.bars)
    lines = wrap(band.label, max(label_col - 8, 1), TICK_SIZE, max_lines=3)
    return max(k * MIN_PITCH + BAND_GAP, len(lines) * LH_TICK + BAND_GAP)


def _hbar_headroom(panel: PanelSpec, bands: list[_Band], stacked: bool, lo: float) -> tuple[float, float]:
    if not panel.show_value_labels:
        return 0.0, 4.0
    if stacked:
        right = max(sum(text_width(b.text, VALUE_SIZE) + 4 for b in band.bars) for band in bands) + 4
    else:
        right = _max_label_width(bands) + 8
    left = _max_label_width(bands) + 8 if lo < 0 else 0.0
    return left, right


def _hbar_min_width(panel: PanelSpec) -> float:
    bands, _, stacked = _bands(panel)
    lo, _ = _value_extent(panel, bands, stacked)
    left, right = _hbar_headroom(panel, bands, stacked, lo)
    label_col = min(max((text_width(b.label, TICK_SIZE) for b in bands), default=0.0) + 8, 60.0)
    return label_col + left + right + 60


def _hbar_min_height(panel: PanelSpec, width: float) -> float:
    bands, _, stacked = _bands(panel)
    label_col = _hbar_label_col(bands, width)
    top, bottom = _title_rows(panel)
    return top + bottom + LH_TICK + 8 + sum(_hbar_band_need(b, stacked, label_col) for b in bands)


def _draw_hbars(sink: _Sink, panel: PanelSpec, region: Box, palette: tuple[str, ...]) -> None:
    bands, _, stacked = _bands(panel)
    lo, hi = _value_extent(panel, bands, stacked)
    label_col = _hbar_label_col(bands, region.w)
    title_top, title_bottom = _title_rows(panel)
    ax, ay = region.x + label_col, region.y + title_top
    aw = region.w - label_col - 4
    ah = region.h - title_top - title_bottom - LH_TICK - 8
    left, right = _hbar_headroom(panel, bands, stacked, lo)
    scale = (aw - left - right) / (hi - lo)
    x0 = ax + left - lo * scale
    if panel.y_label:
        sink.text(truncate(panel.y_label, region.w, AXIS_TITLE_SIZE), region.x, region.y, AXIS_TITLE_SIZE, "start", "axis-title")
    if panel.x_label:
        sink.text(truncate(panel.x_label, aw, AXIS_TITLE_SIZE), ax + aw / 2, region.bottom - LH_AXIS - 2,
                  AXIS_TITLE_SIZE, "middle", "axis-title")

    needs = [_hbar_band_need(b, stacked, label_col) for b in bands]
    stretch = ah / sum(needs)
    top = ay
    for band, need in zip(bands, needs):
        band_h = need * stretch
        k = 1 if stacked else len(band.bars)
        pitch = (band_h - BAND_GAP) / k
        thick = min(pitch - 2, 28.0)
        base = 0.0
        outside_x = None
        for j, bar in enumerate(band.bars):
            color = palette[bar.color % len(palette)]
            row = 0 if stacked else j
            y = top + BAND_GAP / 2 + row * pitch + (pitch - thick) / 2
            if stacked:
                start_v, end_v = base, base + bar.value
                base += bar.value
            else:
                start_v, end_v = min(bar.value, 0.0), max(bar.value, 0.0)
            xa, xb = x0 + start_v * scale, x0 + end_v * scale
            rect = sink.rect(xa, y, xb - xa, thick, "bar", color, value=bar.value)
            if not panel.show_value_labels:
                continue
            lw = text_width(bar.text, VALUE_SIZE)
            text_top = y + (thick - LH_VALUE) / 2
            if (xb - xa) >= lw + 6 and thick >= LH_VALUE + 2:
                if bar.value >= 0:
                    sink.text(bar.text, xb - 3, text_top, VALUE_SIZE, "end", "value-label", "#FFFFFF", owner=rect.id, value=bar.value)
                else:
                    sink.text(bar.text, xa + 3, text_top, VALUE_SIZE, "start", "value-label", "#FFFFFF", owner=rect.id, value=bar.value)
            elif stacked:
                if outside_x is None:
                    outside_x = x0 + sum(b.value for b in band.bars) * scale + 4
                sink.text(bar.text, outside_x, text_top, VALUE_SIZE, "start", "value-label", value=bar.value)
                outside_x += lw + 4
            elif bar.value >= 0:
                sink.text(bar.text, xb + 3, text_top, VALUE_SIZE, "start", "value-label", value=bar.value)
            else:
                sink.text(bar.text, xa - 3, text_top, VALUE_SIZE, "end", "value-label", value=bar.value)
        lines = wrap(band.label, max(label_col - 8, 1), TICK_SIZE, max_lines=3)
        label_top = top + (band_h - len(lines) * LH_TICK) / 2
        sink.lines(lines, region.x, label_top, label_col - 6, TICK_SIZE, "end", "category-label")
        top += band_h

    bottom = ay + ah
    _x_ticks(sink, lo, hi, x0, scale, bottom, region.x + label_col - 4, region.right)
    sink.line(ax, bottom, ax + aw, bottom, "x-axis")
    sink.line(x0, ay, x0, bottom, "y-axis")


# ---- line / area -----------------------------------------------------------


def _categories(panel: PanelSpec) -> list[str]:
    cats: list[str] = []
    for s in panel.series:
        for i, label in enumerate(s.labels):
            key = label if label else f"#{i + 1}"
            if key not in cats:
                cats.append(key)
    return cats


def _line_geometry(panel: PanelSpec, width: float):
    cats = _categories(panel)
    values = panel.values()
    lo, hi = min(values + [0.0]), max(values + [0.0])
    if hi == lo:
        hi = lo + 1.0
    ytick_w = _ytick_width(lo, hi)
    aw = width - ytick_w - 4
    slot = aw / len(cats)
    label_lines = [wrap("" if c.startswith("#") else c, max(slot - 4, 1), TICK_SIZE, max_lines=3) for c in cats]
    xtick_h = max((len(ls) for ls in label_lines), default=0) * LH_TICK + 10
    return cats, lo, hi, ytick_w, aw, slot, label_lines, xtick_h


def _line_pads(panel: PanelSpec, lo: float) -> tuple[float, float]:
    if not panel.show_value_labels:
        return 8.0, 4.0
    return LH_VALUE + 10, (LH_VALUE + 10) if lo < 0 else 4.0


def _line_min_width(panel: PanelSpec) -> float:
    cats = _categories(panel)
    values = panel.values()
    lo, hi = min(values + [0.0]), max(values + [0.0])
    per = 14.0
    if panel.show_value_labels:
        per = max(per, max(text_width(format_value(v, s.unit), VALUE_SIZE) for s in panel.series for v in s.values) + 4)
    return _ytick_width(lo, hi if hi > lo else lo + 1) + 4 + per * len(cats)


def _line_min_height(panel: PanelSpec, width: float) -> float:
    _, lo, _, _, _, _, _, xtick_h = _line_geometry(panel, width)
    top, bottom = _title_rows(panel)
    pt, pb = _line_pads(panel, lo)
    return top + bottom + xtick_h + pt + pb + 60


def _draw_lines(sink: _Sink, panel: PanelSpec, region: Box, palette: tuple[str, ...]) -> None:
    cats, lo, hi, ytick_w, aw, slot, label_lines, xtick_h = _line_geometry(panel, region.w)
    title_top, title_bottom = _title_rows(panel)
    ax, ay = region.x + ytick_w, region.y + title_top
    ah = region.h - title_top - title_bottom - xtick_h
    pad_top, pad_bottom = _line_pads(panel, lo)
    scale = (ah - pad_top - pad_bottom) / (hi - lo)
    y0 = ay + pad_top + hi * scale
    if panel.y_label:
        sink.text(truncate(panel.y_label, region.w, AXIS_TITLE_SIZE), region.x, region.y, AXIS_TITLE_SIZE, "start", "axis-title")
    if panel.x_label:
        sink.text(truncate(panel.x_label, aw, AXIS_TITLE_SIZE), ax + aw / 2, region.bottom - LH_AXIS - 2,
                  AXIS_TITLE_SIZE, "middle", "axis-title")
    for si, s in enumerate(panel.series):
        color = palette[si % len(palette)]
        pts = []
        for i, (label, v) in enumerate(zip(s.labels, s.values)):
            key = label if label else f"#{i + 1}"
            pts.append((ax + (cats.index(key) + 0.5) * slot, y0 - v * scale, v))
        if panel.kind is ChartKind.AREA:
            d = f"M {r2(pts[0][0])} {r2(y0)} " + " ".join(f"L {r2(x)} {r2(y)}" for x, y, _ in pts) + f" L {r2(pts[-1][0])} {r2(y0)} Z"
            xs = [p[0] for p in pts]
            sink.path(d, Box(min(xs), min(p[1] for p in pts), max(xs) - min(xs), 0), "area", color)
        sink.polyline([(x, y) for x, y, _ in pts], "series-line", color)
        for x, y, v in pts:
            point = sink.circle(x, y, 3, "point", color)
            if panel.show_value_labels:
                text = format_value(v, s.unit)
                top = y - 5 - LH_VALUE if v >= 0 else y + 5
                sink.text(text, x, top, VALUE_SIZE, "middle", "value-label", value=v)
            del point
    for ci, lines in enumerate(label_lines):
        sink.lines(lines, ax + ci * slot + 2, ay + ah + 8, slot - 4, TICK_SIZE, "middle", "category-label")
    _y_ticks(sink, lo, hi, ax, y0, scale, ay, ay + ah - pad_bottom)
    sink.line(ax, y0, ax + aw, y0, "x-axis")
    sink.line(ax, ay, ax, ay + ah, "y-axis")


# ---- pie -------------------------------------------------------------------


def _draw_pie(sink: _Sink, panel: PanelSpec, region: Box, palette: tuple[str, ...]) -> None:
    slices = _pie_slices(panel)
    total = sum(v for _, v in slices)
    r = max(min(region.w, region.h) / 2 - 4, 1.0)
    cx, cy = region.x + region.w / 2, region.y + region.h / 2
    angle = -math.pi / 2
    for i, (_, v) in enumerate(slices):
        color = palette[i % len(palette)]
        if total <= 0 or v <= 0:
            continue
        sweep = 2 * math.pi * v / total
        if sweep >= 2 * math.pi - 1e-9:
            d = (f"M {r2(cx - r)} {r2(cy)} A {r2(r)} {r2(r)} 0 1 1 {r2(cx + r)} {r2(cy)} "
                 f"A {r2(r)} {r2(r)} 0 1 1 {r2(cx - r)} {r2(cy)} Z")
        else:
            x1, y1 = cx + r * math.cos(angle), cy + r * math.sin(angle)
            x2, y2 = cx + r * math.cos(angle + sweep), cy + r * math.sin(angle + sweep)
            large = 1 if sweep > math.pi else 0
            d = f"M {r2(cx)} {r2(cy)} L {r2(x1)} {r2(y1)} A {r2(r)} {r2(r)} 0 {large} 1 {r2(x2)} {r2(y2)} Z"
        sink.path(d, Box(r2(cx - r), r2(cy - r), r2(2 * r), r2(2 * r)), "wedge", color)
        angle += sweep
    sink.circle(cx, cy, r, "pie", "none")


# ---- dispatch --------------------------------------------------------------


def _content_min_width(panel: PanelSpec) -> float:
    if panel.kind is ChartKind.PIE:
        return 120.0
    if panel.kind is ChartKind.HORIZONTAL_BAR:
        return _hbar_min_width(panel)
    if panel.kind in (ChartKind.LINE, ChartKind.AREA):
        return _line_min_width(panel)
    return _vbar_min_width(panel)


def _content_min_height(panel: PanelSpec, width: float) -> float:
    if panel.kind is ChartKind.PIE:
        return 100.0
    if panel.kind is ChartKind.HORIZONTAL_BAR:
        return _hbar_min_height(panel, width)
    if panel.kind in (ChartKind.LINE, ChartKind.AREA):
        return _line_min_height(panel, width)
    return _vbar_min_height(panel, width)


def _draw_content(sink: _Sink, panel: PanelSpec, region: Box, palette: tuple[str, ...]) -> None:
    if panel.kind is ChartKind.PIE:
        _draw_pie(sink, panel, region, palette)
    elif panel.kind is ChartKind.HORIZONTAL_BAR:
        _draw_hbars(sink, panel, region, palette)
    elif panel.kind in (ChartKind.LINE, ChartKind.AREA):
        _draw_lines(sink, panel, region, palette)
    else:
        _draw_vbars(sink, panel, region, palette)


HEADING_GAP = 6.0
SIDE_GAP = 8.0


def _side_heading_width(panel: PanelSpec, cell_w: float) -> float:
    return min(0.3 * cell_w, text_width(panel.heading, HEADING_SIZE) + 4)


def _heading_lines(panel: PanelSpec, width: float) -> list[str]:
    return wrap(panel.heading, width, HEADING_SIZE, max_lines=4)


def _heading_height(lines: list[str]) -> float:
    return len(lines) * LINE_HEIGHT * HEADING_SIZE + HEADING_GAP if lines else 0.0


def panel_min_width(panel: PanelSpec) -> float:
    w = _content_min_width(panel)
    if panel.heading and panel.heading_anchor in ("left", "right"):
        w = w / 0.7 + SIDE_GAP
    return w


def panel_min_height(panel: PanelSpec, cell_w: float) -> float:
    side = bool(panel.heading) and panel.heading_anchor in ("left", "right")
    if side:
        hw = _side_heading_width(panel, cell_w)
        content_w = cell_w - hw - SIDE_GAP
        heading_h = _heading_height(_heading_lines(panel, hw))
        content = _content_min_height(panel, content_w) + _legend_height(_legend_entries(panel), content_w)
        return max(heading_h, content)
    heading_h = _heading_height(_heading_lines(panel, cell_w))
    return heading_h + _content_min_height(panel, cell_w) + _legend_height(_legend_entries(panel), cell_w)


def _layout_panel(index: int, panel: PanelSpec, cell: Box) -> PanelLayout:
    sink = _Sink(f"p{index}", index)
    palette = resolve_palette(panel.palette)
    side = bool(panel.heading) and panel.heading_anchor in ("left", "right")
    heading_box = None
    if side:
        hw = _side_heading_width(panel, cell.w)
        lines = _heading_lines(panel, hw)
        hx = cell.x if panel.heading_anchor == "left" else cell.right - hw
        heading_box = Box(hx, cell.y, hw, _heading_height(lines))
        sink.lines(lines, hx, cell.y, hw, HEADING_SIZE, "start", "heading")
        cx = cell.x + hw + SIDE_GAP if panel.heading_anchor == "left" else cell.x
        content = Box(cx, cell.y, cell.w - hw - SIDE_GAP, cell.h)
    else:
        lines = _heading_lines(panel, cell.w)
        hh = _heading_height(lines)
        if lines:
            hy = cell.y if panel.heading_anchor == "above" else cell.bottom - hh + HEADING_GAP
            heading_box = Box(cell.x, hy, cell.w, hh - HEADING_GAP)
            sink.lines(lines, cell.x, hy, cell.w, HEADING_SIZE, "start", "heading")
        cy = cell.y + hh if panel.heading_anchor == "above" else cell.y
        content = Box(cell.x, cy, cell.w, cell.h - hh)
    entries = _legend_entries(panel)
    legend_h = _legend_height(entries, content.w)
    plot = Box(content.x, content.y, content.w, content.h - legend_h)
    legend_box = None
    if entries:
        legend_box = Box(content.x, plot.bottom, content.w, legend_h)
        _draw_legend(sink, entries, legend_box, palette)
    _draw_content(sink, panel, plot, palette)
    return PanelLayout(index, cell, heading_box, plot, legend_box, sink.items)


# --------------------------------------------------------------------------
# figure


def _header_lines(ir: ChartIR, width: float) -> tuple[list[str], list[str], float]:
    title = wrap(ir.figure_title, width, TITLE_SIZE, max_lines=3)
    summary = wrap(ir.figure_summary, width, SUMMARY_SIZE, max_lines=6)
    h = len(title) * LINE_HEIGHT * TITLE_SIZE + len(summary) * LINE_HEIGHT * SUMMARY_SIZE
    if title and summary:
        h += 6
    if title or summary:
        h += 12
    return title, summary, h


def _plan(ir: ChartIR, width: float, height: float):
    n = len(ir.panels)
    rows, cols = ir.arrangement.shape(n)
    used_rows = math.ceil(n / cols)
    spacing = max(MIN_SPACING, SPACING_FRACTION * height)
    min_w = max(panel_min_width(p) for p in ir.panels)
    need_w = 2 * MARGIN + cols * min_w + (cols - 1) * spacing
    width = max(width, need_w)
    cw = (width - 2 * MARGIN - (cols - 1) * spacing) / cols
    title, summary, header_h = _header_lines(ir, width - 2 * MARGIN)
    row_h = [0.0] * used_rows
    for i, panel in enumerate(ir.panels):
        r = i // cols
        want = panel.requested_box[1] if panel.requested_box else 0.0
        row_h[r] = max(row_h[r], want, panel_min_height(panel, cw))
    need_h = 2 * MARGIN + header_h + sum(row_h) + (used_rows - 1) * spacing
    return dict(rows=used_rows, cols=cols, spacing=spacing, width=width, need_w=need_w, cw=cw,
                title=title, summary=summary, header_h=header_h, row_h=row_h, need_h=need_h)


def required_canvas(ir: ChartIR) -> tuple[int, int]:
    """Smallest canvas (width, height) on which ``ir`` lays out without growth."""
    w0, h0 = ir.canvas
    width = math.ceil(_plan(ir, w0, h0)["width"])
    height = float(h0)
    # spacing scales with the canvas height, so grow until the plan fits
    for _ in range(20):
        need = _plan(ir, width, height)["need_h"]
        if need <= height:
            break
        height = float(math.ceil(need))
    return width, math.ceil(height)


def layout(ir: ChartIR, growth_cap: float = GROWTH_CAP) -> LayoutedFigure:
    """Assign absolute boxes to every element of ``ir``.

    The canvas grows (up to ``growth_cap`` times each dimension) when panels
    need more room than requested; beyond that InfeasibleLayout is raised.
    """
    ir.validate()
    w0, h0 = float(ir.canvas[0]), float(ir.canvas[1])
    plan = _plan(ir, w0, h0)
    warnings = []
    if plan["need_w"] > w0:
        if plan["need_w"] > growth_cap * w0:
            raise InfeasibleLayout(f"panels need width {plan['need_w']:.0f}px, cap is {growth_cap * w0:.0f}px")
        warnings.append(f"canvas width grown to {plan['need_w']:.0f}px")
    width = plan["width"]
    height = h0
    if plan["need_h"] > h0:
        if plan["need_h"] > growth_cap * h0:
            raise InfeasibleLayout(f"panels need height {plan['need_h']:.0f}px, cap is {growth_cap * h0:.0f}px")
        warnings.append(f"canvas height grown to {plan['need_h']:.0f}px")
        height = plan["need_h"]
    rows, cols, spacing, cw = plan["rows"], plan["cols"], plan["spacing"], plan["cw"]
    row_h = list(plan["row_h"])
    extra = height - plan["need_h"]
    if extra > 0:
        row_h = [h + extra / rows for h in row_h]
    if rows >= 2 and spacing / height >= 1.0 / (rows - 1):
        raise InfeasibleLayout("vertical spacing bound cannot be met")

    header_sink = _Sink("fig", None)
    top = MARGIN
    header_box = None
    if plan["header_h"]:
        inner = width - 2 * MARGIN
        header_sink.lines(plan["title"], MARGIN, top, inner, TITLE_SIZE, "middle", "title")
        summary_top = top + len(plan["title"]) * LINE_HEIGHT * TITLE_SIZE + (6 if plan["title"] else 0)
        header_sink.lines(plan["summary"], MARGIN, summary_top, inner, SUMMARY_SIZE, "middle", "summary")
        header_box = Box(MARGIN, top, inner, plan["header_h"] - 12)
        top += plan["header_h"]

    panels = []
    y = top
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if i >= len(ir.panels):
                break
            cell = Box(MARGIN + c * (cw + spacing), y, cw, row_h[r])
            panels.append(_layout_panel(i + 1, ir.panels[i], cell))
        y += row_h[r] + spacing
    return LayoutedFigure(
        canvas=Box(0.0, 0.0, width, height),
        header=header_box,
        header_elements=header_sink.items,
        panels=panels,
        spacing=spacing,
        rows=rows,
        cols=cols,
        warnings=warnings,
    )


__all__ += ["IRError", "nice_ticks", "panel_min_height", "panel_min_width", "wrap"]
