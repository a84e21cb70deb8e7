"""SVG rendering of a laid-out figure and text overlap detection."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

from .ir import ChartIR
from .layout import Box, Element, LayoutedFigure, text_box

__all__ = ["OverlapViolation", "detect_overlaps", "parse_svg_elements", "render_svg"]

SVG_NS = "http://www.w3.org/2000/svg"
FONT_FAMILY = "DejaVu Sans Mono, Menlo, Consolas, monospace"


def _f(v: float) -> str:
    v = round(float(v), 2)
    if v == 0:
        return "0"
    text = f"{v:.2f}".rstrip("0").rstrip(".")
    return text


def _attrs(**kw) -> str:
    parts = []
    for key, value in kw.items():
        if value is None or value == "":
            continue
        name = key.rstrip("_").replace("_", "-")
        if isinstance(value, float):
            value = _f(value)
        parts.append(f"{name}={quoteattr(str(value))}")
    return " ".join(parts)


def _element_svg(el: Element) -> str:
    if el.kind == "text":
        return (
            f"<text {_attrs(id=el.id, class_=el.role, x=el.x, y=el.y, font_size=el.size, text_anchor=el.anchor, fill=el.fill, data_owner=el.owner)}>"
            f"{escape(el.text)}</text>"
        )
    if el.kind == "rect":
        cls = f"mark {el.role}" if el.is_mark else el.role
        return f"<rect {_attrs(id=el.id, class_=cls, x=el.box.x, y=el.box.y, width=el.box.w, height=el.box.h, fill=el.fill)}/>"
    if el.kind == "line":
        (x1, y1), (x2, y2) = el.points
        return f"<line {_attrs(id=el.id, class_=el.role, x1=x1, y1=y1, x2=x2, y2=y2, stroke=el.fill, stroke_width='1')}/>"
    if el.kind == "circle":
        cls = f"mark {el.role}" if el.is_mark else el.role
        if el.fill == "none":
            return f"<circle {_attrs(id=el.id, class_=cls, cx=el.x, cy=el.y, r=el.size, fill='none', stroke='#FFFFFF', stroke_width='1')}/>"
        return f"<circle {_attrs(id=el.id, class_=cls, cx=el.x, cy=el.y, r=el.size, fill=el.fill)}/>"
    if el.kind == "path":
        extra = {"fill_opacity": "0.35"} if el.role == "area" else {"stroke": "#FFFFFF", "stroke_width": "1"}
        return f"<path {_attrs(id=el.id, class_=el.role, d=el.d, fill=el.fill, **extra)}/>"
    if el.kind == "polyline":
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in el.points)
        return f"<polyline {_attrs(id=el.id, class_=el.role, points=pts, fill='none', stroke=el.fill, stroke_width='2')}/>"
    raise ValueError(f"unknown element kind {el.kind!r}")


def render_svg(figure: LayoutedFigure, ir: ChartIR | None = None) -> str:
    """Standalone SVG 1.1 text.  Byte-identical for identical inputs."""
    w, h = figure.canvas.w, figure.canvas.h
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{SVG_NS}" version="1.1" {_attrs(width=float(w), height=float(h))} viewBox="0 0 {_f(w)} {_f(h)}" '
        f'font-family="{FONT_FAMILY}">',
        f'<rect class="background" x="0" y="0" width="{_f(w)}" height="{_f(h)}" fill="#FFFFFF"/>',
    ]
    if ir is not None:
        out.append(f"<title>{escape(ir.figure_title)}</title>")
    out.append('<g class="header">')
    out.extend(_element_svg(el) for el in figure.header_elements)
    out.append("</g>")
    for panel in figure.panels:
        kind = ir.panels[panel.index - 1].kind.value if ir is not None else ""
        out.append(f"<g {_attrs(id=f'panel-{panel.index}', class_='panel', data_kind=kind)}>")
        ordered = sorted(panel.elements, key=lambda e: 1 if e.kind == "text" else 0)
        out.extend(_element_svg(el) for el in ordered)
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class OverlapViolation:
    first: str
    second: str
    kind: str  # "text-text" or "text-mark"
    overlap: tuple[float, float]

    def describe(self) -> str:
        return f"{self.first} overlaps {self.second} ({self.kind}, {self.overlap[0]:.1f}x{self.overlap[1]:.1f}px)"


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_svg_elements(svg: str) -> list[Element]:
    """Recover text and mark boxes from rendered SVG using the layout text metrics."""
    root = ET.fromstring(svg.encode("utf-8"))
    out: list[Element] = []
    for node in root.iter():
        tag = _local(node.tag)
        classes = (node.get("class") or "").split()
        eid = node.get("id", "")
        if tag == "text":
            x, y = float(node.get("x", 0)), float(node.get("y", 0))
            size = float(node.get("font-size", 10))
            anchor = node.get("text-anchor", "start")
            text = node.text or ""
            out.append(Element(eid, "text", classes[0] if classes else "", text_box(x, y, size, anchor, text),
                               text=text, size=size, anchor=anchor, x=x, y=y, owner=node.get("data-owner", "")))
        elif tag == "rect" and "mark" in classes:
            box = Box(float(node.get("x")), float(node.get("y")), float(node.get("width")), float(node.get("height")))
            out.append(Element(eid, "rect", classes[-1], box, is_mark=True))
        elif tag == "circle" and "mark" in classes:
            cx, cy, r = float(node.get("cx")), float(node.get("cy")), float(node.get("r"))
            out.append(Element(eid, "circle", classes[-1], Box(cx - r, cy - r, 2 * r, 2 * r), is_mark=True))
    return out


def detect_overlaps(figure: LayoutedFigure | None, svg: str | None = None, eps: float = 0.5) -> list[OverlapViolation]:
    """Pairs of text boxes, or text and mark boxes, that intersect by more than ``eps`` px each way.

    A value label drawn inside its own bar (``owner``) is not a violation.
    When ``svg`` is given the boxes are recovered from it, otherwise taken
    from ``figure``.
    """
    elements = parse_svg_elements(svg) if svg is not None else figure.elements()
    texts = [e for e in elements if e.kind == "text" and e.text]
    marks = [e for e in elements if e.is_mark]
    found: list[OverlapViolation] = []
    for i, a in enumerate(texts):
        for b in texts[i + 1 :]:
            if a.box.intersects(b.box, eps):
                found.append(OverlapViolation(a.id, b.id, "text-text", a.box.overlap(b.box)))
    for t in texts:
        for m in marks:
            if not t.box.intersects(m.box, eps):
                continue
            if t.owner and t.owner == m.id and m.box.contains(t.box, eps):
                continue
            found.append(OverlapViolation(t.id, m.id, "text-mark", t.box.overlap(m.box)))
    return found
