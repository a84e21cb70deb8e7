"""Declarative chart program: figure, panels, arrangement.

The JSON form is what an LLM coder is asked to emit and what ``ir.json``
files hold::

    {"title": str, "summary": str,
     "canvas": {"width": int, "height": int},
     "arrangement": {"type": "column" | "row" | "grid", "rows": int, "cols": int},
     "panels": [{"kind": str, "heading": str, "heading_anchor": "above",
                 "x_label": str, "y_label": str,
                 "series": [{"name": str, "labels": [str], "values": [num], "unit": str}],
                 "palette": [str], "show_value_labels": bool,
                 "requested_box": {"width": int, "height": int} | null}]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from ..metadata import ChartKind, normalize_kind

__all__ = [
    "Arrangement",
    "ChartIR",
    "DEFAULT_PALETTE",
    "IRError",
    "PanelSpec",
    "Series",
    "is_greyish",
    "resolve_palette",
]

# eight distinct hues, no greys or blacks
DEFAULT_PALETTE = (
    "#4E79A7",
    "#F28E2B",
    "#E15759",
    "#76B7B2",
    "#59A14F",
    "#EDC948",
    "#B07AA1",
    "#FF9DA7",
)

HEADING_ANCHORS = ("above", "below", "left", "right")


class IRError(ValueError):
    """The chart program is structurally invalid."""


def is_greyish(color: str) -> bool:
    """True for greys/blacks (low channel spread) and for unparseable colors."""
    c = color.strip().lower()
    named = {"black", "grey", "gray", "silver", "dimgray", "dimgrey", "darkgray", "darkgrey", "lightgray", "lightgrey",
             "gainsboro", "slategray", "slategrey", "white", "whitesmoke"}
    if c in named:
        return True
    if c.startswith("#") and len(c) in (4, 7):
        h = c[1:]
        if len(h) == 3:
            h = "".join(ch * 2 for ch in h)
        try:
            r, g, b = (int(h[i : i + 2], 16) for i in (0, 2, 4))
        except ValueError:
            return True
        return max(r, g, b) - min(r, g, b) < 24
    return False


def resolve_palette(palette: tuple[str, ...] | list[str]) -> tuple[str, ...]:
    usable = tuple(c for c in palette if not is_greyish(c))
    return usable or DEFAULT_PALETTE


@dataclass(frozen=True)
class Series:
    name: str
    labels: tuple[str, ...]
    values: tuple[float, ...]
    unit: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.labels) != len(self.values):
            raise IRError(f"series {self.name!r}: {len(self.labels)} labels for {len(self.values)} values")
        if any(not math.isfinite(v) for v in self.values):
            raise IRError(f"series {self.name!r} has a non-finite value")


@dataclass(frozen=True)
class Arrangement:
    type: str = "column"
    rows: int = 0
    cols: int = 0

    def shape(self, n: int) -> tuple[int, int]:
        if self.type == "column":
            return n, 1
        if self.type == "row":
            return 1, n
        return self.rows, self.cols

    def to_dict(self) -> dict[str, Any]:
        if self.type == "grid":
            return {"type": "grid", "rows": self.rows, "cols": self.cols}
        return {"type": self.type}


@dataclass(frozen=True)
class PanelSpec:
    kind: ChartKind
    series: tuple[Series, ...]
    heading: str = ""
    heading_anchor: str = "above"
    x_label: str = ""
    y_label: str = ""
    palette: tuple[str, ...] = DEFAULT_PALETTE
    show_value_labels: bool = False
    requested_box: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "palette", tuple(self.palette))

    def values(self) -> list[float]:
        return [v for s in self.series for v in s.values]

    def validate(self) -> None:
        if self.kind is ChartKind.UNKNOWN:
            raise IRError("panel kind is unknown")
        if not self.series or not any(s.values for s in self.series):
            raise IRError("panel has no data")
        if self.heading_anchor not in HEADING_ANCHORS:
            raise IRError(f"heading_anchor must be one of {HEADING_ANCHORS}")
        if self.kind is ChartKind.PIE and any(v < 0 for v in self.values()):
            raise IRError("pie values must be >= 0")
        if self.kind is ChartKind.STACKED_BAR and any(v < 0 for v in self.values()):
            raise IRError("stacked bar values must be >= 0")
        if self.kind in (ChartKind.STACKED_BAR, ChartKind.GROUPED_BAR) and len(self.series) < 2:
            raise IRError(f"{self.kind.value} needs at least 2 series")
        if self.kind in (ChartKind.LINE, ChartKind.AREA) and any(len(s.values) < 2 for s in self.series):
            raise IRError(f"{self.kind.value} needs at least 2 points per series")
        if self.requested_box is not None and min(self.requested_box) <= 0:
            raise IRError("requested_box must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "heading": self.heading,
            "heading_anchor": self.heading_anchor,
            "x_label": self.x_label,
            "y_label": self.y_label,
            "series": [
                {"name": s.name, "labels": list(s.labels), "values": [_num(v) for v in s.values], "unit": s.unit}
                for s in self.series
            ],
            "palette": list(self.palette),
            "show_value_labels": self.show_value_labels,
            "requested_box": None
            if self.requested_box is None
            else {"width": self.requested_box[0], "height": self.requested_box[1]},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PanelSpec:
        if not isinstance(data, dict):
            raise IRError("panel must be an object")
        raw_kind = str(data.get("kind", ""))
        kind = ChartKind(raw_kind) if raw_kind in ChartKind._value2member_map_ else normalize_kind(raw_kind)
        series = []
        for s in data.get("series") or []:
            if not isinstance(s, dict):
                raise IRError("series must be an object")
            values = s.get("values") or []
            labels = s.get("labels")
            if labels is None:
                labels = [""] * len(values)
            try:
                series.append(Series(str(s.get("name", "")), tuple(labels), tuple(values), str(s.get("unit", ""))))
            except (TypeError, ValueError) as exc:
                raise IRError(f"bad series: {exc}") from exc
        box = data.get("requested_box")
        requested = None
        if isinstance(box, dict):
            try:
                requested = (int(box["width"]), int(box["height"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise IRError(f"bad requested_box: {exc}") from exc
        palette = data.get("palette") or DEFAULT_PALETTE
        return cls(
            kind=kind,
            series=tuple(series),
            heading=str(data.get("heading", "")),
            heading_anchor=str(data.get("heading_anchor", "above")),
            x_label=str(data.get("x_label", "") or ""),
            y_label=str(data.get("y_label", "") or ""),
            palette=tuple(str(c) for c in palette),
            show_value_labels=bool(data.get("show_value_labels", False)),
            requested_box=requested,
        )


@dataclass(frozen=True)
class ChartIR:
    figure_title: str
    figure_summary: str
    canvas: tuple[int, int]
    panels: tuple[PanelSpec, ...]
    arrangement: Arrangement = field(default_factory=Arrangement)

    def __post_init__(self) -> None:
        object.__setattr__(self, "panels", tuple(self.panels))

    def validate(self) -> None:
        if not self.panels:
            raise IRError("chart program has no panels")
        if self.canvas[0] <= 0 or self.canvas[1] <= 0:
            raise IRError("canvas must be positive")
        arr = self.arrangement
        if arr.type not in ("column", "row", "grid"):
            raise IRError(f"unknown arrangement {arr.type!r}")
        if arr.type == "grid" and (arr.rows < 1 or arr.cols < 1 or arr.rows * arr.cols < len(self.panels)):
            raise IRError(f"grid {arr.rows}x{arr.cols} cannot hold {len(self.panels)} panels")
        for i, panel in enumerate(self.panels, start=1):
            try:
                panel.validate()
            except IRError as exc:
                raise IRError(f"panel {i}: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "title": self.figure_title,
            "summary": self.figure_summary,
            "canvas": {"width": self.canvas[0], "height": self.canvas[1]},
            "arrangement": self.arrangement.to_dict(),
            "panels": [p.to_dict() for p in self.panels],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ChartIR:
        if not isinstance(data, dict):
            raise IRError("chart program must be an object")
        try:
            canvas = data.get("canvas") or {}
            size = (int(canvas.get("width", 640)), int(canvas.get("height", 480)))
            arr = data.get("arrangement") or {}
            if isinstance(arr, str):
                arr = {"type": arr}
            arrangement = Arrangement(str(arr.get("type", "column")), int(arr.get("rows", 0)), int(arr.get("cols", 0)))
        except (TypeError, ValueError, AttributeError) as exc:
            raise IRError(f"bad figure fields: {exc}") from exc
        panels = data.get("panels")
        if not isinstance(panels, list):
            raise IRError("panels must be a list")
        ir = cls(
            figure_title=str(data.get("title", "")),
            figure_summary=str(data.get("summary", "")),
            canvas=size,
            panels=tuple(PanelSpec.from_dict(p) for p in panels),
            arrangement=arrangement,
        )
        ir.validate()
        return ir

    @classmethod
    def from_json(cls, text: str) -> ChartIR:
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise IRError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def _num(v: float) -> int | float:
    return int(v) if float(v).is_integer() and abs(v) < 1e15 else v
