"""Infographic metadata: schema, parsing, validation and serialization.

A metadata document is a title, a summary and an ordered list of subcharts.
Every subchart keeps the raw text of each field it was parsed from, and the
normalized views (kind, axis labels, numeric stats, pixel dimensions,
alignment) are derived from those raw strings.  Because the derivation is
deterministic, ``parse_metadata(serialize_metadata(doc)) == doc`` holds for
every document.

Two input forms are accepted: strict JSON using the ``subchart_N`` key layout
(the primary format), and the labeled prose form ("Subchart 1: This is a bar
chart. ...") handled by a fallback extractor.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

__all__ = [
    "Alignment",
    "AxisSpec",
    "ChartKind",
    "Dimensions",
    "DuplicateSubchartIndex",
    "MalformedDocument",
    "MetadataDoc",
    "MetadataError",
    "MissingField",
    "StatBlock",
    "StatItem",
    "StatSeries",
    "Subchart",
    "SubchartIndexGap",
    "ValidationIssue",
    "ValidationReport",
    "extract_numbers",
    "find_numbers",
    "normalize_alignment",
    "normalize_kind",
    "parse_metadata",
    "serialize_metadata",
    "validate",
]

SUBCHART_FIELDS = (
    "kind",
    "axis",
    "stats",
    "text",
    "position_chart",
    "position_chart_text",
    "background",
    "dimensions",
    "fonts",
    "alignment",
    "summary",
)


class MetadataError(ValueError):
    """Base class for metadata parsing failures."""


class MalformedDocument(MetadataError):
    pass


class MissingField(MetadataError):
    def __init__(self, name: str, message: str | None = None):
        self.name = name
        super().__init__(message or f"missing required field {name!r}")


class SubchartIndexGap(MissingField):
    """Subchart numbering skips an index (e.g. subchart_1 then subchart_3)."""

    def __init__(self, missing: int, present: list[int]):
        self.missing = missing
        self.present = present
        super().__init__(
            f"subchart_{missing}",
            f"subchart numbering has a gap: subchart_{missing} is missing (found {present})",
        )


class DuplicateSubchartIndex(MetadataError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"subchart_{index} appears more than once")


# --------------------------------------------------------------------------
# chart kinds and alignment


class ChartKind(str, Enum):
    BAR = "bar"
    HORIZONTAL_BAR = "horizontal_bar"
    GROUPED_BAR = "grouped_bar"
    STACKED_BAR = "stacked_bar"
    LINE = "line"
    PIE = "pie"
    HISTOGRAM = "histogram"
    AREA = "area"
    UNKNOWN = "unknown"

    @property
    def is_bar(self) -> bool:
        return self in _BAR_KINDS

    @property
    def is_cartesian(self) -> bool:
        return self not in (ChartKind.PIE, ChartKind.UNKNOWN)


_BAR_KINDS = frozenset(
    {ChartKind.BAR, ChartKind.HORIZONTAL_BAR, ChartKind.GROUPED_BAR, ChartKind.STACKED_BAR}
)

_KIND_NOISE = re.compile(r"\b(?:chart|charts|graph|graphs|plot|plots|diagram|type|kind|of|a|an|the)\b")


def normalize_kind(text: str | None) -> ChartKind:
    """Map a free-text chart kind onto a :class:`ChartKind` (case-insensitive, total)."""
    if text is None:
        return ChartKind.UNKNOWN
    s = re.sub(r"[^a-z0-9]+", " ", str(text).lower())
    s = _KIND_NOISE.sub(" ", s)
    words = set(s.split())
    if not words:
        return ChartKind.UNKNOWN
    if s.strip() in {k.value.replace("_", " ") for k in ChartKind if k is not ChartKind.UNKNOWN}:
        return ChartKind(s.strip().replace(" ", "_"))
    barish = bool(words & {"bar", "bars", "column", "columns"})
    if "histogram" in words or "histograms" in words:
        return ChartKind.HISTOGRAM
    if "pie" in words:
        return ChartKind.PIE
    if "stacked" in words and "area" in words:
        return ChartKind.AREA
    if barish or words & {"stacked", "grouped", "clustered"}:
        if "stacked" in words:
            return ChartKind.STACKED_BAR
        if words & {"grouped", "clustered", "multi", "side"}:
            return ChartKind.GROUPED_BAR
        if "horizontal" in words:
            return ChartKind.HORIZONTAL_BAR
        if barish:
            return ChartKind.BAR
    if "area" in words:
        return ChartKind.AREA
    if words & {"line", "lines", "multiline", "trend"}:
        return ChartKind.LINE
    return ChartKind.UNKNOWN


class Alignment(str, Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    UNSPECIFIED = "unspecified"


def normalize_alignment(text: str | None) -> Alignment:
    s = (text or "").lower()
    has_h = "horizontal" in s
    has_v = "vertical" in s
    if has_h and not has_v:
        return Alignment.HORIZONTAL
    if has_v and not has_h:
        return Alignment.VERTICAL
    return Alignment.UNSPECIFIED


# --------------------------------------------------------------------------
# numbers

_NUM = r"[-−]?\d+(?:,\d{3})*(?:\.\d+)?"
_NUMBER_RE = re.compile(r"(?<![\w.])(" + _NUM + r")(?!\d)\s*(%|percent\b|per cent\b)?")


def _to_float(token: str) -> float:
    return float(token.replace("−", "-").replace(",", ""))


def find_numbers(text: str) -> list[tuple[float, str]]:
    """Return ``(value, unit)`` for every number token in ``text``, in reading order."""
    out = []
    for m in _NUMBER_RE.finditer(text or ""):
        value = _to_float(m.group(1))
        if math.isfinite(value):
            out.append((value, "percent" if m.group(2) else ""))
    return out


# --------------------------------------------------------------------------
# field value types


@dataclass(frozen=True)
class AxisSpec:
    raw: str
    x_label: str | None = None
    y_label: str | None = None
    x_units: str | None = None
    y_units: str | None = None

    @classmethod
    def from_raw(cls, raw: str) -> AxisSpec:
        x_label = y_label = None
        structured = _maybe_json(raw)
        if isinstance(structured, dict):
            for key, value in structured.items():
                k = str(key).lower().replace("-", "_").replace(" ", "_")
                text = value if isinstance(value, str) else None
                if text is None or not text.strip():
                    continue
                if k in {"x", "x_axis", "xaxis", "x_label"}:
                    x_label = text.strip()
                elif k in {"y", "y_axis", "yaxis", "y_label"}:
                    y_label = text.strip()
        else:
            x_label = _prose_axis_label(raw, "x")
            y_label = _prose_axis_label(raw, "y")
        return cls(
            raw=raw,
            x_label=x_label,
            y_label=y_label,
            x_units=_units_of(x_label),
            y_units=_units_of(y_label),
        )


_AXIS_VERB = r"(?:\s+(?:represents|represent|shows|show|displays|is labeled|labeled|is labelled|labelled|is|denotes|indicates))?"
_UNSPECIFIED = re.compile(r"^(?:not\s+(?:specified|labeled|labelled|shown)|unspecified|none|n/?a)\b", re.I)


def _prose_axis_label(raw: str, axis: str) -> str | None:
    pattern = re.compile(r"\b" + axis + r"[- ]?axis\b" + _AXIS_VERB + r"\s*[:=]?\s*(?P<label>[^\s,;.].*?)(?=,\s*and\b|,\s*while\b|;|\.\s+(?=(?-i:[A-Z]))|\.?$)", re.I)
    m = pattern.search(raw)
    if not m:
        return None
    label = m.group("label").strip()
    if not label or _UNSPECIFIED.match(label) or label.lower().startswith(("are not", "is not")):
        return None
    return label


def _units_of(label: str | None) -> str | None:
    if not label:
        return None
    m = re.search(r"\(([^(),]+)\)\s*$", label)
    if m:
        return m.group(1).strip()
    m = re.search(r"%|\bpercent(?:age)?s?\b", label, re.I)
    if m:
        return m.group(0)
    return None


@dataclass(frozen=True)
class StatItem:
    label: str
    value: float
    unit: str = ""


@dataclass(frozen=True)
class StatSeries:
    category: str
    items: tuple[StatItem, ...]

    @property
    def values(self) -> list[float]:
        return [item.value for item in self.items]

    @property
    def labels(self) -> list[str]:
        return [item.label for item in self.items]


@dataclass(frozen=True)
class StatBlock:
    raw: str
    series: tuple[StatSeries, ...] = ()

    @classmethod
    def from_raw(cls, raw: str) -> StatBlock:
        structured = _maybe_json(raw)
        if isinstance(structured, (dict, list)):
            pairs = list(_walk_structured(structured, ""))
        else:
            pairs = _parse_prose_stats(raw)
        return cls(raw=raw, series=_group(pairs))

    def numbers(self) -> list[float]:
        return [item.value for s in self.series for item in s.items]


_ITEM_RE = re.compile(
    r"(?P<label>[^:;]*?)\s*:\s*(?P<num>" + _NUM + r")(?![\d])\s*(?P<unit>%|percent\b|per cent\b)?"
)
_LABEL_PREFIX = re.compile(r"^[\s,]*(?:and\s+|&\s*)?", re.I)


def _parse_prose_stats(raw: str) -> list[tuple[str, StatItem]]:
    out: list[tuple[str, StatItem]] = []
    for segment in (raw or "").split(";"):
        if not segment.strip():
            continue
        category = ""
        body = segment
        head, sep, rest = segment.partition(":")
        if sep and not re.match(r"\s*" + _NUM, rest) and ":" in rest:
            category = head.strip()
            body = rest
        items = []
        for m in _ITEM_RE.finditer(body):
            label = _LABEL_PREFIX.sub("", m.group("label")).strip()
            value = _to_float(m.group("num"))
            if math.isfinite(value):
                items.append(StatItem(label, value, "percent" if m.group("unit") else ""))
        if not items:
            items = [StatItem("", v, u) for v, u in find_numbers(body)]
        out.extend((category, item) for item in items)
    return out


def _scalar_item(label: str, value: Any) -> StatItem | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return StatItem(label, float(value), "") if math.isfinite(value) else None
    if isinstance(value, str):
        found = find_numbers(value)
        if found:
            v, unit = found[0]
            return StatItem(label, v, unit)
    return None


def _walk_structured(node: Any, category: str) -> Iterable[tuple[str, StatItem]]:
    if isinstance(node, dict):
        label = node.get("label") if isinstance(node.get("label"), str) else None
        if label is not None and "value" in node:
            item = _scalar_item(label, node["value"])
            if item:
                yield category, item
            return
        for key, value in node.items():
            key = str(key)
            if isinstance(value, (dict, list)):
                sub = key if not category else f"{category} / {key}"
                yield from _walk_structured(value, sub)
            else:
                item = _scalar_item(key, value)
                if item:
                    yield category, item
    elif isinstance(node, list):
        for value in node:
            if isinstance(value, (dict, list)):
                yield from _walk_structured(value, category)
            else:
                item = _scalar_item("", value)
                if item:
                    yield category, item


def _group(pairs: list[tuple[str, StatItem]]) -> tuple[StatSeries, ...]:
    series: list[StatSeries] = []
    for category, item in pairs:
        if series and series[-1].category == category:
            last = series.pop()
            series.append(StatSeries(category, last.items + (item,)))
        else:
            series.append(StatSeries(category, (item,)))
    return tuple(series)


@dataclass(frozen=True)
class Dimensions:
    raw: str
    width_px: int | None = None
    height_px: int | None = None

    @classmethod
    def from_raw(cls, raw: str) -> Dimensions:
        width = height = None
        structured = _maybe_json(raw)
        if isinstance(structured, dict):
            lowered = {str(k).lower(): v for k, v in structured.items()}
            width = _px(lowered.get("width", lowered.get("w")))
            height = _px(lowered.get("height", lowered.get("h")))
            return cls(raw=raw, width_px=width, height_px=height)
        text = raw or ""
        m = re.search(r"(\d+(?:\.\d+)?)\s*(?:px)?\s*[x×]\s*(\d+(?:\.\d+)?)", text, re.I)
        if m:
            return cls(raw=raw, width_px=_px(m.group(1)), height_px=_px(m.group(2)))
        positional: list[int | None] = []
        named_spans = []
        for m in re.finditer(r"\b(width|height)\s*(?:of|:|=)?\s*(\d+(?:\.\d+)?)\s*px", text, re.I):
            named_spans.append(m.span(2))
        for m in re.finditer(r"(\d+(?:\.\d+)?)\s*px(?:\s+(width|wide|height|high|tall))?", text, re.I):
            if any(a <= m.start(1) < b for a, b in named_spans):
                continue
            value = _px(m.group(1))
            word = (m.group(2) or "").lower()
            if word in ("width", "wide"):
                width = value
            elif word in ("height", "high", "tall"):
                height = value
            else:
                positional.append(value)
        for m in re.finditer(r"\b(width|height)\s*(?:of|:|=)?\s*(\d+(?:\.\d+)?)\s*px", text, re.I):
            if m.group(1).lower() == "width" and width is None:
                width = _px(m.group(2))
            elif m.group(1).lower() == "height" and height is None:
                height = _px(m.group(2))
        for value in positional:
            if width is None:
                width = value
            elif height is None:
                height = value
        return cls(raw=raw, width_px=width, height_px=height)

    @property
    def is_numeric(self) -> bool:
        return self.width_px is not None or self.height_px is not None


def _px(value: Any) -> int | None:
    if value is None or isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return int(round(value)) if math.isfinite(value) else None
    found = find_numbers(str(value))
    return int(round(found[0][0])) if found else None


def _maybe_json(raw: str) -> Any:
    s = (raw or "").strip()
    if not s or s[0] not in "{[":
        return None
    try:
        return json.loads(s)
    except ValueError:
        return None


# --------------------------------------------------------------------------
# documents


@dataclass(frozen=True)
class Subchart:
    kind_raw: str = ""
    axis: AxisSpec = field(default_factory=lambda: AxisSpec(""))
    stats: StatBlock = field(default_factory=lambda: StatBlock(""))
    text: str = ""
    position_chart: str = ""
    position_chart_text: str | None = None
    background: str = ""
    dimensions: Dimensions = field(default_factory=lambda: Dimensions(""))
    fonts: str = ""
    alignment_raw: str = ""
    summary: str = ""

    @property
    def kind(self) -> ChartKind:
        return normalize_kind(self.kind_raw)

    @property
    def alignment(self) -> Alignment:
        return normalize_alignment(self.alignment_raw)

    @classmethod
    def from_fields(
        cls,
        *,
        kind: str = "",
        axis: str = "",
        stats: str = "",
        text: str = "",
        position_chart: str = "",
        position_chart_text: str | None = None,
        background: str = "",
        dimensions: str = "",
        fonts: str = "",
        alignment: str = "",
        summary: str = "",
    ) -> Subchart:
        """Build a subchart from raw field strings (the serialized form)."""
        return cls(
            kind_raw=kind,
            axis=AxisSpec.from_raw(axis),
            stats=StatBlock.from_raw(stats),
            text=text,
            position_chart=position_chart,
            position_chart_text=position_chart_text,
            background=background,
            dimensions=Dimensions.from_raw(dimensions),
            fonts=fonts,
            alignment_raw=alignment,
            summary=summary,
        )

    def raw_fields(self) -> dict[str, str]:
        out = {
            "kind": self.kind_raw,
            "axis": self.axis.raw,
            "stats": self.stats.raw,
            "text": self.text,
            "position_chart": self.position_chart,
            "position_chart_text": self.position_chart_text,
            "background": self.background,
            "dimensions": self.dimensions.raw,
            "fonts": self.fonts,
            "alignment": self.alignment_raw,
            "summary": self.summary,
        }
        if out["position_chart_text"] is None:
            del out["position_chart_text"]
        return out


@dataclass(frozen=True)
class MetadataDoc:
    title: str
    summary: str
    subcharts: tuple[Subchart, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.subcharts, tuple):
            object.__setattr__(self, "subcharts", tuple(self.subcharts))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"title": self.title, "summary": self.summary}
        for i, sub in enumerate(self.subcharts, start=1):
            out[f"subchart_{i}"] = sub.raw_fields()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MetadataDoc:
        return _doc_from_mapping(list(data.items()))


def _as_text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, dict) and not value:
        return ""
    return json.dumps(value, ensure_ascii=False, sort_keys=False)


_SUBCHART_KEY = re.compile(r"^\s*sub[\s_-]?chart[\s_-]?(\d+)\s*$", re.I)


def _doc_from_mapping(pairs: list[tuple[str, Any]]) -> MetadataDoc:
    lowered: dict[str, Any] = {}
    indexed: dict[int, Any] = {}
    for key, value in pairs:
        m = _SUBCHART_KEY.match(str(key))
        if m:
            index = int(m.group(1))
            if index in indexed:
                raise DuplicateSubchartIndex(index)
            indexed[index] = value
        else:
            lowered.setdefault(str(key).strip().lower(), value)
    for name in ("title", "summary"):
        if name not in lowered:
            raise MissingField(name)
    if not indexed:
        if isinstance(lowered.get("subcharts"), list) and lowered["subcharts"]:
            indexed = {i: v for i, v in enumerate(lowered["subcharts"], start=1)}
        else:
            raise MissingField("subchart_1")
    present = sorted(indexed)
    for expected, index in enumerate(present, start=1):
        if index != expected:
            raise SubchartIndexGap(expected, present)
    subcharts = []
    for index in present:
        body = indexed[index]
        if not isinstance(body, dict):
            raise MalformedDocument(f"subchart_{index} is not an object")
        fields_ = {str(k).strip().lower(): v for k, v in body.items()}
        kwargs = {name: _as_text(fields_.get(name)) for name in SUBCHART_FIELDS}
        if "position_chart_text" not in fields_:
            kwargs["position_chart_text"] = None
        subcharts.append(Subchart.from_fields(**kwargs))
    return MetadataDoc(_as_text(lowered["title"]), _as_text(lowered["summary"]), tuple(subcharts))


def _outermost_object(text: str) -> list[tuple[str, Any]] | None:
    decoder = json.JSONDecoder(object_pairs_hook=lambda pairs: _Pairs(pairs))
    for m in re.finditer(r"\{", text):
        try:
            value, _ = decoder.raw_decode(text, m.start())
        except ValueError:
            continue
        if isinstance(value, _Pairs):
            return list(value.pairs)
    return None


class _Pairs(dict):
    """dict that remembers duplicate keys, used as ``object_pairs_hook`` result."""

    def __init__(self, pairs):
        super().__init__(pairs)
        self.pairs = pairs


def _plain(value: Any) -> Any:
    if isinstance(value, _Pairs):
        return {k: _plain(v) for k, v in value.pairs}
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def parse_metadata(text: str) -> MetadataDoc:
    """Parse serialized metadata (JSON, or the labeled prose form) into a document.

    Extraneous prose around a single JSON object is ignored; the outermost
    object is used.  Raises :class:`MalformedDocument`, :class:`MissingField`
    (including :class:`SubchartIndexGap`) or :class:`DuplicateSubchartIndex`.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    pairs = _outermost_object(text)
    if pairs is not None:
        plain = []
        for key, value in pairs:
            if isinstance(value, _Pairs) and _SUBCHART_KEY.match(str(key)):
                seen = set()
                for k, _ in value.pairs:
                    if k in seen:
                        raise MalformedDocument(f"{key} repeats field {k!r}")
                    seen.add(k)
            plain.append((key, _plain(value)))
        return _doc_from_mapping(plain)
    if _PROSE_BLOCK.search(text or ""):
        return _parse_prose(text)
    raise MalformedDocument("no JSON object or labeled subchart description found")


# --------------------------------------------------------------------------
# prose fallback

_PROSE_BLOCK = re.compile(r"(?im)^\W*sub[\s-]?chart(?:\s+(\d+))?\s*:\s*")
_PROSE_MARKERS = [
    ("kind", r"\bThis is\b"),
    ("axis", r"\bThe (?:axes|axis|X-axis|x-axis|Y-axis|y-axis|x axis|y axis)\b"),
    ("stats", r"\bThe (?:statistics|stats|data points|values) (?:are|is)\s*:?"),
    ("text", r"\bThe text associated with (?:this|the) subchart is\b"),
    ("position", r"\bThe (?:position of the subchart|subchart is positioned|subchart is located|subchart is placed)\b"),
    ("background", r"\bThe background is\b"),
    ("fonts", r"\bThe fonts? used (?:are|is)\b"),
    ("alignment", r"\bThe alignment is\b"),
    ("summary", r"\bIn summary,?"),
]


def _parse_prose(text: str) -> MetadataDoc:
    title = _line_value(text, "title")
    summary = _line_value(text, "summary")
    blocks = list(_PROSE_BLOCK.finditer(text))
    subcharts = []
    seen: set[int] = set()
    for n, m in enumerate(blocks):
        index = int(m.group(1)) if m.group(1) else n + 1
        if index in seen:
            raise DuplicateSubchartIndex(index)
        seen.add(index)
        end = blocks[n + 1].start() if n + 1 < len(blocks) else len(text)
        subcharts.append((index, _prose_subchart(text[m.end() : end].strip())))
    present = [i for i, _ in subcharts]
    for expected, index in enumerate(sorted(present), start=1):
        if index != expected:
            raise SubchartIndexGap(expected, sorted(present))
    subcharts.sort(key=lambda pair: pair[0])
    return MetadataDoc(title, summary, tuple(sub for _, sub in subcharts))


def _line_value(text: str, name: str) -> str:
    m = re.search(r"(?im)^\W*" + name + r"\s*:\s*(.+?)\s*$", text)
    return m.group(1).strip() if m else ""


def _prose_subchart(block: str) -> Subchart:
    hits = []
    for name, pattern in _PROSE_MARKERS:
        m = re.search(pattern, block, re.I if name != "kind" else 0)
        if m:
            hits.append((m.start(), m.end(), name))
    hits.sort()
    segments: dict[str, str] = {}
    for n, (start, end, name) in enumerate(hits):
        stop = hits[n + 1][0] if n + 1 < len(hits) else len(block)
        body = block[end:stop].strip()
        if name == "axis":
            body = block[start:stop].strip()
        segments[name] = re.sub(r"\s*\.\s*$", "", body).strip()

    kind = ""
    if "kind" in segments:
        m = re.match(r"(?:also\s+|another\s+)?(?:an?\s+|another\s+)?(.+)$", segments["kind"], re.I)
        kind = m.group(1).strip() if m else segments["kind"]

    text_ = segments.get("text", "")
    quoted = re.match(r'^["“](.*?)["”]$', text_)
    if quoted:
        text_ = quoted.group(1)

    position = segments.get("position", "")
    position_text = None
    split = re.split(r",?\s+and\s+(?=the text\b)", position, maxsplit=1, flags=re.I)
    if len(split) == 2:
        position, position_text = split[0].strip(), split[1].strip()
    position = re.sub(r"^(?:is\s+)?", "", position).strip()

    background = segments.get("background", "")
    dimensions = ""
    m = re.search(r",?\s*(?:with|and)?\s*(?:the\s+)?dimensions?\s+(?:of|are|is)?\s*(.+)$", background, re.I)
    if m:
        dimensions = m.group(1).strip()
        background = background[: m.start()].strip()

    return Subchart.from_fields(
        kind=kind,
        axis=segments.get("axis", ""),
        stats=segments.get("stats", ""),
        text=text_,
        position_chart=position,
        position_chart_text=position_text,
        background=background,
        dimensions=dimensions,
        fonts=segments.get("fonts", ""),
        alignment=segments.get("alignment", ""),
        summary=segments.get("summary", ""),
    )


# --------------------------------------------------------------------------
# serialization, validation, numbers


def serialize_metadata(doc: MetadataDoc) -> str:
    """Canonical JSON text: title, summary, then subchart_1..n in field order."""
    return json.dumps(doc.to_dict(), ensure_ascii=False, indent=2) + "\n"


@dataclass(frozen=True)
class ValidationIssue:
    path: str
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...] = ()
    warnings: tuple[ValidationIssue, ...] = ()

    @property
    def is_valid(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict[str, Any]:
        return {
            "is_valid": self.is_valid,
            "errors": [vars(e) for e in self.errors],
            "warnings": [vars(w) for w in self.warnings],
        }

    def format(self) -> str:
        lines = [f"{e.path}: {e.code}: {e.message}" for e in self.errors]
        lines += [f"{w.path}: warning {w.code}: {w.message}" for w in self.warnings]
        return "\n".join(lines)


def validate(doc: MetadataDoc) -> ValidationReport:
    """Mechanically check the reviewer checklist against ``doc``."""
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []
    if not doc.title.strip():
        warnings.append(ValidationIssue("title", "EmptyTitle", "title is empty"))
    if not doc.summary.strip():
        warnings.append(ValidationIssue("summary", "EmptySummary", "summary is empty"))
    if not doc.subcharts:
        errors.append(ValidationIssue("subcharts", "NoSubcharts", "document has no subcharts"))
    for i, sub in enumerate(doc.subcharts, start=1):
        base = f"subchart_{i}"
        if sub.kind is ChartKind.UNKNOWN:
            errors.append(ValidationIssue(f"{base}.kind", "UnknownKind", f"unrecognized chart kind {sub.kind_raw!r}"))
        if not sub.axis.raw.strip():
            errors.append(ValidationIssue(f"{base}.axis", "EmptyAxis", "axis description is empty"))
        if not sub.stats.numbers():
            errors.append(ValidationIssue(f"{base}.stats", "NoStatistics", "no numeric statistics found"))
        if not sub.position_chart.strip():
            errors.append(ValidationIssue(f"{base}.position_chart", "EmptyPlacement", "placement phrase is empty"))
        dims = sub.dimensions
        for name, value in (("width", dims.width_px), ("height", dims.height_px)):
            if value is not None and value <= 0:
                errors.append(
                    ValidationIssue(f"{base}.dimensions", "PositiveDimensions", f"{name} must be positive, got {value}")
                )
        if not dims.is_numeric:
            warnings.append(ValidationIssue(f"{base}.dimensions", "NoPixelDimensions", "no pixel dimensions found"))
    return ValidationReport(tuple(errors), tuple(warnings))


def extract_numbers(doc: MetadataDoc) -> list[float]:
    """All statistic values across subcharts, percent-stripped, sorted ascending."""
    return sorted(v for sub in doc.subcharts for v in sub.stats.numbers())
