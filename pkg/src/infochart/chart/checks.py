"""Mechanical subset of the judge checklist, run against a chart program and its metadata."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ..metadata import ChartKind, MetadataDoc, extract_numbers
from .compile import infer_arrangement
from .ir import ChartIR, IRError, is_greyish
from .layout import InfeasibleLayout, LayoutedFigure, layout
from .svg import detect_overlaps

__all__ = ["CHECK_IDS", "CheckResult", "ConstraintReport", "check_constraints"]

# Fixed, documented check ids.  Order is the order of the report.
CHECK_IDS = (
    "SubchartCount",       # one panel per subchart
    "SubchartType",        # panel kind equals subchart kind, index by index
    "AxesAndStats",        # every gold number plotted; stated axis labels carried over
    "SubchartPosition",    # arrangement agrees with the placement phrases
    "Dimensions",          # requested panel boxes match stated pixel dimensions
    "Colors",              # palettes avoid greys and blacks
    "TitleAndSummary",     # figure title and summary present when the metadata has them
    "ValueLabels",         # bar panels print their data values
    "SpacingBound",        # vertical spacing < 1/(rows-1) of the canvas height
    "NoOverlaps",          # no text/text or text/mark collisions
    "NoExtraAxes",         # one axis pair per cartesian panel, none for pies
    "Layout",              # panel cells inside the canvas and pairwise disjoint
)


@dataclass(frozen=True)
class CheckResult:
    id: str
    passed: bool
    detail: str = ""

    def sentence(self) -> str:
        return f"[{self.id}] {self.detail.rstrip('.')}."


@dataclass
class ConstraintReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def passing_count(self) -> int:
        return sum(c.passed for c in self.checks)

    def failed(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def get(self, check_id: str) -> CheckResult:
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    def feedback(self) -> str:
        return " ".join(c.sentence() for c in self.failed())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [{"id": c.id, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def _key(v: float) -> float:
    return round(v, 9)


def _count(ir: ChartIR, doc: MetadataDoc) -> CheckResult:
    n, m = len(doc.subcharts), len(ir.panels)
    return CheckResult("SubchartCount", n == m, f"expected {n}, found {m}")


def _types(ir: ChartIR, doc: MetadataDoc) -> CheckResult:
    bad = []
    for i, (panel, sub) in enumerate(zip(ir.panels, doc.subcharts), start=1):
        if panel.kind is not sub.kind:
            bad.append(f"index {i}: expected {sub.kind.value}, found {panel.kind.value}")
    return CheckResult("SubchartType", not bad, "; ".join(bad) or "all panel kinds match")


def _axes_and_stats(ir: ChartIR, doc: MetadataDoc) -> CheckResult:
    problems = []
    plotted = Counter(_key(v) for p in ir.panels for v in p.values())
    gold = Counter(_key(v) for v in extract_numbers(doc))
    missing = gold - plotted
    if missing:
        shown = ", ".join(f"{v:g}" for v in sorted(missing.elements())[:8])
        problems.append(f"{sum(missing.values())} data value(s) not plotted ({shown})")
    for i, (panel, sub) in enumerate(zip(ir.panels, doc.subcharts), start=1):
        for axis, want, have in (("x", sub.axis.x_label, panel.x_label), ("y", sub.axis.y_label, panel.y_label)):
            if want and want.strip().lower() != (have or "").strip().lower():
                problems.append(f"panel {i} {axis}-axis label should be {want!r}")
    return CheckResult("AxesAndStats", not problems, "; ".join(problems) or "all data values and axis labels present")


def _position(ir: ChartIR, doc: MetadataDoc) -> CheckResult:
    want, _ = infer_arrangement(doc)
    have = ir.arrangement
    ok = want.type == have.type
    if ok and want.type == "grid":
        ok = want.cols == have.cols
    describe = lambda a: a.type if a.type != "grid" else f"grid {a.rows}x{a.cols}"  # noqa: E731
    return CheckResult("SubchartPosition", ok, f"expected {describe(want)} arrangement, found {describe(have)}")


def _dimensions(ir: ChartIR, doc: MetadataDoc) -> CheckResult:
    bad = []
    for i, (panel, sub) in enumerate(zip(ir.panels, doc.subcharts), start=1):
        d = sub.dimensions
        if d.width_px and d.height_px and panel.requested_box != (d.width_px, d.height_px):
            bad.append(f"panel {i} should request {d.width_px}x{d.height_px}px, found {panel.requested_box}")
    return CheckResult("Dimensions", not bad, "; ".join(bad) or "panel sizes follow the metadata")


def _colors(ir: ChartIR) -> CheckResult:
    bad = []
    for i, panel in enumerate(ir.panels, start=1):
        greys = [c for c in panel.palette if is_greyish(c)]
        if greys:
            bad.append(f"panel {i} uses grey/black colors {greys}")
    return CheckResult("Colors", not bad, "; ".join(bad) or "distinct non-grey colors")


def _title_summary(ir: ChartIR, doc: MetadataDoc) -> CheckResult:
    problems = []
    if doc.title.strip() and not ir.figure_title.strip():
        problems.append("figure title is missing")
    if doc.summary.strip() and not ir.figure_summary.strip():
        problems.append("figure summary is missing")
    return CheckResult("TitleAndSummary", not problems, "; ".join(problems) or "title and summary present")


def _value_labels(ir: ChartIR) -> CheckResult:
    bad = [
        str(i)
        for i, p in enumerate(ir.panels, start=1)
        if (p.kind.is_bar or p.kind is ChartKind.HISTOGRAM) and not p.show_value_labels
    ]
    return CheckResult("ValueLabels", not bad, f"bar panels without value labels: {', '.join(bad)}" if bad else "bar values shown")


def _geometry(fig: LayoutedFigure, ir: ChartIR) -> list[CheckResult]:
    out = []
    ok = fig.spacing_bound_ok()
    bound = "n/a" if fig.rows < 2 else f"{1 / (fig.rows - 1):.4f}"
    out.append(CheckResult("SpacingBound", ok, f"normalized vertical spacing {fig.normalized_vertical_spacing:.4f}, bound {bound}"))

    overlaps = detect_overlaps(fig)
    detail = "; ".join(v.describe() for v in overlaps[:5]) or "no overlaps"
    if len(overlaps) > 5:
        detail += f"; and {len(overlaps) - 5} more"
    out.append(CheckResult("NoOverlaps", not overlaps, detail))

    bad = []
    for panel, spec in zip(fig.panels, ir.panels):
        xs = sum(e.role == "x-axis" for e in panel.elements)
        ys = sum(e.role == "y-axis" for e in panel.elements)
        want = 1 if spec.kind.is_cartesian else 0
        if xs != want or ys != want:
            bad.append(f"panel {panel.index} has {xs} x-axis and {ys} y-axis lines, expected {want} each")
    out.append(CheckResult("NoExtraAxes", not bad, "; ".join(bad) or "one axis pair per cartesian panel"))

    problems = []
    canvas = fig.canvas
    for p in fig.panels:
        if not canvas.contains(p.cell, eps=0.01):
            problems.append(f"panel {p.index} leaves the canvas")
    for i, a in enumerate(fig.panels):
        for b in fig.panels[i + 1 :]:
            if a.cell.intersects(b.cell, eps=0.0):
                problems.append(f"panels {a.index} and {b.index} overlap")
    out.append(CheckResult("Layout", not problems, "; ".join(problems) or "panels disjoint and inside the canvas"))
    return out


def check_constraints(ir: ChartIR, doc: MetadataDoc, figure: LayoutedFigure | None = None) -> ConstraintReport:
    """Run every check in :data:`CHECK_IDS`; ``figure`` is laid out from ``ir`` when omitted."""
    checks = [
        _count(ir, doc),
        _types(ir, doc),
        _axes_and_stats(ir, doc),
        _position(ir, doc),
        _dimensions(ir, doc),
        _colors(ir),
        _title_summary(ir, doc),
        _value_labels(ir),
    ]
    if figure is None:
        try:
            figure = layout(ir)
        except (InfeasibleLayout, IRError) as exc:
            reason = f"layout failed: {exc}"
            checks.extend(CheckResult(cid, False, reason) for cid in CHECK_IDS[8:])
            return ConstraintReport(checks)
    checks.extend(_geometry(figure, ir))
    return ConstraintReport(checks)
