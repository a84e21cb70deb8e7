from __future__ import annotations

import random
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docgen import a6_docs, make_doc, random_doc, subchart_fields
from infochart.chart import (
    Arrangement,
    ChartIR,
    EmptySeries,
    InfeasibleLayout,
    IRError,
    PanelSpec,
    Series,
    UnrenderableKind,
    check_constraints,
    compile_metadata,
    detect_overlaps,
    infer_arrangement,
    layout,
    render_svg,
    required_canvas,
)
from infochart.chart.compile import classify_placement, heading_anchor
from infochart.chart.layout import Box, nice_ticks, text_width, wrap
from infochart.metadata import ChartKind

NS = "{http://www.w3.org/2000/svg}"


def _svg(doc):
    ir = compile_metadata(doc)
    fig = layout(ir)
    return ir, fig, render_svg(fig, ir)


def test_a6_example_1_renders_three_panel_column():
    ir, fig, svg = _svg(a6_docs()["a6_example_1"])
    assert ir.arrangement.type == "column"
    root = ET.fromstring(svg.split("\n", 1)[1])
    panels = root.findall(f"{NS}g[@class='panel']")
    assert len(panels) == 3
    assert [p.get("data-kind") for p in panels] == ["bar"] * 3
    assert detect_overlaps(fig, svg) == []


def test_bar_heights_are_proportional_to_values():
    _, _, svg = _svg(a6_docs()["a6_example_1"])
    root = ET.fromstring(svg.split("\n", 1)[1])
    panel = root.find(f"{NS}g[@id='panel-1']")
    bars = [r for r in panel.findall(f"{NS}rect") if r.get("class") == "mark bar"]
    heights = [float(b.get("height")) for b in bars]
    # 35% and 63%, both from a zero baseline
    assert heights[0] / heights[1] == pytest.approx(35 / 63, abs=1e-3)


def test_every_value_appears_as_label_once():
    doc = a6_docs()["a6_example_2"]
    ir, fig, svg = _svg(doc)
    root = ET.fromstring(svg.split("\n", 1)[1])
    for i, sub in enumerate(doc.subcharts, start=1):
        panel = root.find(f"{NS}g[@id='panel-{i}']")
        labels = [t.text for t in panel.iter(f"{NS}text") if t.get("class") == "value-label"]
        assert sorted(labels) == sorted(f"{v:g}%" for v in sub.stats.numbers())


def test_row_and_single_panel():
    docs = a6_docs()
    assert compile_metadata(docs["a6_example_2"]).arrangement.type == "row"
    ir, fig, svg = _svg(docs["a6_example_3"])
    assert len(ir.panels) == 1 and svg.count('class="panel"') == 1


@pytest.mark.parametrize(
    "phrase, axis",
    [
        ("below the first subchart", "vertical"),
        ("to the right of the first chart", "horizontal"),
        ("top-left corner", "mixed"),
        ("the only chart", None),
    ],
)
def test_classify_placement(phrase, axis):
    assert classify_placement(phrase) == axis


def test_grid_when_directions_mix():
    rng = random.Random(0)
    doc = random_doc(rng, 5, "grid")
    arr, _ = infer_arrangement(doc)
    assert (arr.type, arr.cols, arr.rows) == ("grid", 3, 2)


def test_no_direction_falls_back_to_column_with_warning():
    fields = [subchart_fields("bar", {"a": 1, "b": 2}, f"h{i}", position="somewhere") for i in range(2)]
    for f in fields:
        f["alignment"] = ""
    arr, warnings = infer_arrangement(make_doc(fields))
    assert arr.type == "column" and warnings


def test_heading_anchor_phrases():
    assert heading_anchor("the text is located below it") == "below"
    assert heading_anchor("text at the top left") == "above"
    assert heading_anchor(None) == "above"
    assert heading_anchor("text to the left") == "left"


def test_unrenderable_and_empty():
    with pytest.raises(UnrenderableKind):
        compile_metadata(make_doc([subchart_fields("radar chart", {"a": 1}, "h")]))
    with pytest.raises(EmptySeries):
        compile_metadata(make_doc([subchart_fields("bar chart", {}, "h")]))
    with pytest.raises(EmptySeries):
        compile_metadata(make_doc([subchart_fields("pie chart", {"a": -1, "b": 3}, "h")]))


def test_single_series_stacked_is_transposed():
    ir = compile_metadata(make_doc([subchart_fields("stacked bar chart", {"a": 1, "b": 2}, "h")]))
    assert len(ir.panels[0].series) == 2


def test_ir_json_round_trip_and_validation():
    ir = compile_metadata(a6_docs()["a6_example_1"])
    assert ChartIR.from_json(ir.to_json()) == ir
    with pytest.raises(IRError):
        ChartIR.from_dict({"panels": []})
    with pytest.raises(IRError):
        Series("s", ("a",), (1.0, 2.0))


def test_compiled_canvas_is_the_laid_out_canvas():
    for doc in a6_docs().values():
        ir = compile_metadata(doc)
        assert tuple(ir.canvas) == required_canvas(ir)
        fig = layout(ir)
        assert (fig.canvas.w, fig.canvas.h) == tuple(ir.canvas)
        assert fig.warnings == []


def _bar_panel(n=3, heading="h"):
    return PanelSpec(ChartKind.BAR, (Series("s", tuple(f"c{i}" for i in range(n)), tuple(range(1, n + 1))),), heading)


def test_twenty_one_panels_on_tiny_canvas_is_infeasible():
    ir = ChartIR("t", "", (100, 100), tuple(_bar_panel() for _ in range(21)), Arrangement("column"))
    with pytest.raises(InfeasibleLayout):
        layout(ir)


def test_small_canvas_grows_with_warning():
    ir = ChartIR("t", "", (300, 200), (_bar_panel(), _bar_panel()), Arrangement("column"))
    fig = layout(ir)
    assert fig.canvas.h > 200 and fig.warnings


def test_overlap_detector_finds_planted_collision():
    ir = compile_metadata(a6_docs()["a6_example_3"])
    fig = layout(ir)
    svg = render_svg(fig, ir)
    heading = next(e for e in fig.elements() if e.role == "heading")
    planted = (
        f'<text id="planted" class="heading" x="{heading.x}" y="{heading.y}" font-size="{heading.size}" '
        f'text-anchor="{heading.anchor}">{heading.text}</text>\n</svg>'
    )
    bad = svg.replace("</svg>", planted)
    violations = detect_overlaps(None, bad)
    assert any("planted" in (v.first, v.second) for v in violations)
    assert "planted" in violations[0].describe()


def test_panel_cells_are_disjoint():
    rng = random.Random(7)
    for n in (2, 5, 9, 21):
        for arrangement in ("column", "row", "grid"):
            fig = layout(compile_metadata(random_doc(rng, n, arrangement)))
            cells = [p.cell for p in fig.panels]
            for i, a in enumerate(cells):
                for b in cells[i + 1 :]:
                    assert not a.intersects(b)
                assert fig.canvas.contains(a)


def test_check_report_names_failures():
    doc = a6_docs()["a6_example_1"]
    ir = compile_metadata(doc)
    dropped = ChartIR(ir.figure_title, ir.figure_summary, ir.canvas, ir.panels[:2], ir.arrangement)
    report = check_constraints(dropped, doc)
    assert not report.passed
    assert report.get("SubchartCount").detail == "expected 3, found 2"
    assert "[SubchartCount]" in report.feedback()
    assert check_constraints(ir, doc).passed


def test_grey_palette_fails_colors_check():
    doc = a6_docs()["a6_example_3"]
    ir = compile_metadata(doc)
    grey = PanelSpec(**{**ir.panels[0].__dict__, "palette": ("#777777", "#888888")})
    ir2 = ChartIR(ir.figure_title, ir.figure_summary, ir.canvas, (grey,), ir.arrangement)
    assert not check_constraints(ir2, doc).get("Colors").passed


def test_text_metrics():
    assert text_width("abcd", 10) == pytest.approx(24.0)
    assert all(text_width(line, 10) <= 60 for line in wrap("one two three four five six", 60, 10))
    assert nice_ticks(0, 63, 5)[0] == 0
    box = Box(0, 0, 10, 10)
    assert box.intersects(Box(9, 9, 5, 5)) and not box.intersects(Box(9.6, 0, 5, 5))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=6), st.sampled_from(["bar chart", "horizontal bar chart",
                                                                                 "pie chart", "line chart"]))
def test_any_small_panel_lays_out_without_overlaps(values, kind):
    if kind == "line chart" and len(values) < 2:
        values = values * 2
    if kind == "pie chart" and sum(values) == 0:
        values = [v + 1 for v in values]
    stats = {f"Item {i}": v for i, v in enumerate(values)}
    doc = make_doc([subchart_fields(kind, stats, "Heading")])
    ir, fig, svg = _svg(doc)
    assert detect_overlaps(fig, svg) == []
    assert check_constraints(ir, doc, fig).passed
