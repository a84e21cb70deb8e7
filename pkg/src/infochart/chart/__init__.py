"""Chart programs: IR, deterministic layout, SVG rendering and constraint checks."""

from __future__ import annotations

from .checks import CHECK_IDS, CheckResult, ConstraintReport, check_constraints
from .compile import EmptySeries, UnrenderableKind, compile_metadata, infer_arrangement
from .ir import DEFAULT_PALETTE, Arrangement, ChartIR, IRError, PanelSpec, Series
from .layout import InfeasibleLayout, LayoutedFigure, layout, required_canvas
from .svg import OverlapViolation, detect_overlaps, render_svg

__all__ = [
    "Arrangement",
    "CHECK_IDS",
    "ChartIR",
    "CheckResult",
    "ConstraintReport",
    "DEFAULT_PALETTE",
    "EmptySeries",
    "IRError",
    "InfeasibleLayout",
    "LayoutedFigure",
    "OverlapViolation",
    "PanelSpec",
    "Series",
    "UnrenderableKind",
    "check_constraints",
    "compile_metadata",
    "detect_overlaps",
    "infer_arrangement",
    "layout",
    "render_svg",
    "required_canvas",
]
