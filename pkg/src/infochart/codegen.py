"""Coder/judge refinement loop turning metadata into an accepted chart program.

The coder proposes a ChartIR (from a model or the deterministic compiler),
the judge reviews it (mechanical checks, a model, or both) and any feedback
is handed to the next coder call.  The loop stops on acceptance or after at
most five iterations.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .chart import ChartIR, ConstraintReport, IRError, check_constraints, compile_metadata, layout
from .chart.ir import __doc__ as _IR_DOC
from .chart.layout import InfeasibleLayout
from .gateway import CompletionRequest, ConfigError, Gateway, GatewayError, prompt_request
from .metadata import MetadataDoc, serialize_metadata
from .prompts import TemplateId

__all__ = [
    "CoderFailed",
    "CoderOutput",
    "IterationRecord",
    "LoopAudit",
    "LoopConfig",
    "MAX_ITERATIONS",
    "Verdict",
    "coder_request",
    "coder_step",
    "is_yes",
    "judge_request",
    "judge_step",
    "parse_ir_reply",
    "run_loop",
]

MAX_ITERATIONS = 5
CODER_MODES = ("llm", "deterministic")
JUDGE_MODES = ("mechanical", "llm", "combined")

IR_SCHEMA = _IR_DOC.split("::", 1)[1].strip() + "\n" if _IR_DOC and "::" in _IR_DOC else ""


class CoderFailed(GatewayError):
    """The model coder produced no usable program and fallback is disabled."""


@dataclass(frozen=True)
class LoopConfig:
    max_iterations: int = MAX_ITERATIONS
    coder_mode: str = "deterministic"
    judge_mode: str = "mechanical"
    allow_deterministic_fallback: bool = True
    coder_backend: str | None = None
    coder_model: str = "coder"
    judge_backend: str | None = None
    judge_model: str = "judge"
    temperature: float = 0.5
    max_tokens: int = 4000

    def __post_init__(self) -> None:
        if not 1 <= self.max_iterations <= MAX_ITERATIONS:
            raise ConfigError(f"max_iterations must be between 1 and {MAX_ITERATIONS}")
        if self.coder_mode not in CODER_MODES:
            raise ConfigError(f"coder_mode must be one of {CODER_MODES}")
        if self.judge_mode not in JUDGE_MODES:
            raise ConfigError(f"judge_mode must be one of {JUDGE_MODES}")
        if self.coder_mode == "llm" and not self.coder_backend:
            raise ConfigError("coder_mode=llm requires coder_backend")
        if self.judge_mode != "mechanical" and not self.judge_backend:
            raise ConfigError(f"judge_mode={self.judge_mode} requires judge_backend")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LoopConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown loop config keys: {sorted(unknown)}")
        return cls(**data)


# --------------------------------------------------------------------------
# coder


@dataclass(frozen=True)
class CoderOutput:
    ir: ChartIR
    source: str  # "llm", "deterministic" or "fallback"
    raw_text: str | None = None
    note: str = ""


_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.S)


def parse_ir_reply(text: str) -> ChartIR:
    """Extract the outermost JSON object from a model reply and load it as a ChartIR."""
    candidates = [m.group(1) for m in _FENCE.finditer(text)] + [text]
    decoder = json.JSONDecoder()
    last_error: Exception | None = None
    for chunk in candidates:
        start = chunk.find("{")
        while start != -1:
            try:
                data, _ = decoder.raw_decode(chunk, start)
            except ValueError as exc:
                last_error = exc
                start = chunk.find("{", start + 1)
                continue
            return ChartIR.from_dict(data)
    raise IRError(f"no JSON chart program in reply ({last_error or 'no object found'})")


def coder_request(doc: MetadataDoc, feedback: str | None, config: LoopConfig) -> CompletionRequest:
    bindings = {"metadata": serialize_metadata(doc), "ir_schema": IR_SCHEMA}
    if feedback:
        bindings["feedback"] = "Feedback on the previous attempt:\n" + feedback
    return prompt_request(
        TemplateId.CODER, bindings, model_id=config.coder_model, temperature=config.temperature, max_tokens=config.max_tokens
    )


def coder_step(
    doc: MetadataDoc,
    prior_feedback: str | None = None,
    mode: str = "deterministic",
    *,
    gateway: Gateway | None = None,
    config: LoopConfig | None = None,
) -> CoderOutput:
    """Propose a chart program for ``doc``.

    In llm mode an unusable reply (or a failed call) falls back to the
    deterministic compiler, noted in the output, unless the config forbids it.
    """
    config = config or LoopConfig()
    if mode == "deterministic":
        return CoderOutput(compile_metadata(doc), "deterministic")
    if mode != "llm":
        raise ConfigError(f"unknown coder mode {mode!r}")
    if gateway is None or not config.coder_backend:
        raise ConfigError("llm coder needs a gateway and coder_backend")
    request = coder_request(doc, prior_feedback, config)
    try:
        reply = gateway.complete(config.coder_backend, request).text
    except GatewayError as exc:
        if not config.allow_deterministic_fallback:
            raise
        return CoderOutput(compile_metadata(doc), "fallback", None, f"coder call failed: {exc}")
    try:
        ir = parse_ir_reply(reply)
    except IRError as exc:
        if not config.allow_deterministic_fallback:
            raise CoderFailed(f"coder reply unusable: {exc}") from exc
        return CoderOutput(compile_metadata(doc), "fallback", reply, f"coder reply unusable: {exc}")
    return CoderOutput(ir, "llm", reply)


# --------------------------------------------------------------------------
# judge


@dataclass
class Verdict:
    accepted: bool
    mechanical_report: ConstraintReport
    source: str
    feedback_text: str | None = None
    llm_reply: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "accepted": self.accepted,
            "source": self.source,
            "feedback": self.feedback_text,
            "llm_reply": self.llm_reply,
            "mechanical": self.mechanical_report.to_dict(),
        }


_YES = re.compile(r"^[\W_]*yes\b", re.I)


def is_yes(reply: str) -> bool:
    """Leading "yes" token after stripping whitespace and punctuation, any case."""
    return bool(_YES.match(reply or ""))


def judge_request(doc: MetadataDoc, ir: ChartIR, config: LoopConfig, geometry: dict | None = None) -> CompletionRequest:
    bindings = {"metadata": serialize_metadata(doc), "code": ir.to_json()}
    if geometry is not None:
        bindings["geometry"] = "Layout geometry:\n" + json.dumps(geometry, sort_keys=True)
    return prompt_request(
        TemplateId.JUDGE, bindings, model_id=config.judge_model, temperature=config.temperature, max_tokens=config.max_tokens
    )


def judge_step(
    doc: MetadataDoc,
    ir: ChartIR,
    mode: str = "mechanical",
    *,
    gateway: Gateway | None = None,
    config: LoopConfig | None = None,
) -> Verdict:
    """Review ``ir`` against ``doc``.

    Mechanical checks always run and must pass for acceptance; a model judge
    (llm/combined) can only add a further veto.
    """
    config = config or LoopConfig()
    if mode not in JUDGE_MODES:
        raise ConfigError(f"unknown judge mode {mode!r}")
    try:
        figure = layout(ir)
    except (InfeasibleLayout, IRError):
        figure = None
    report = check_constraints(ir, doc, figure)
    mech_feedback = report.feedback() if not report.passed else ""
    if mode == "mechanical":
        return Verdict(report.passed, report, "mechanical", mech_feedback or None)

    if gateway is None or not config.judge_backend:
        raise ConfigError("llm judge needs a gateway and judge_backend")
    geometry = figure.geometry_summary() if figure is not None else None
    reply = gateway.complete(config.judge_backend, judge_request(doc, ir, config, geometry)).text
    said_yes = is_yes(reply)
    accepted = said_yes and report.passed
    feedback = None
    if not accepted:
        parts = ([] if said_yes else [reply.strip()]) + ([mech_feedback] if mech_feedback else [])
        feedback = "\n".join(p for p in parts if p) or "Rejected."
    return Verdict(accepted, report, mode, feedback, reply)


# --------------------------------------------------------------------------
# loop


@dataclass
class IterationRecord:
    index: int
    ir: dict[str, Any]
    coder_source: str
    coder_note: str
    verdict: Verdict
    duration_ms: float = 0.0

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        out = {
            "index": self.index,
            "coder_source": self.coder_source,
            "coder_note": self.coder_note,
            "ir": self.ir,
            "verdict": self.verdict.to_dict(),
        }
        if timing:
            out["duration_ms"] = round(self.duration_ms, 3)
        return out


@dataclass
class LoopAudit:
    iterations: list[IterationRecord] = field(default_factory=list)
    terminated_by: str = ""
    final_index: int = 0
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def final_ir(self) -> dict[str, Any]:
        return self.iterations[self.final_index - 1].ir

    @property
    def fallback_used(self) -> bool:
        return any(it.coder_source == "fallback" for it in self.iterations)

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        """JSON-ready audit.  Timing is excluded by default so audits are byte-stable."""
        return {
            "terminated_by": self.terminated_by,
            "final_iteration": self.final_index,
            "iterations": [it.to_dict(timing) for it in self.iterations],
            "config": self.config,
        }


def run_loop(
    doc: MetadataDoc,
    config: LoopConfig | None = None,
    *,
    gateway: Gateway | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> tuple[ChartIR, LoopAudit]:
    """Alternate coder and judge until acceptance or ``config.max_iterations``.

    Without acceptance the iteration with the most passing mechanical checks
    is returned (ties go to the latest) and the audit says max_iterations.
    """
    config = config or LoopConfig()
    audit = LoopAudit(config={k: getattr(config, k) for k in config.__dataclass_fields__})
    irs: list[ChartIR] = []
    feedback: str | None = None
    for index in range(1, config.max_iterations + 1):
        started = clock()
        out = coder_step(doc, feedback, config.coder_mode, gateway=gateway, config=config)
        verdict = judge_step(doc, out.ir, config.judge_mode, gateway=gateway, config=config)
        irs.append(out.ir)
        audit.iterations.append(
            IterationRecord(index, out.ir.to_dict(), out.source, out.note, verdict, (clock() - started) * 1000)
        )
        if verdict.accepted:
            audit.terminated_by = "accepted"
            audit.final_index = index
            return out.ir, audit
        feedback = verdict.feedback_text
    best = max(range(len(irs)), key=lambda i: (audit.iterations[i].verdict.mechanical_report.passing_count, i))
    audit.terminated_by = "max_iterations"
    audit.final_index = best + 1
    return irs[best], audit
