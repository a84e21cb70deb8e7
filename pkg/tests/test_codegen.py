from __future__ import annotations

import itertools
import json

import pytest

from docgen import a6_docs, mock_gateway
from infochart.chart import ChartIR, IRError, compile_metadata
from infochart.codegen import (
    CoderFailed,
    LoopConfig,
    coder_request,
    coder_step,
    is_yes,
    judge_step,
    parse_ir_reply,
    run_loop,
)
from infochart.gateway import ConfigError, fingerprint


def _dropped(doc) -> ChartIR:
    ir = compile_metadata(doc)
    return ChartIR(ir.figure_title, ir.figure_summary, ir.canvas, ir.panels[:-1], ir.arrangement)


LLM = LoopConfig(coder_mode="llm", coder_backend="coder", allow_deterministic_fallback=False)


def test_deterministic_loop_accepts_first_iteration():
    for doc in a6_docs().values():
        ir, audit = run_loop(doc)
        assert audit.terminated_by == "accepted"
        assert len(audit.iterations) == 1 and audit.final_index == 1
        assert ir == compile_metadata(doc)


def test_feedback_repairs_in_second_iteration():
    doc = a6_docs()["a6_example_1"]
    first = coder_request(doc, None, LLM)
    script = {
        fingerprint(first): _dropped(doc).to_json(),
        "template:coder": "```json\n" + compile_metadata(doc).to_json() + "```",
    }
    ir, audit = run_loop(doc, LLM, gateway=mock_gateway(coder=script))
    assert audit.terminated_by == "accepted"
    assert [it.verdict.accepted for it in audit.iterations] == [False, True]
    assert "[SubchartCount] expected 3, found 2." in audit.iterations[0].verdict.feedback_text
    assert len(ir.panels) == 3


def test_feedback_reaches_the_coder_prompt():
    doc = a6_docs()["a6_example_3"]
    request = coder_request(doc, "[SubchartCount] expected 1, found 0.", LLM)
    prompt = request.messages[0][1]
    assert "Feedback on the previous attempt:\n[SubchartCount] expected 1, found 0." in prompt
    assert '"panels"' in prompt  # the program schema is part of the prompt


def test_never_correct_coder_stops_at_five():
    doc = a6_docs()["a6_example_1"]
    gw = mock_gateway(coder={"template:coder": _dropped(doc).to_json()})
    ir, audit = run_loop(doc, LLM, gateway=gw)
    assert audit.terminated_by == "max_iterations"
    assert len(audit.iterations) == 5
    assert gw.call_counts["coder"] == 5
    # all iterations tie on passing checks, the latest wins
    assert audit.final_index == 5 and len(ir.panels) == 2


def test_fallback_on_unusable_reply():
    doc = a6_docs()["a6_example_3"]
    config = LoopConfig(coder_mode="llm", coder_backend="coder")
    gw = mock_gateway(coder={"*": "I cannot write that program."})
    out = coder_step(doc, None, "llm", gateway=gw, config=config)
    assert out.source == "fallback" and "unusable" in out.note
    with pytest.raises(CoderFailed):
        coder_step(doc, None, "llm", gateway=gw, config=LLM)


@pytest.mark.parametrize(
    "reply, expected",
    [("Yes", True), ("**YES** all good", True), ("yes.", True), ("Yesterday", False), ("No, the count is off", False),
     ("", False), ("  - yes", True)],
)
def test_is_yes(reply, expected):
    assert is_yes(reply) is expected


def test_llm_judge_cannot_override_mechanical_failures():
    doc = a6_docs()["a6_example_1"]
    config = LoopConfig(judge_mode="llm", judge_backend="judge")
    gw = mock_gateway(judge={"*": "Yes"})
    verdict = judge_step(doc, _dropped(doc), "llm", gateway=gw, config=config)
    assert not verdict.accepted and "[SubchartCount]" in verdict.feedback_text
    verdict = judge_step(doc, compile_metadata(doc), "llm", gateway=gw, config=config)
    assert verdict.accepted


def test_llm_judge_veto_is_fed_back():
    doc = a6_docs()["a6_example_3"]
    config = LoopConfig(judge_mode="combined", judge_backend="judge")
    gw = mock_gateway(judge={"*": "No: the heading should be larger."})
    ir, audit = run_loop(doc, config, gateway=gw)
    assert audit.terminated_by == "max_iterations"
    assert audit.iterations[0].verdict.feedback_text.startswith("No: the heading")
    assert all(it.verdict.source == "combined" for it in audit.iterations)
    assert gw.call_counts["judge"] == 5


def test_judge_prompt_carries_geometry():
    doc = a6_docs()["a6_example_3"]
    seen = []

    class Recorder:
        call_counts: dict = {}

        def complete(self, backend, request):
            seen.append(request.messages[0][1])
            return type("C", (), {"text": "yes"})()

    config = LoopConfig(judge_mode="llm", judge_backend="judge")
    judge_step(doc, compile_metadata(doc), "llm", gateway=Recorder(), config=config)
    assert "Layout geometry:" in seen[0]
    assert '"normalized_vertical_spacing"' in seen[0]


def test_parse_ir_reply_variants():
    doc = a6_docs()["a6_example_3"]
    text = compile_metadata(doc).to_json()
    assert parse_ir_reply("Sure!\n" + text + "\nDone") == compile_metadata(doc)
    with pytest.raises(IRError):
        parse_ir_reply("no program here")
    with pytest.raises(IRError):
        parse_ir_reply(json.dumps({"panels": [{"kind": "bar", "series": []}]}))


def test_audit_is_stable_without_timing():
    doc = a6_docs()["a6_example_2"]
    ticks = itertools.count()
    _, a1 = run_loop(doc, clock=lambda: next(ticks) * 0.37)
    _, a2 = run_loop(doc, clock=lambda: 0.0)
    assert json.dumps(a1.to_dict(), sort_keys=True) == json.dumps(a2.to_dict(), sort_keys=True)
    assert "duration_ms" in a1.to_dict(timing=True)["iterations"][0]


def test_config_validation():
    with pytest.raises(ConfigError):
        LoopConfig(max_iterations=6)
    with pytest.raises(ConfigError):
        LoopConfig(coder_mode="llm")
    with pytest.raises(ConfigError):
        LoopConfig.from_dict({"iterations": 3})
