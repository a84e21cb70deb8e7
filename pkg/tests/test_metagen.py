from __future__ import annotations

import pytest
import requests

from docgen import a6_docs, make_doc, mock_gateway, subchart_fields
from infochart import gateway as gateway_module
from infochart.gateway import AllBackendsFailed, BackendConfig, Gateway, RetryPolicy
from infochart.metadata import serialize_metadata
from infochart.metagen import (
    CandidateMetadata,
    GeneratorConfig,
    HeuristicWeights,
    NoViableCandidate,
    StageConfig,
    generate_candidates,
    generate_metadata,
    heuristic_prefilter,
    parse_ranker_reply,
    rank,
)

INPUT = "Among adults, 35% say one thing while 63% say another."

GOOD = make_doc([subchart_fields("bar chart", {"One thing": 35, "Another": 63}, "Adults")], title="Views")
UNGROUNDED = make_doc([subchart_fields("bar chart", {"One thing": 36, "Another": 62}, "Adults")], title="Views")
UNKNOWN_KIND = make_doc([subchart_fields("radar chart", {"One thing": 35, "Another": 63}, "Adults")], title="Views")


def _gens(*names):
    return [GeneratorConfig(backend=n, model_id=n, temperature=0.5) for n in names]


def test_candidates_in_config_order_and_scored():
    gw = mock_gateway(
        a={"*": "Here you go: " + serialize_metadata(UNGROUNDED)},
        b={"*": serialize_metadata(GOOD)},
        c={"*": "not metadata at all"},
    )
    cands = heuristic_prefilter(generate_candidates(INPUT, _gens("a", "b", "c"), gw), INPUT)
    assert [c.label for c in cands] == ["a@0.5", "b@0.5", "c@0.5"]
    assert cands[0].heuristic_score == pytest.approx(0.8)
    assert cands[1].heuristic_score == pytest.approx(1.0)
    assert cands[2].doc is None and cands[2].heuristic_score == 0.0


def test_heuristic_fallback_picks_best_lowest_index():
    cands = heuristic_prefilter(
        [CandidateMetadata("x", "", UNKNOWN_KIND), CandidateMetadata("y", "", GOOD), CandidateMetadata("z", "", GOOD)],
        INPUT,
    )
    decision = rank(INPUT, cands)
    assert decision.method == "heuristic_fallback" and decision.chosen_index == 1


def test_weights_are_normalized():
    cands = heuristic_prefilter([CandidateMetadata("y", "", GOOD)], INPUT, HeuristicWeights(4, 2, 2, 2))
    assert cands[0].heuristic_score == pytest.approx(1.0)
    with pytest.raises(ValueError):
        HeuristicWeights(0, 0, 0, 0)


@pytest.mark.parametrize(
    "reply, slot",
    [
        ("Option 2", 1),
        ("**Option 3** is best because option 1 misses a chart", 2),
        ("I prefer option 1.", 0),
        ("Either option 1 or option 2, hard to say", None),
        ("none of them", None),
    ],
)
def test_parse_ranker_reply(reply, slot):
    assert parse_ranker_reply(reply, [GOOD, UNGROUNDED, UNKNOWN_KIND]) == slot


def test_ranker_reply_as_json_matches_an_option():
    assert parse_ranker_reply(serialize_metadata(UNGROUNDED), [GOOD, UNGROUNDED, None]) == 1
    assert parse_ranker_reply("Option 3", [GOOD, UNGROUNDED, None]) is None


def test_ranker_presents_top_three_and_maps_back():
    docs = [UNKNOWN_KIND, UNGROUNDED, GOOD, GOOD]
    cands = heuristic_prefilter([CandidateMetadata(str(i), "", d) for i, d in enumerate(docs)], INPUT)
    gw = mock_gateway(r={"template:ranker": "Option 3"})
    decision = rank(INPUT, cands, gateway=gw, ranker_backend="r")
    # 0 and 1 tie at 0.8, the lower index is shown
    assert decision.presented == (2, 3, 0)
    assert decision.method == "llm_ranker" and decision.chosen_index == 0


def test_unreadable_ranker_falls_back():
    cands = heuristic_prefilter([CandidateMetadata("a", "", UNGROUNDED), CandidateMetadata("b", "", GOOD)], INPUT)
    gw = mock_gateway(r={"*": "they are all lovely"})
    decision = rank(INPUT, cands, gateway=gw, ranker_backend="r")
    assert decision.method == "heuristic_fallback" and decision.chosen_index == 1
    assert decision.rationale_text == "they are all lovely"


def test_no_viable_candidate():
    with pytest.raises(NoViableCandidate):
        rank(INPUT, [CandidateMetadata("a", "junk", error="x")])


class DownSession:
    def post(self, *args, **kwargs):
        raise requests.ConnectionError("connection refused")


def test_all_transport_failures_raise(monkeypatch):
    monkeypatch.setattr(gateway_module.requests, "Session", DownSession)
    down = BackendConfig(kind="http_chat", endpoint="http://backend.invalid", retry=RetryPolicy(1, ()))
    gw = Gateway({"a": down, "b": down}, sleep=lambda s: None)
    with pytest.raises(AllBackendsFailed):
        generate_candidates(INPUT, _gens("a", "b"), gw)


def test_stage_end_to_end_returns_a_candidate(no_network):
    gold = a6_docs()["a6_example_1"]
    config = StageConfig.from_dict(
        {
            "generators": [{"backend": "g", "model": "m1", "temperature": 0.2}, {"backend": "g", "model": "m2"}],
            "ranker": {"backend": "g", "model": "r"},
        }
    )
    gw = mock_gateway(g={"template:metadata_synthesis": serialize_metadata(gold), "template:ranker": "Option 1"})
    doc, audit = generate_metadata("some text", config, gw, seed=3)
    assert doc == gold
    assert audit.decision.method == "llm_ranker"
    assert len(audit.to_dict()["candidates"]) == 2
