from __future__ import annotations

from pathlib import Path

import pytest
import requests

from docgen import mock_backend, mock_gateway
from infochart.gateway import (
    AuthMissing,
    BackendConfig,
    CompletionRequest,
    ConfigError,
    Gateway,
    NoScriptEntry,
    RetryPolicy,
    TransportError,
    complete,
    fingerprint,
    prompt_request,
)
from infochart.prompts import MissingBinding, TemplateId, catalog_version, get_template, render_prompt

GOLDEN = Path(__file__).parent / "golden"

# The shipped instructions use {{name}} placeholders where the published
# prompts had informal markers; restoring those markers must give the
# published wording back verbatim.
MARKERS = {
    "{{metadata1}}": "{metadata1}",
    "{{metadata2}}": "{metadata2}",
    "{{input_text}}": "[insert text here]",
}


@pytest.mark.parametrize(
    "tid",
    ["complexity_filter", "text_synthesis", "metadata_synthesis", "preference_judge", "ranker", "coder", "judge"],
)
def test_instruction_matches_golden(tid):
    text = get_template(tid).instruction
    for placeholder, marker in MARKERS.items():
        text = text.replace(placeholder, marker)
    assert text.rstrip() == (GOLDEN / f"{tid}.txt").read_text(encoding="utf-8").rstrip()


def test_render_is_byte_stable_and_checks_bindings():
    bindings = {"metadata": "{}", "code": "{}"}
    assert render_prompt("judge", bindings) == render_prompt(TemplateId.JUDGE, dict(bindings))
    assert "Layout geometry" not in render_prompt("judge", bindings)
    with pytest.raises(MissingBinding):
        render_prompt("judge", {"metadata": "{}"})
    assert catalog_version() == "1"


def test_optional_binding_is_substituted():
    text = render_prompt("judge", {"metadata": "M", "code": "C", "geometry": "GEOM"})
    assert text.rstrip().endswith("GEOM")


def _req(**kw):
    return prompt_request("judge", {"metadata": "m", "code": "c"}, model_id="judge", **kw)


def test_fingerprint_ignores_seed_and_temperature_but_not_bindings():
    assert fingerprint(_req(seed=1)) == fingerprint(_req(seed=2, temperature=0.9))
    other = prompt_request("judge", {"metadata": "m2", "code": "c"}, model_id="judge")
    assert fingerprint(other) != fingerprint(_req())


def test_mock_lookup_order():
    req = _req(temperature=0.2, seed=7)
    script = {
        "*": "star",
        "template:judge": "template",
        "template:judge@t=0.2": "temp",
        "template:judge@seed=7": "seed",
        fingerprint(req): "exact",
    }
    keys = ["exact", "seed", "temp", "template", "star"]
    for expected in keys:
        backend = mock_backend(script)
        assert complete(backend, req).text == expected
        del script[next(k for k, v in script.items() if v == expected)]
    with pytest.raises(NoScriptEntry):
        complete(mock_backend(script), req)


def test_mock_never_touches_network(no_network):
    gw = mock_gateway(m={"*": "yes"})
    assert gw.complete("m", _req()).text == "yes"
    assert gw.call_counts == {"m": 1}
    assert no_network == []


class FakeResponse:
    def __init__(self, status, payload=None, text=""):
        self.status_code = status
        self._payload = payload
        self.text = text

    def json(self):
        return self._payload


class FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers, "timeout": timeout})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


OK = FakeResponse(200, {"choices": [{"message": {"content": "hello"}}], "usage": {"prompt_tokens": 3}})


def http_backend(**kw):
    return BackendConfig(kind="http_chat", endpoint="http://example.invalid/v1", **kw)


def test_http_retries_then_succeeds(monkeypatch):
    monkeypatch.setenv("TEST_KEY", "secret")
    sleeps = []
    session = FakeSession([requests.ConnectionError("down"), FakeResponse(503, text="busy"), OK])
    backend = http_backend(auth_env="TEST_KEY", retry=RetryPolicy(3, (0.5, 1.0)))
    out = complete(backend, _req(seed=4), session=session, sleep=sleeps.append)
    assert out.text == "hello"
    assert sleeps == [0.5, 1.0]
    call = session.calls[0]
    assert call["url"] == "http://example.invalid/v1/chat/completions"
    assert call["headers"]["Authorization"] == "Bearer secret"
    assert call["json"]["seed"] == 4 and call["json"]["model"] == "judge"


def test_http_gives_up_and_does_not_retry_client_errors():
    session = FakeSession([FakeResponse(500, text="x")] * 3)
    with pytest.raises(TransportError) as info:
        complete(http_backend(retry=RetryPolicy(3, (0.0,))), _req(), session=session, sleep=lambda s: None)
    assert info.value.attempts == 3
    session = FakeSession([FakeResponse(400, text="bad")])
    with pytest.raises(TransportError) as info:
        complete(http_backend(), _req(), session=session, sleep=lambda s: None)
    assert info.value.attempts == 1 and info.value.status == 400


def test_auth_missing(monkeypatch):
    monkeypatch.delenv("ABSENT_KEY", raising=False)
    with pytest.raises(AuthMissing):
        complete(http_backend(auth_env="ABSENT_KEY"), _req(), session=FakeSession([]), sleep=lambda s: None)


def test_backend_config_rejects_inline_credentials_and_bad_kinds():
    with pytest.raises(ConfigError):
        BackendConfig.from_dict({"kind": "http_chat", "endpoint": "http://x", "api_key": "k"})
    with pytest.raises(ConfigError):
        BackendConfig(kind="carrier_pigeon")
    with pytest.raises(ConfigError):
        Gateway({}).complete("missing", _req())


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest("m", (("user", "x"),), temperature=-1)
    with pytest.raises(ValueError):
        CompletionRequest("m", (("user", "x"),), max_tokens=0)
