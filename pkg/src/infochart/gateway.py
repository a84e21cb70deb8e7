"""Chat-completion access: an OpenAI-compatible HTTP backend and a scripted mock.

Model identity is plain configuration.  The mock is a pure function of the
request fingerprint, so whole pipeline runs are reproducible without network.

Mock script lookup order: the exact fingerprint, ``template:<id>@seed=<n>``,
``template:<id>@t=<temperature>``, ``template:<id>``, then ``*``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import requests

from .prompts import TemplateId, render_prompt

logger = logging.getLogger(__name__)

__all__ = [
    "AllBackendsFailed",
    "AuthMissing",
    "BackendConfig",
    "Completion",
    "CompletionRequest",
    "ConfigError",
    "Gateway",
    "GatewayError",
    "NoScriptEntry",
    "RetryPolicy",
    "TransportError",
    "complete",
    "fingerprint",
    "prompt_request",
]


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    def __init__(self, detail: str, attempts: int = 1, status: int | None = None):
        self.detail = detail
        self.attempts = attempts
        self.status = status
        super().__init__(f"transport failure after {attempts} attempt(s): {detail}")


class NoScriptEntry(GatewayError):
    def __init__(self, fingerprint: str, template_id: str | None = None):
        self.fingerprint = fingerprint
        self.template_id = template_id
        super().__init__(f"no scripted completion for fingerprint {fingerprint} (template={template_id})")


class AuthMissing(GatewayError):
    def __init__(self, env_var: str):
        self.env_var = env_var
        super().__init__(f"credential environment variable {env_var!r} is not set")


class AllBackendsFailed(GatewayError):
    def __init__(self, details: list[str]):
        self.details = list(details)
        super().__init__("every backend call failed: " + "; ".join(self.details))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.5
    max_tokens: int = 1000
    seed: int | None = None
    template_id: str | None = None
    bindings: tuple[tuple[str, str], ...] | None = None
    image_ref: str | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ValueError(f"temperature must be finite and >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        object.__setattr__(self, "messages", tuple((str(r), str(c)) for r, c in self.messages))


def prompt_request(
    template_id: TemplateId | str,
    bindings: dict[str, str],
    *,
    model_id: str,
    temperature: float = 0.5,
    max_tokens: int = 1000,
    seed: int | None = None,
    image_ref: str | None = None,
) -> CompletionRequest:
    """Render a catalog prompt into a single-user-message request tagged with its template."""
    tid = TemplateId(template_id)
    text = render_prompt(tid, bindings)
    return CompletionRequest(
        model_id=model_id,
        messages=(("user", text),),
        temperature=temperature,
        max_tokens=max_tokens,
        seed=seed,
        template_id=tid.value,
        bindings=tuple(sorted((str(k), str(v)) for k, v in bindings.items())),
        image_ref=image_ref,
    )


def fingerprint(request: CompletionRequest) -> str:
    if request.template_id is not None:
        payload: Any = {
            "template": request.template_id,
            "bindings": [list(pair) for pair in request.bindings or ()],
            "image_ref": request.image_ref,
        }
    else:
        payload = {"messages": [list(m) for m in request.messages], "image_ref": request.image_ref}
    blob = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Completion:
    text: str
    model_id: str
    usage: dict[str, int] = field(default_factory=dict)
    latency_ms: float = 0.0


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff: tuple[float, ...] = (1.0, 2.0, 4.0)

    def delay(self, attempt: int) -> float:
        """Sleep before retry number ``attempt`` (1-based); the schedule's last value repeats."""
        if not self.backoff:
            return 0.0
        return self.backoff[min(attempt - 1, len(self.backoff) - 1)]


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: str | None = None
    auth_env: str | None = None
    retry: RetryPolicy = RetryPolicy()
    timeout: float = 60.0
    script: dict[str, str] | None = None

    def __post_init__(self) -> None:
        if self.kind == "http_chat":
            if not self.endpoint:
                raise ConfigError("http_chat backend requires an endpoint")
        elif self.kind == "scripted_mock":
            if self.script is None:
                raise ConfigError("scripted_mock backend requires a script")
        else:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.retry.max_attempts < 1:
            raise ConfigError("retry.max_attempts must be >= 1")

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> BackendConfig:
        data = dict(data)
        if "api_key" in data or "key" in data:
            raise ConfigError("credentials must not be stored in config; use auth_env")
        script = data.get("script")
        if data.get("script_file"):
            path = Path(data["script_file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            script = json.loads(path.read_text(encoding="utf-8"))
        if script is not None:
            script = {str(k): v if isinstance(v, str) else v["text"] for k, v in script.items()}
        retry = data.get("retry") or {}
        return cls(
            kind=data.get("kind", ""),
            endpoint=data.get("endpoint"),
            auth_env=data.get("auth_env"),
            retry=RetryPolicy(
                max_attempts=int(retry.get("max_attempts", 3)),
                backoff=tuple(float(x) for x in retry.get("backoff", (1.0, 2.0, 4.0))),
            ),
            timeout=float(data.get("timeout", 60.0)),
            script=script,
        )


def _script_keys(request: CompletionRequest, fp: str) -> list[str]:
    keys = [fp]
    if request.template_id is not None:
        if request.seed is not None:
            keys.append(f"template:{request.template_id}@seed={request.seed}")
        keys.append(f"template:{request.template_id}@t={request.temperature:g}")
        keys.append(f"template:{request.template_id}")
    keys.append("*")
    return keys


def _complete_mock(backend: BackendConfig, request: CompletionRequest) -> Completion:
    fp = fingerprint(request)
    script = backend.script or {}
    for key in _script_keys(request, fp):
        if key in script:
            text = script[key]
            prompt_words = sum(len(c.split()) for _, c in request.messages)
            return Completion(
                text=text,
                model_id=request.model_id,
                usage={"prompt_tokens": prompt_words, "completion_tokens": len(text.split())},
                latency_ms=0.0,
            )
    raise NoScriptEntry(fp, request.template_id)


def _payload(request: CompletionRequest) -> dict[str, Any]:
    messages: list[dict[str, Any]] = [{"role": r, "content": c} for r, c in request.messages]
    if request.image_ref:
        last = messages[-1]
        last["content"] = [
            {"type": "text", "text": last["content"]},
            {"type": "image_url", "image_url": {"url": request.image_ref}},
        ]
    payload: dict[str, Any] = {
        "model": request.model_id,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }
    if request.seed is not None:
        payload["seed"] = request.seed
    return payload


def _complete_http(
    backend: BackendConfig,
    request: CompletionRequest,
    session: requests.Session | None,
    sleep: Callable[[float], None],
) -> Completion:
    headers = {"Content-Type": "application/json"}
    if backend.auth_env:
        token = os.environ.get(backend.auth_env)
        if not token:
            raise AuthMissing(backend.auth_env)
        headers["Authorization"] = f"Bearer {token}"
    url = backend.endpoint.rstrip("/")
    if not url.endswith("/chat/completions"):
        url += "/chat/completions"
    http = session or requests.Session()
    payload = _payload(request)
    last_detail = ""
    last_status = None
    attempts = 0
    for attempt in range(1, backend.retry.max_attempts + 1):
        attempts = attempt
        started = time.monotonic()
        try:
            response = http.post(url, json=payload, headers=headers, timeout=backend.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            last_detail, last_status = f"{type(exc).__name__}: {exc}", None
        else:
            if response.status_code == 200:
                data = response.json()
                text = data["choices"][0]["message"]["content"] or ""
                usage = {k: int(v) for k, v in (data.get("usage") or {}).items() if isinstance(v, int)}
                return Completion(text, data.get("model", request.model_id), usage, (time.monotonic() - started) * 1000)
            last_detail, last_status = f"HTTP {response.status_code}: {response.text[:200]}", response.status_code
            if response.status_code < 500 and response.status_code != 429:
                break
        logger.warning("chat completion attempt %d/%d failed: %s", attempt, backend.retry.max_attempts, last_detail)
        if attempt < backend.retry.max_attempts:
            sleep(backend.retry.delay(attempt))
    raise TransportError(last_detail, attempts=attempts, status=last_status)


def complete(
    backend: BackendConfig,
    request: CompletionRequest,
    *,
    session: requests.Session | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Completion:
    """Issue ``request`` against ``backend``.

    Raises TransportError, NoScriptEntry or AuthMissing.
    """
    if backend.kind == "scripted_mock":
        return _complete_mock(backend, request)
    return _complete_http(backend, request, session, sleep)


class Gateway:
    """Named backends plus a global in-flight limit and per-backend call counts."""

    def __init__(self, backends: dict[str, BackendConfig], max_in_flight: int = 4, sleep: Callable[[float], None] = time.sleep):
        self.backends = dict(backends)
        self._limit = threading.BoundedSemaphore(max(1, max_in_flight))
        self._lock = threading.Lock()
        self._sleep = sleep
        self._local = threading.local()
        self.call_counts: dict[str, int] = {name: 0 for name in self.backends}

    def backend(self, name: str) -> BackendConfig:
        try:
            return self.backends[name]
        except KeyError:
            raise ConfigError(f"unknown backend {name!r}") from None

    def complete(self, backend_name: str, request: CompletionRequest) -> Completion:
        backend = self.backend(backend_name)
        with self._lock:
            self.call_counts[backend_name] = self.call_counts.get(backend_name, 0) + 1
        session = None
        if backend.kind == "http_chat":
            session = getattr(self._local, "session", None)
            if session is None:
                session = self._local.session = requests.Session()
        with self._limit:
            return complete(backend, request, session=session, sleep=self._sleep)
