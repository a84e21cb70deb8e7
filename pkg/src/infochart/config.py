"""YAML run configuration.

Top-level keys::

    seed: int                      # root seed, per-document seeds derive from it
    limits: {max_in_flight: int, jobs: int}
    backends: {name: {kind, endpoint, auth_env, retry, timeout, script | script_file}}
    metagen: {generators: [{backend, model, temperature, label}], ranker: {backend, model},
              weights: {parse, known_kinds, stats_present, grounded}, examples: str}
    loop: {max_iterations, coder_mode, judge_mode, allow_deterministic_fallback,
           coder_backend, coder_model, judge_backend, judge_model}
    curation: {backend, model, judge_backend, judge_model, t_low, t_high,
               max_leak_attempts, strict, split_seed, examples}

Credentials never appear here; ``auth_env`` names the environment variable.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .codegen import LoopConfig
from .gateway import BackendConfig, ConfigError, Gateway
from .metagen import StageConfig

__all__ = ["AppConfig", "CurationConfig", "load_config"]

TOP_LEVEL_KEYS = {"seed", "limits", "backends", "metagen", "loop", "curation"}


@dataclass(frozen=True)
class CurationConfig:
    backend: str | None = None
    model: str = "annotator"
    judge_backend: str | None = None
    judge_model: str = "judge"
    t_low: float = 0.2
    t_high: float = 0.9
    max_leak_attempts: int = 3
    strict: bool = True
    split_seed: int = 0
    examples: str = ""

    def __post_init__(self) -> None:
        if self.t_low == self.t_high:
            raise ConfigError("curation.t_low and curation.t_high must differ")
        if self.max_leak_attempts < 1:
            raise ConfigError("curation.max_leak_attempts must be >= 1")


@dataclass
class AppConfig:
    raw: dict[str, Any]
    backends: dict[str, BackendConfig]
    seed: int = 0
    max_in_flight: int = 4
    jobs: int = 1
    metagen: StageConfig | None = None
    loop: LoopConfig = field(default_factory=LoopConfig)
    curation: CurationConfig = field(default_factory=CurationConfig)

    def gateway(self) -> Gateway:
        return Gateway(self.backends, max_in_flight=self.max_in_flight)

    def require_backend(self, name: str | None, what: str) -> str:
        if not name:
            raise ConfigError(f"{what} backend is not configured")
        if name not in self.backends:
            raise ConfigError(f"{what} backend {name!r} is not defined under backends")
        return name

    def resolved(self) -> dict[str, Any]:
        """The effective configuration with defaults filled in (scripts summarized)."""
        backends = {}
        for name, b in sorted(self.backends.items()):
            backends[name] = {
                "kind": b.kind,
                "endpoint": b.endpoint,
                "auth_env": b.auth_env,
                "retry": {"max_attempts": b.retry.max_attempts, "backoff": list(b.retry.backoff)},
                "timeout": b.timeout,
            }
            if b.script is not None:
                backends[name]["script_entries"] = len(b.script)
        out: dict[str, Any] = {
            "seed": self.seed,
            "limits": {"max_in_flight": self.max_in_flight, "jobs": self.jobs},
            "backends": backends,
            "loop": {k: getattr(self.loop, k) for k in self.loop.__dataclass_fields__},
            "curation": {k: getattr(self.curation, k) for k in self.curation.__dataclass_fields__},
        }
        if self.metagen is not None:
            out["metagen"] = {
                "generators": [
                    {"backend": g.backend, "model": g.model_id, "temperature": g.temperature, "label": g.label,
                     "template": g.template_id}
                    for g in self.metagen.generators
                ],
                "ranker": {"backend": self.metagen.ranker_backend, "model": self.metagen.ranker_model},
                "weights": dict(vars(self.metagen.weights)),
            }
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> AppConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(data) - TOP_LEVEL_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            backends = {
                str(name): BackendConfig.from_dict(spec or {}, base_dir)
                for name, spec in (data.get("backends") or {}).items()
            }
            limits = data.get("limits") or {}
            metagen = StageConfig.from_dict(data["metagen"]) if data.get("metagen") else None
            loop = LoopConfig.from_dict(data.get("loop") or {})
            curation = CurationConfig(**(data.get("curation") or {}))
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError, OSError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        config = cls(
            raw=copy.deepcopy(data),
            backends=backends,
            seed=int(data.get("seed", 0)),
            max_in_flight=int(limits.get("max_in_flight", 4)),
            jobs=max(1, int(limits.get("jobs", 1))),
            metagen=metagen,
            loop=loop,
            curation=curation,
        )
        referenced = []
        if metagen is not None:
            referenced += [g.backend for g in metagen.generators]
            if metagen.ranker_backend:
                referenced.append(metagen.ranker_backend)
        if loop.coder_mode == "llm":
            referenced.append(loop.coder_backend)
        if loop.judge_mode != "mechanical":
            referenced.append(loop.judge_backend)
        for name in referenced:
            if name and name not in backends:
                raise ConfigError(f"backend {name!r} is referenced but not defined")
        return config


def load_config(path: str | Path | None) -> AppConfig:
    if path is None:
        return AppConfig.from_dict({})
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return AppConfig.from_dict(data, base_dir=path.parent)
