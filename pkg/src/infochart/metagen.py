"""Text -> metadata stage: several generators, a heuristic prefilter and a ranker."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from .gateway import AllBackendsFailed, ConfigError, Gateway, GatewayError, TransportError, prompt_request
from .metadata import (
    ChartKind,
    MetadataDoc,
    MetadataError,
    ValidationReport,
    find_numbers,
    parse_metadata,
    serialize_metadata,
    validate,
)
from .prompts import TemplateId

logger = logging.getLogger(__name__)

__all__ = [
    "CandidateMetadata",
    "GeneratorConfig",
    "HeuristicWeights",
    "NoViableCandidate",
    "RankDecision",
    "StageAudit",
    "StageConfig",
    "generate_candidates",
    "generate_metadata",
    "heuristic_prefilter",
    "parse_ranker_reply",
    "rank",
]


class NoViableCandidate(MetadataError):
    """No candidate produced a parseable metadata document."""


@dataclass(frozen=True)
class GeneratorConfig:
    backend: str
    model_id: str
    temperature: float = 0.5
    template_id: str = TemplateId.METADATA_SYNTHESIS.value
    label: str = ""
    max_tokens: int = 1000

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError("generator temperature must be >= 0")
        if not self.label:
            object.__setattr__(self, "label", f"{self.model_id}@{self.temperature:g}")


@dataclass(frozen=True)
class HeuristicWeights:
    parse: float = 0.4
    known_kinds: float = 0.2
    stats_present: float = 0.2
    grounded: float = 0.2

    def __post_init__(self) -> None:
        values = (self.parse, self.known_kinds, self.stats_present, self.grounded)
        if any(v < 0 for v in values) or sum(values) <= 0:
            raise ConfigError("heuristic weights must be >= 0 with a positive sum")


@dataclass
class CandidateMetadata:
    label: str
    raw_text: str
    doc: MetadataDoc | None = None
    validation: ValidationReport | None = None
    heuristic_score: float = 0.0
    error: str | None = None
    signals: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "raw_text": self.raw_text,
            "parsed": self.doc is not None,
            "error": self.error,
            "validation": self.validation.to_dict() if self.validation else None,
            "signals": dict(self.signals),
            "heuristic_score": round(self.heuristic_score, 9),
        }


@dataclass(frozen=True)
class RankDecision:
    chosen_index: int
    method: str  # "llm_ranker" or "heuristic_fallback"
    rationale_text: str | None = None
    presented: tuple[int, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "chosen_index": self.chosen_index,
            "method": self.method,
            "rationale_text": self.rationale_text,
            "presented": list(self.presented),
        }


def _candidate_from_text(label: str, text: str) -> CandidateMetadata:
    try:
        doc = parse_metadata(text)
    except MetadataError as exc:
        return CandidateMetadata(label, text, error=f"{type(exc).__name__}: {exc}")
    return CandidateMetadata(label, text, doc, validate(doc))


def generate_candidates(
    input_text: str,
    configs: list[GeneratorConfig],
    gateway: Gateway,
    *,
    examples: str = "",
    seed: int | None = None,
) -> list[CandidateMetadata]:
    """One candidate per generator config, in config order.

    A failed call still yields a candidate (with ``error`` set); only when
    every call fails in transport is AllBackendsFailed raised.
    """
    if not configs:
        raise ConfigError("at least one generator is required")

    def run(cfg: GeneratorConfig) -> CandidateMetadata:
        bindings = {"source": input_text}
        if examples:
            bindings["examples"] = examples
        request = prompt_request(
            cfg.template_id, bindings, model_id=cfg.model_id, temperature=cfg.temperature, max_tokens=cfg.max_tokens, seed=seed
        )
        try:
            reply = gateway.complete(cfg.backend, request)
        except GatewayError as exc:
            logger.warning("generator %s failed: %s", cfg.label, exc)
            cand = CandidateMetadata(cfg.label, "", error=f"{type(exc).__name__}: {exc}")
            cand.signals["transport_failed"] = isinstance(exc, TransportError)
            return cand
        return _candidate_from_text(cfg.label, reply.text)

    if len(configs) == 1:
        candidates = [run(configs[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(configs)) as pool:
            candidates = list(pool.map(run, configs))
    failures = [c for c in candidates if c.signals.get("transport_failed")]
    if len(failures) == len(candidates):
        raise AllBackendsFailed([f"{c.label}: {c.error}" for c in failures])
    return candidates


def _grounded(doc: MetadataDoc, input_text: str) -> bool:
    available = {round(v, 9) for v, _ in find_numbers(input_text)}
    values = [v for s in doc.subcharts for v in s.stats.numbers()]
    return bool(values) and all(round(v, 9) in available for v in values)


def heuristic_prefilter(
    candidates: list[CandidateMetadata], input_text: str, weights: HeuristicWeights | None = None
) -> list[CandidateMetadata]:
    """Score every candidate in place (normalized weighted sum in [0, 1]) and return them."""
    w = weights or HeuristicWeights()
    total = w.parse + w.known_kinds + w.stats_present + w.grounded
    for cand in candidates:
        doc = cand.doc
        signals = {
            "parse": doc is not None and bool(doc.subcharts),
            "known_kinds": doc is not None
            and bool(doc.subcharts)
            and all(s.kind is not ChartKind.UNKNOWN for s in doc.subcharts),
            "stats_present": doc is not None and bool(doc.subcharts) and all(s.stats.numbers() for s in doc.subcharts),
            "grounded": doc is not None and _grounded(doc, input_text),
        }
        cand.signals.update(signals)
        score = (
            w.parse * signals["parse"]
            + w.known_kinds * signals["known_kinds"]
            + w.stats_present * signals["stats_present"]
            + w.grounded * signals["grounded"]
        )
        cand.heuristic_score = score / total
    return candidates


_OPTION = re.compile(r"\boption\s*#?\s*([1-3])\b", re.I)


def parse_ranker_reply(reply: str, options: list[MetadataDoc | None]) -> int | None:
    """Zero-based option slot named by the reply, or None when it cannot be read.

    Accepted forms: a reply that opens with "Option N", a reply naming exactly
    one option number, or a JSON object equal to one of the presented options.
    """
    text = (reply or "").strip()
    m = re.match(r"^[\W_]*option\s*#?\s*([1-3])\b", text, re.I)
    slot = None
    if m:
        slot = int(m.group(1)) - 1
    else:
        named = {int(x) for x in _OPTION.findall(text)}
        if len(named) == 1:
            slot = named.pop() - 1
    if slot is not None:
        return slot if slot < len(options) and options[slot] is not None else None
    try:
        doc = parse_metadata(text)
    except MetadataError:
        return None
    for i, option in enumerate(options):
        if option is not None and option == doc:
            return i
    return None


def _heuristic_choice(candidates: list[CandidateMetadata]) -> int:
    viable = [i for i, c in enumerate(candidates) if c.doc is not None]
    return max(viable, key=lambda i: (candidates[i].heuristic_score, -i))


def rank(
    input_text: str,
    candidates: list[CandidateMetadata],
    *,
    gateway: Gateway | None = None,
    ranker_backend: str | None = None,
    ranker_model: str = "ranker",
) -> RankDecision:
    """Pick a candidate: the model ranker when configured and readable, else heuristic argmax."""
    if not candidates:
        raise NoViableCandidate("no candidates")
    viable = [i for i, c in enumerate(candidates) if c.doc is not None]
    if not viable:
        raise NoViableCandidate("no candidate produced parseable metadata")
    presented = tuple(sorted(viable, key=lambda i: (-candidates[i].heuristic_score, i))[:3])
    if gateway is None or not ranker_backend:
        return RankDecision(_heuristic_choice(candidates), "heuristic_fallback", "no ranker configured", presented)
    bindings = {"input_text": input_text}
    options: list[MetadataDoc | None] = []
    for slot in range(3):
        if slot < len(presented):
            doc = candidates[presented[slot]].doc
            bindings[f"option_{slot + 1}"] = serialize_metadata(doc)
            options.append(doc)
        else:
            bindings[f"option_{slot + 1}"] = "(no option)"
            options.append(None)
    request = prompt_request(TemplateId.RANKER, bindings, model_id=ranker_model, temperature=0.0)
    try:
        reply = gateway.complete(ranker_backend, request).text
    except GatewayError as exc:
        return RankDecision(_heuristic_choice(candidates), "heuristic_fallback", f"ranker call failed: {exc}", presented)
    slot = parse_ranker_reply(reply, options)
    if slot is None:
        return RankDecision(_heuristic_choice(candidates), "heuristic_fallback", reply, presented)
    return RankDecision(presented[slot], "llm_ranker", reply, presented)


@dataclass(frozen=True)
class StageConfig:
    generators: tuple[GeneratorConfig, ...]
    ranker_backend: str | None = None
    ranker_model: str = "ranker"
    weights: HeuristicWeights = HeuristicWeights()
    examples: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise ConfigError("stage config names no generators")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> StageConfig:
        gens = []
        for g in data.get("generators") or []:
            gens.append(
                GeneratorConfig(
                    backend=g["backend"],
                    model_id=g.get("model", g.get("model_id", "generator")),
                    temperature=float(g.get("temperature", 0.5)),
                    template_id=g.get("template", TemplateId.METADATA_SYNTHESIS.value),
                    label=g.get("label", ""),
                    max_tokens=int(g.get("max_tokens", 1000)),
                )
            )
        ranker = data.get("ranker") or {}
        return cls(
            generators=tuple(gens),
            ranker_backend=ranker.get("backend"),
            ranker_model=ranker.get("model", "ranker"),
            weights=HeuristicWeights(**(data.get("weights") or {})),
            examples=data.get("examples", ""),
        )


@dataclass
class StageAudit:
    candidates: list[CandidateMetadata]
    decision: RankDecision

    def to_dict(self) -> dict[str, Any]:
        return {"candidates": [c.to_dict() for c in self.candidates], "decision": self.decision.to_dict()}


def generate_metadata(
    input_text: str, config: StageConfig, gateway: Gateway, *, seed: int | None = None
) -> tuple[MetadataDoc, StageAudit]:
    """Generate, score and rank candidates; the result is always one of the candidates."""
    candidates = generate_candidates(input_text, list(config.generators), gateway, examples=config.examples, seed=seed)
    heuristic_prefilter(candidates, input_text, config.weights)
    decision = rank(
        input_text, candidates, gateway=gateway, ranker_backend=config.ranker_backend, ranker_model=config.ranker_model
    )
    doc = candidates[decision.chosen_index].doc
    assert doc is not None
    return doc, StageAudit(candidates, decision)
