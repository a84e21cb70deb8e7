"""Dataset factory: complexity filter, text and metadata synthesis, human review
round-trip, preference pairs, splits and corpus statistics."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import statistics
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from .codegen import is_yes
from .evalsuite import tokenize
from .gateway import Gateway, prompt_request
from .metadata import (
    MetadataDoc,
    MetadataError,
    extract_numbers,
    find_numbers,
    parse_metadata,
    serialize_metadata,
    validate,
)
from .metagen import GeneratorConfig
from .prompts import TemplateId

logger = logging.getLogger(__name__)

__all__ = [
    "CHECKLIST",
    "DatasetRecord",
    "DatasetStats",
    "InvalidEditedMetadata",
    "LeakCheckExhausted",
    "MetadataSynthesisFailed",
    "PairDiscarded",
    "PreferenceRecord",
    "REVIEW_SCHEMA_VERSION",
    "Review",
    "ReviewImport",
    "SchemaVersionMismatch",
    "SourceRecord",
    "TABLE2_LABELS",
    "UnparseableJudgeReply",
    "UnreviewedTrainingRecord",
    "assign_splits",
    "build_preference_pairs",
    "check_training_ready",
    "classify_complexity",
    "count_sentences",
    "diff_metadata",
    "dataset_stats",
    "metadata_field_text",
    "read_jsonl",
    "review_export",
    "review_import",
    "scan_leaks",
    "stat_coverage",
    "synthesize_metadata",
    "synthesize_text",
    "write_jsonl_atomic",
]

REVIEW_SCHEMA_VERSION = 1

# One boolean per item of the annotation guideline.
CHECKLIST = ("subchart_count", "subchart_types", "axes", "statistics", "positions")
STATUSES = ("unreviewed", "verified", "corrected", "rejected")
SPLITS = ("train", "val", "test")


class CurationError(RuntimeError):
    pass


class LeakCheckExhausted(CurationError):
    def __init__(self, record_id: str, hits: list[list[str]]):
        self.record_id = record_id
        self.hits = hits
        super().__init__(f"record {record_id}: every attempt leaked ({hits[-1] if hits else []})")


class MetadataSynthesisFailed(CurationError):
    def __init__(self, record_id: str, detail: str, raw_text: str = ""):
        self.record_id = record_id
        self.raw_text = raw_text
        super().__init__(f"record {record_id}: {detail}")


class SchemaVersionMismatch(CurationError):
    def __init__(self, found: Any, line: int):
        self.found = found
        super().__init__(f"line {line}: review schema_version {found!r}, expected {REVIEW_SCHEMA_VERSION}")


class InvalidEditedMetadata(CurationError):
    def __init__(self, record_id: str, errors: list[str]):
        self.record_id = record_id
        self.errors = list(errors)
        super().__init__(f"record {record_id}: " + "; ".join(self.errors))


class PairDiscarded(CurationError):
    pass


class UnparseableJudgeReply(PairDiscarded):
    pass


class UnreviewedTrainingRecord(CurationError):
    pass


# --------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class SourceRecord:
    id: str
    image_ref: str
    provenance: str = ""

    def __post_init__(self) -> None:
        if not self.image_ref:
            raise ValueError(f"source {self.id}: image_ref must be non-empty")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SourceRecord:
        return cls(str(data["id"]), str(data.get("image_ref", "")), str(data.get("provenance", "")))


@dataclass(frozen=True)
class Review:
    status: str = "unreviewed"
    checklist: tuple[tuple[str, bool], ...] = tuple((k, False) for k in CHECKLIST)
    note: str = ""

    def items(self) -> dict[str, bool]:
        return dict(self.checklist)

    def problems(self) -> list[str]:
        out = []
        if self.status not in STATUSES:
            out.append(f"unknown review status {self.status!r}")
        items = self.items()
        missing = [k for k in CHECKLIST if k not in items]
        if missing:
            out.append(f"checklist items missing: {missing}")
        if self.status in ("verified", "corrected"):
            false = [k for k in CHECKLIST if not items.get(k, False)]
            if false:
                out.append(f"status {self.status} requires every checklist item true; false: {false}")
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status, "checklist": self.items(), "note": self.note}

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> Review:
        data = data or {}
        checklist = data.get("checklist") or {}
        return cls(
            status=str(data.get("status", "unreviewed")),
            checklist=tuple((k, bool(checklist.get(k, False))) for k in CHECKLIST),
            note=str(data.get("note", "")),
        )


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    input_text: str
    metadata: MetadataDoc
    review: Review = Review()
    split: str | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        out = {
            "id": self.id,
            "input_text": self.input_text,
            "metadata": self.metadata.to_dict(),
            "split": self.split,
            "review": self.review.to_dict(),
        }
        if self.flags:
            out["flags"] = list(self.flags)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DatasetRecord:
        meta = data["metadata"]
        doc = parse_metadata(meta) if isinstance(meta, str) else MetadataDoc.from_dict(meta)
        return cls(
            id=str(data["id"]),
            input_text=str(data.get("input_text", "")),
            metadata=doc,
            review=Review.from_dict(data.get("review")),
            split=data.get("split"),
            flags=tuple(data.get("flags") or ()),
        )


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def write_jsonl_atomic(path: str | Path, rows: Iterable[dict[str, Any]]) -> None:
    """Write JSONL to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# complexity filter


def classify_complexity(
    record: SourceRecord, *, gateway: Gateway, backend: str, model_id: str = "classifier", examples: str = ""
) -> bool:
    """True when the model answers yes.  Replies that are neither yes nor no count as not complex."""
    bindings = {"source": f"Infographic: {record.image_ref}"}
    if examples:
        bindings["examples"] = examples
    request = prompt_request(
        TemplateId.COMPLEXITY_FILTER, bindings, model_id=model_id, temperature=0.0, image_ref=record.image_ref
    )
    reply = gateway.complete(backend, request).text
    if is_yes(reply):
        return True
    if not re.match(r"^[\W_]*no\b", reply, re.I):
        logger.warning("record %s: unreadable complexity reply %r treated as not complex", record.id, reply[:80])
    return False


# --------------------------------------------------------------------------
# input text synthesis

_LEAK_PATTERNS = (
    ("chart word", re.compile(r"\b(?:sub-?)?charts?\b", re.I)),
    ("image word", re.compile(r"\bimages?\b", re.I)),
    ("section word", re.compile(r"\bsections?\b", re.I)),
    ("chart kind", re.compile(
        r"\b(?:bar|bars|pie|pies|histograms?|donut|doughnut|scatter\s*plots?|line\s+graphs?|line\s+plots?|"
        r"area\s+plots?|stacked|graphs?|plots?|infographics?|diagrams?|panels?)\b", re.I)),
    ("subchart count", re.compile(
        r"\b(?:\d+|one|two|three|four|five|six|seven|eight|nine|ten|several|multiple)\s+(?:sub-?)?"
        r"(?:charts?|sections?|panels?|graphs?|parts?|figures?)\b", re.I)),
    ("source attribution", re.compile(r"\bsources?\b|\bpew\b|\bsurvey\s+(?:conducted|by)\b", re.I)),
)


def scan_leaks(text: str) -> list[str]:
    """Banned terms found in ``text`` (empty list means the text is clean)."""
    hits = []
    for name, pattern in _LEAK_PATTERNS:
        for m in pattern.finditer(text or ""):
            hits.append(f"{name}: {m.group(0)}")
    return hits


def stat_coverage(text: str, doc: MetadataDoc) -> float:
    """Share of the distinct metadata numbers that appear in ``text``."""
    wanted = {round(v, 9) for v in extract_numbers(doc)}
    if not wanted:
        return 1.0
    present = {round(v, 9) for v, _ in find_numbers(text)}
    return len(wanted & present) / len(wanted)


@dataclass(frozen=True)
class SynthesizedText:
    text: str
    attempts: int
    rejected_hits: tuple[tuple[str, ...], ...] = ()
    coverage: float | None = None


def synthesize_text(
    record: SourceRecord,
    metadata: MetadataDoc | None = None,
    *,
    gateway: Gateway,
    backend: str,
    model_id: str = "describer",
    examples: str = "",
    max_attempts: int = 3,
    temperature: float = 0.7,
) -> SynthesizedText:
    """Describe the source in plain prose, retrying while the reply leaks banned terms."""
    bindings = {}
    if examples:
        bindings["examples"] = examples
    if metadata is not None:
        bindings["source"] = "Chart content:\n" + serialize_metadata(metadata)
    rejected: list[list[str]] = []
    for attempt in range(1, max_attempts + 1):
        request = prompt_request(
            TemplateId.TEXT_SYNTHESIS, bindings, model_id=model_id, temperature=temperature,
            seed=attempt, image_ref=record.image_ref,
        )
        text = gateway.complete(backend, request).text
        hits = scan_leaks(text)
        if not hits:
            coverage = stat_coverage(text, metadata) if metadata is not None else None
            return SynthesizedText(text, attempt, tuple(tuple(h) for h in rejected), coverage)
        logger.info("record %s attempt %d leaked: %s", record.id, attempt, hits)
        rejected.append(hits)
    raise LeakCheckExhausted(record.id, rejected)


# --------------------------------------------------------------------------
# metadata synthesis


def synthesize_metadata(
    record: SourceRecord, *, gateway: Gateway, backend: str, model_id: str = "annotator", examples: str = ""
) -> MetadataDoc:
    """Draft metadata for a source.  Unparseable replies raise MetadataSynthesisFailed."""
    bindings = {"source": record.image_ref}
    if examples:
        bindings["examples"] = examples
    request = prompt_request(
        TemplateId.METADATA_SYNTHESIS, bindings, model_id=model_id, temperature=0.0, image_ref=record.image_ref
    )
    reply = gateway.complete(backend, request).text
    try:
        return parse_metadata(reply)
    except MetadataError as exc:
        raise MetadataSynthesisFailed(record.id, f"{type(exc).__name__}: {exc}", reply) from exc


# --------------------------------------------------------------------------
# human review round-trip


def review_export(records: Iterable[DatasetRecord], path: str | Path) -> int:
    rows = []
    for rec in records:
        row = rec.to_dict()
        row["schema_version"] = REVIEW_SCHEMA_VERSION
        row["original_metadata"] = rec.metadata.to_dict()
        rows.append(row)
    write_jsonl_atomic(path, rows)
    return len(rows)


def _field_values(doc: MetadataDoc) -> dict[str, str | None]:
    out: dict[str, str | None] = {"title": doc.title, "summary": doc.summary}
    for i, sub in enumerate(doc.subcharts, start=1):
        for key, value in sub.raw_fields().items():
            out[f"subchart_{i}.{key}"] = value
    return out


def diff_metadata(before: MetadataDoc, after: MetadataDoc) -> list[str]:
    """Field paths whose raw value differs between two documents, in document order."""
    a, b = _field_values(before), _field_values(after)
    paths = list(a) + [p for p in b if p not in a]
    return [p for p in paths if a.get(p) != b.get(p)]


@dataclass
class ReviewImport:
    records: list[DatasetRecord]
    diffs: dict[str, list[str]] = field(default_factory=dict)

    @property
    def changed(self) -> dict[str, list[str]]:
        return {k: v for k, v in self.diffs.items() if v}


def review_import(path: str | Path) -> ReviewImport:
    """Load a reviewed export, validating edits and the checklist/status rule."""
    records, diffs = [], {}
    for n, row in enumerate(read_jsonl(path), start=1):
        if row.get("schema_version") != REVIEW_SCHEMA_VERSION:
            raise SchemaVersionMismatch(row.get("schema_version"), n)
        rid = str(row.get("id"))
        try:
            edited = MetadataDoc.from_dict(row["metadata"])
            original = MetadataDoc.from_dict(row.get("original_metadata") or row["metadata"])
        except (MetadataError, KeyError, TypeError, AttributeError) as exc:
            raise InvalidEditedMetadata(rid, [f"metadata does not parse: {exc}"]) from exc
        report = validate(edited)
        errors = [f"{i.path}: {i.code}" for i in report.errors]
        review = Review.from_dict(row.get("review"))
        errors.extend(review.problems())
        split = row.get("split")
        if split is not None and split not in SPLITS:
            errors.append(f"unknown split {split!r}")
        if errors:
            raise InvalidEditedMetadata(rid, errors)
        records.append(DatasetRecord(rid, str(row.get("input_text", "")), edited, review, split, tuple(row.get("flags") or ())))
        diffs[rid] = diff_metadata(original, edited)
    return ReviewImport(records, diffs)


# --------------------------------------------------------------------------
# preference pairs


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PreferenceRecord:
    prompt_text: str
    chosen: str
    rejected: str
    judge_model: str
    temperatures: tuple[float, float]  # (source of chosen, source of rejected)
    order: str  # which temperature was shown as Option 1: "low_first" or "high_first"
    generation_hashes: tuple[tuple[str, str], ...]  # (temperature, sha256 of output)
    judge_reply: str = ""

    def verify(self) -> bool:
        """Chosen and rejected both hash to a recorded generation output, and differ."""
        hashes = {h for _, h in self.generation_hashes}
        return self.chosen != self.rejected and _sha(self.chosen) in hashes and _sha(self.rejected) in hashes

    def to_dict(self) -> dict[str, Any]:
        return {
            "prompt": self.prompt_text,
            "chosen": self.chosen,
            "rejected": self.rejected,
            "judge_model": self.judge_model,
            "temperatures": {"chosen": self.temperatures[0], "rejected": self.temperatures[1]},
            "order": self.order,
            "generation_hashes": {t: h for t, h in self.generation_hashes},
            "judge_reply": self.judge_reply,
        }


def _judge_choice(reply: str) -> int | None:
    m = re.match(r"^[\W_]*option\s*#?\s*([12])\b", reply or "", re.I)
    if m:
        return int(m.group(1))
    named = set(re.findall(r"\boption\s*#?\s*([12])\b", reply or "", re.I))
    if len(named) == 1:
        return int(named.pop())
    m = re.match(r"^[\W_]*([12])[\W_]*$", reply or "")
    return int(m.group(1)) if m else None


def build_preference_pairs(
    input_text: str,
    generator: GeneratorConfig,
    t_low: float,
    t_high: float,
    judge_backend: str,
    *,
    gateway: Gateway,
    judge_model: str = "judge",
    rng: random.Random | None = None,
) -> PreferenceRecord:
    """Generate at two temperatures, let the judge pick, and return (chosen, rejected).

    The option order shown to the judge is randomized and recorded.  Raises
    PairDiscarded for identical or unparseable generations and
    UnparseableJudgeReply when the judge names no option.
    """
    if t_low == t_high:
        raise ValueError("t_low and t_high must differ")
    rng = rng or random.Random(0)
    outputs = {}
    for t in (t_low, t_high):
        request = prompt_request(
            generator.template_id, {"source": input_text}, model_id=generator.model_id, temperature=t,
            max_tokens=generator.max_tokens,
        )
        outputs[t] = gateway.complete(generator.backend, request).text
    low, high = outputs[t_low], outputs[t_high]
    if low.strip() == high.strip():
        raise PairDiscarded("both generations are identical")
    for t, text in outputs.items():
        try:
            parse_metadata(text)
        except MetadataError as exc:
            raise PairDiscarded(f"generation at temperature {t:g} does not parse: {exc}") from exc
    swap = rng.random() < 0.5
    shown = [(t_high, high), (t_low, low)] if swap else [(t_low, low), (t_high, high)]
    bindings = {"metadata1": shown[0][1], "metadata2": shown[1][1], "input_text": input_text}
    request = prompt_request(TemplateId.PREFERENCE_JUDGE, bindings, model_id=judge_model, temperature=0.0)
    reply = gateway.complete(judge_backend, request).text
    choice = _judge_choice(reply)
    if choice is None:
        raise UnparseableJudgeReply(f"judge reply names no option: {reply[:80]!r}")
    (t_w, chosen), (t_l, rejected) = shown[choice - 1], shown[2 - choice]
    return PreferenceRecord(
        prompt_text=input_text,
        chosen=chosen,
        rejected=rejected,
        judge_model=judge_model,
        temperatures=(t_w, t_l),
        order="high_first" if swap else "low_first",
        generation_hashes=((f"{t_low:g}", _sha(low)), (f"{t_high:g}", _sha(high))),
        judge_reply=reply,
    )


# --------------------------------------------------------------------------
# splits


def assign_splits(records: Iterable[DatasetRecord], seed: int = 0, ratios: tuple[int, int, int] = (80, 5, 15)) -> list[DatasetRecord]:
    """Deterministic train/val/test assignment from a hash of (seed, record id)."""
    total = sum(ratios)
    out = []
    for rec in records:
        bucket = int(hashlib.sha256(f"{seed}:{rec.id}".encode()).hexdigest(), 16) % total
        split = "train" if bucket < ratios[0] else "val" if bucket < ratios[0] + ratios[1] else "test"
        out.append(replace(rec, split=split))
    return out


def check_training_ready(records: Iterable[DatasetRecord], strict: bool = True) -> list[str]:
    """Ids of train records still unreviewed; in strict mode any such record is an error."""
    bad = [r.id for r in records if r.split == "train" and r.review.status in ("unreviewed", "rejected")]
    if bad and strict:
        raise UnreviewedTrainingRecord(f"train split holds unreviewed or rejected records: {bad}")
    return bad


# --------------------------------------------------------------------------
# statistics

TABLE2_LABELS = (
    ("n_records", "# of data points"),
    ("avg_words_metadata", "Avg. # of words in metadata"),
    ("median_words_metadata", "Median # of words in metadata"),
    ("avg_words_input", "Avg. # of words in input text"),
    ("median_words_input", "Median # of words in input text"),
    ("avg_sentences_metadata", "Avg. # of sentences in metadata"),
    ("avg_sentences_input", "Avg. # of sentences in input text"),
    ("avg_subcharts", "Avg. # of sub-charts in each metadata"),
    ("median_subcharts", "Median # of sub-charts in each metadata"),
    ("max_subcharts", "Maximum # of sub-charts in each metadata"),
    ("min_subcharts", "Minimum # of sub-charts in each metadata"),
)

_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)")


def count_sentences(text: str) -> int:
    """Pieces left after splitting on terminal punctuation followed by space or end."""
    return sum(1 for piece in _SENTENCE_END.split(text or "") if piece.strip())


def metadata_field_text(doc: MetadataDoc) -> list[str]:
    """The free-text values a metadata document is made of (keys excluded)."""
    return [v for v in _field_values(doc).values() if v]


@dataclass(frozen=True)
class DatasetStats:
    n_records: int
    avg_words_metadata: float
    median_words_metadata: float
    avg_words_input: float
    median_words_input: float
    avg_sentences_metadata: float
    avg_sentences_input: float
    avg_subcharts: float
    median_subcharts: float
    max_subcharts: int
    min_subcharts: int

    def to_dict(self) -> dict[str, Any]:
        return {key: getattr(self, key) for key, _ in TABLE2_LABELS}

    def labelled(self) -> dict[str, Any]:
        return {label: getattr(self, key) for key, label in TABLE2_LABELS}

    def format_table(self) -> str:
        width = max(len(label) for _, label in TABLE2_LABELS)
        lines = [f"{'Statistical Parameters'.ljust(width)}  Value"]
        for key, label in TABLE2_LABELS:
            value = getattr(self, key)
            shown = f"{value:,}" if isinstance(value, int) else f"{value:.3f}".rstrip("0").rstrip(".")
            lines.append(f"{label.ljust(width)}  {shown}")
        return "\n".join(lines) + "\n"


def dataset_stats(records: Iterable[DatasetRecord]) -> DatasetStats:
    records = list(records)
    if not records:
        raise ValueError("dataset_stats needs at least one record")
    meta_words = [sum(len(tokenize(v)) for v in metadata_field_text(r.metadata)) for r in records]
    input_words = [len(tokenize(r.input_text)) for r in records]
    meta_sents = [sum(count_sentences(v) for v in metadata_field_text(r.metadata)) for r in records]
    input_sents = [count_sentences(r.input_text) for r in records]
    subcharts = [len(r.metadata.subcharts) for r in records]
    return DatasetStats(
        n_records=len(records),
        avg_words_metadata=statistics.fmean(meta_words),
        median_words_metadata=statistics.median(meta_words),
        avg_words_input=statistics.fmean(input_words),
        median_words_input=statistics.median(input_words),
        avg_sentences_metadata=statistics.fmean(meta_sents),
        avg_sentences_input=statistics.fmean(input_sents),
        avg_subcharts=statistics.fmean(subcharts),
        median_subcharts=statistics.median(subcharts),
        max_subcharts=max(subcharts),
        min_subcharts=min(subcharts),
    )
