"""Automatic metrics comparing generated metadata against gold metadata.

Corpus values are macro means over pairs (the pooled micro variants are
reported alongside); RSE is a single root-mean-square over all pairs.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .metadata import ChartKind, MetadataDoc, Subchart, extract_numbers

__all__ = [
    "EvalPair",
    "MetricsReport",
    "TABLE_COLUMNS",
    "count_exact_match",
    "evaluate_corpus",
    "format_table",
    "lcs_length",
    "rouge_l",
    "rse",
    "statistical_accuracy",
    "subchart_count_accuracy",
    "subchart_summary_rouge",
    "subchart_type_accuracy",
    "tokenize",
]

NUMERIC_TOLERANCE = 1e-9

TABLE_COLUMNS = (
    ("subchart_accuracy", "Subchart Accuracy"),
    ("rse", "RSE"),
    ("title_rouge_l", "Title Rouge-L"),
    ("summary_rouge_l", "Summary Rouge-L"),
    ("subchart_type_accuracy", "Subchart Type Accuracy"),
    ("subchart_summary_rouge_l", "Subchart Summary Rouge-L"),
    ("statistical_accuracy", "Statistical Accuracy"),
)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation at token edges."""
    tokens = []
    for raw in (text or "").lower().split():
        token = raw.strip(string.punctuation + "“”‘’…")
        if token:
            tokens.append(token)
    return tokens


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str, variant: str = "recall") -> float:
    """LCS length over reference length (``variant="f1"`` gives the F-measure)."""
    cand, ref = tokenize(candidate), tokenize(reference)
    if not ref:
        return 1.0 if not cand else 0.0
    lcs = lcs_length(cand, ref)
    if variant == "recall":
        return lcs / len(ref)
    if variant == "f1":
        if lcs == 0:
            return 0.0
        precision, recall = lcs / len(cand), lcs / len(ref)
        return 2 * precision * recall / (precision + recall)
    raise ValueError(f"unknown ROUGE-L variant {variant!r}")


def subchart_summary_rouge(pred: MetadataDoc, gold: MetadataDoc, mode: str = "max", variant: str = "recall") -> float:
    """Best ROUGE-L over every (generated, gold) subchart summary pair.

    ``mode="mean_best"`` instead averages, over gold subcharts, the best score
    any generated summary achieves against it.
    """
    if not pred.subcharts or not gold.subcharts:
        return 0.0
    if mode == "max":
        return max(rouge_l(p.summary, g.summary, variant) for p in pred.subcharts for g in gold.subcharts)
    if mode == "mean_best":
        return sum(max(rouge_l(p.summary, g.summary, variant) for p in pred.subcharts) for g in gold.subcharts) / len(
            gold.subcharts
        )
    raise ValueError(f"unknown subchart summary mode {mode!r}")


@dataclass
class EvalPair:
    id: str
    gold: MetadataDoc
    pred: MetadataDoc
    pred_unparseable: bool = False

    @classmethod
    def unparseable(cls, id: str, gold: MetadataDoc) -> EvalPair:
        return cls(id, gold, MetadataDoc("", "", ()), pred_unparseable=True)


def _kind_key(sub: Subchart) -> str:
    kind = sub.kind
    return kind.value if kind is not ChartKind.UNKNOWN else "unknown:" + sub.kind_raw.strip().lower()


def _subchart_correct(pred: Subchart, gold: Subchart) -> bool:
    return _kind_key(pred) == _kind_key(gold) and pred.alignment == gold.alignment


def pair_subchart_accuracy(pair: EvalPair) -> float:
    gold = pair.gold.subcharts
    if not gold:
        return 1.0 if not pair.pred.subcharts else 0.0
    correct = sum(_subchart_correct(p, g) for p, g in zip(pair.pred.subcharts, gold))
    return correct / len(gold)


def pair_type_accuracy(pair: EvalPair) -> float:
    gold = Counter(_kind_key(s) for s in pair.gold.subcharts)
    if not gold:
        return 1.0 if not pair.pred.subcharts else 0.0
    pred = Counter(_kind_key(s) for s in pair.pred.subcharts)
    return sum((pred & gold).values()) / sum(gold.values())


def matched_numbers(pred: list[float], gold: list[float], matching: str = "merge") -> int:
    """Count correct data points between two ascending lists.

    ``merge`` walks both sorted lists together, advancing past the smaller
    value on a mismatch; ``positional`` compares index by index.
    """
    if matching == "positional":
        return sum(abs(p - g) <= NUMERIC_TOLERANCE for p, g in zip(pred, gold))
    if matching != "merge":
        raise ValueError(f"unknown number matching {matching!r}")
    i = j = correct = 0
    while i < len(pred) and j < len(gold):
        if abs(pred[i] - gold[j]) <= NUMERIC_TOLERANCE:
            correct += 1
            i += 1
            j += 1
        elif pred[i] < gold[j]:
            i += 1
        else:
            j += 1
    return correct


def pair_statistical_accuracy(pair: EvalPair, matching: str = "merge") -> float:
    gold = extract_numbers(pair.gold)
    pred = extract_numbers(pair.pred)
    if not gold:
        return 1.0 if not pred else 0.0
    return matched_numbers(pred, gold, matching) / len(gold)


def subchart_count_accuracy(pairs: Sequence[EvalPair]) -> float:
    return 100.0 * _mean(pair_subchart_accuracy(p) for p in pairs)


def subchart_type_accuracy(pairs: Sequence[EvalPair]) -> float:
    return 100.0 * _mean(pair_type_accuracy(p) for p in pairs)


def statistical_accuracy(pairs: Sequence[EvalPair], matching: str = "merge") -> float:
    return 100.0 * _mean(pair_statistical_accuracy(p, matching) for p in pairs)


def count_exact_match(pairs: Sequence[EvalPair]) -> float:
    """Percentage of pairs whose predicted subchart count equals the gold count."""
    return 100.0 * _mean(float(len(p.pred.subcharts) == len(p.gold.subcharts)) for p in pairs)


def rse(pairs: Sequence[EvalPair]) -> float:
    if not pairs:
        raise ValueError("rse needs at least one pair")
    sq = [(len(p.pred.subcharts) - len(p.gold.subcharts)) ** 2 for p in pairs]
    return math.sqrt(sum(sq) / len(sq))


def _mean(values) -> float:
    values = list(values)
    if not values:
        raise ValueError("metric needs at least one pair")
    return sum(values) / len(values)


@dataclass
class PairScores:
    id: str
    subchart_accuracy: float
    subchart_type_accuracy: float
    statistical_accuracy: float
    title_rouge_l: float
    summary_rouge_l: float
    subchart_summary_rouge_l: float
    pred_subcharts: int
    gold_subcharts: int
    flags: list[str] = field(default_factory=list)


@dataclass
class MetricsReport:
    subchart_accuracy: float
    rse: float
    title_rouge_l: float
    summary_rouge_l: float
    subchart_type_accuracy: float
    subchart_summary_rouge_l: float
    statistical_accuracy: float
    n_pairs: int
    count_exact_match: float
    micro: dict[str, float]
    options: dict[str, str]
    per_pair: list[PairScores]

    def headline(self) -> dict[str, float]:
        return {key: getattr(self, key) for key, _ in TABLE_COLUMNS}

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_corpus(
    pairs: Sequence[EvalPair],
    *,
    rouge_variant: str = "recall",
    subchart_summary_mode: str = "max",
    number_matching: str = "merge",
) -> MetricsReport:
    if not pairs:
        raise ValueError("evaluate_corpus needs at least one pair")
    per_pair = []
    for pair in pairs:
        flags = []
        if pair.pred_unparseable:
            flags.append("pred_unparseable")
        if not pair.pred.subcharts or not pair.gold.subcharts:
            flags.append("no_subcharts")
        if not extract_numbers(pair.gold):
            flags.append("gold_has_no_numbers")
        per_pair.append(
            PairScores(
                id=pair.id,
                subchart_accuracy=100.0 * pair_subchart_accuracy(pair),
                subchart_type_accuracy=100.0 * pair_type_accuracy(pair),
                statistical_accuracy=100.0 * pair_statistical_accuracy(pair, number_matching),
                title_rouge_l=rouge_l(pair.pred.title, pair.gold.title, rouge_variant),
                summary_rouge_l=rouge_l(pair.pred.summary, pair.gold.summary, rouge_variant),
                subchart_summary_rouge_l=subchart_summary_rouge(
                    pair.pred, pair.gold, subchart_summary_mode, rouge_variant
                ),
                pred_subcharts=len(pair.pred.subcharts),
                gold_subcharts=len(pair.gold.subcharts),
                flags=flags,
            )
        )

    def mean(attr: str) -> float:
        return _mean(getattr(s, attr) for s in per_pair)

    gold_total = sum(len(p.gold.subcharts) for p in pairs)
    gold_numbers = sum(len(extract_numbers(p.gold)) for p in pairs)
    micro = {
        "subchart_accuracy": 100.0
        * sum(sum(_subchart_correct(a, b) for a, b in zip(p.pred.subcharts, p.gold.subcharts)) for p in pairs)
        / max(gold_total, 1),
        "subchart_type_accuracy": 100.0
        * sum(
            sum((Counter(map(_kind_key, p.pred.subcharts)) & Counter(map(_kind_key, p.gold.subcharts))).values())
            for p in pairs
        )
        / max(gold_total, 1),
        "statistical_accuracy": 100.0
        * sum(matched_numbers(extract_numbers(p.pred), extract_numbers(p.gold), number_matching) for p in pairs)
        / max(gold_numbers, 1),
    }
    return MetricsReport(
        subchart_accuracy=mean("subchart_accuracy"),
        rse=rse(pairs),
        title_rouge_l=mean("title_rouge_l"),
        summary_rouge_l=mean("summary_rouge_l"),
        subchart_type_accuracy=mean("subchart_type_accuracy"),
        subchart_summary_rouge_l=mean("subchart_summary_rouge_l"),
        statistical_accuracy=mean("statistical_accuracy"),
        n_pairs=len(pairs),
        count_exact_match=count_exact_match(pairs),
        micro=micro,
        options={
            "rouge_variant": rouge_variant,
            "subchart_summary_mode": subchart_summary_mode,
            "number_matching": number_matching,
        },
        per_pair=per_pair,
    )


def format_table(report: MetricsReport, label: str = "run") -> str:
    headers = ["Model Configuration"] + [name for _, name in TABLE_COLUMNS]
    row = [label]
    for key, _ in TABLE_COLUMNS:
        value = getattr(report, key)
        row.append(f"{value:.2f}")
    widths = [max(len(h), len(c)) for h, c in zip(headers, row)]
    line = "| " + " | ".join(h.ljust(w) for h, w in zip(headers, widths)) + " |"
    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    body = "| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |"
    return "\n".join([line, sep, body]) + "\n"

