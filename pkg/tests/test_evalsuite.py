from __future__ import annotations

import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docgen import a6_docs, make_doc, subchart_fields
from infochart.evalsuite import (
    EvalPair,
    evaluate_corpus,
    format_table,
    lcs_length,
    matched_numbers,
    rouge_l,
    rse,
    tokenize,
)
from infochart.metadata import MetadataDoc


def brute_lcs(a, b):
    """Longest subsequence of ``a`` that is also a subsequence of ``b``, by enumeration."""

    def is_subseq(seq, of):
        it = iter(of)
        return all(x in it for x in seq)

    for k in range(len(a), 0, -1):
        for idx in itertools.combinations(range(len(a)), k):
            if is_subseq([a[i] for i in idx], b):
                return k
    return 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from("abcd"), max_size=8), st.lists(st.sampled_from("abcd"), max_size=8))
def test_lcs_matches_brute_force(a, b):
    assert lcs_length(a, b) == brute_lcs(a, b)


def test_rouge_l_recall_and_f1():
    assert rouge_l("the cat sat", "the cat sat on the mat") == pytest.approx(3 / 6)
    # precision 3/3, recall 3/6
    assert rouge_l("the cat sat", "the cat sat on the mat", "f1") == pytest.approx(2 * 1 * 0.5 / 1.5)
    assert rouge_l("", "") == 1.0
    assert rouge_l("x", "") == 0.0
    assert tokenize("Hello, World! U.S. (adults)") == ["hello", "world", "u.s", "adults"]


def test_rse_two_pairs():
    gold2 = make_doc([subchart_fields("bar", {"a": 1}, "h")] * 2)
    pred3 = make_doc([subchart_fields("bar", {"a": 1}, "h")] * 3)
    pairs = [EvalPair("1", gold2, gold2), EvalPair("2", gold2, pred3)]
    # sqrt(((2-2)^2 + (3-2)^2) / 2)
    assert rse(pairs) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_merge_walk_versus_positional():
    gold = [10.0, 20.0, 30.0]
    pred = [5.0, 10.0, 20.0, 30.0]
    assert matched_numbers(pred, gold) == 3
    assert matched_numbers(pred, gold, "positional") == 0


def _doc(kinds_and_stats, summaries=None, title="Title words here", summary="Summary words here"):
    subs = []
    for i, (kind, stats) in enumerate(kinds_and_stats):
        s = summaries[i] if summaries else f"sub {i}"
        subs.append(subchart_fields(kind, stats, f"h{i}", summary=s))
    return make_doc(subs, title=title, summary=summary)


def test_spreadsheet_oracle_two_pairs():
    # Pair A: gold [bar, pie], pred [bar, line]; gold numbers 1,2,3,4; pred 1,2,3,9
    gold_a = _doc([("bar chart", {"x": 1, "y": 2}), ("pie chart", {"x": 3, "y": 4})],
                  summaries=["alpha beta", "gamma delta"], title="big red dog", summary="one two three four")
    pred_a = _doc([("bar chart", {"x": 1, "y": 2}), ("line chart", {"x": 3, "y": 9})],
                  summaries=["alpha", "delta gamma"], title="big dog", summary="one three")
    # Pair B: identical single subchart
    gold_b = _doc([("bar chart", {"x": 5})], summaries=["same words"])
    pairs = [EvalPair("a", gold_a, pred_a), EvalPair("b", gold_b, gold_b)]
    report = evaluate_corpus(pairs)
    # Hand computation:
    # subchart accuracy: A = 1/2 (bar ok, line != pie), B = 1 -> mean 75
    assert report.subchart_accuracy == pytest.approx(75.0)
    # type accuracy: multiset {bar,line} & {bar,pie} = 1 of 2 -> 50; B 100 -> 75
    assert report.subchart_type_accuracy == pytest.approx(75.0)
    # stats: A 3 of 4 gold matched; B 1 of 1 -> (75 + 100)/2
    assert report.statistical_accuracy == pytest.approx(87.5)
    # title: "big dog" vs "big red dog" LCS 2/3 ; B 1 -> (2/3+1)/2
    assert report.title_rouge_l == pytest.approx((2 / 3 + 1) / 2)
    # summary: "one three" vs "one two three four" 2/4 ; B 1
    assert report.summary_rouge_l == pytest.approx(0.75)
    # subchart summary (max over pairs): A max(alpha vs alpha beta = 1/2, delta gamma vs gamma delta = 1/2) = 0.5
    assert report.subchart_summary_rouge_l == pytest.approx(0.75)
    assert report.rse == 0.0
    assert report.count_exact_match == 100.0
    # micro stats: 4 matched of 5 gold numbers
    assert report.micro["statistical_accuracy"] == pytest.approx(80.0)


def test_unparseable_prediction_scores_zero():
    gold = a6_docs()["a6_example_1"]
    report = evaluate_corpus([EvalPair.unparseable("x", gold)])
    assert report.subchart_accuracy == 0.0
    assert report.statistical_accuracy == 0.0
    assert report.rse == 3.0
    assert "pred_unparseable" in report.per_pair[0].flags


def test_empty_gold_numbers():
    gold = make_doc([subchart_fields("bar", {}, "h")])
    assert evaluate_corpus([EvalPair("e", gold, gold)]).statistical_accuracy == 100.0


def test_table_layout():
    gold = a6_docs()["a6_example_2"]
    table = format_table(evaluate_corpus([EvalPair("1", gold, gold)]), "oracle")
    header, sep, row = table.splitlines()
    assert header.startswith("| Model Configuration")
    assert "Statistical Accuracy" in header
    assert row.split("|")[1].strip() == "oracle"
    assert "100.00" in row and "0.00" in row


def test_variant_options_are_recorded():
    gold = a6_docs()["a6_example_1"]
    report = evaluate_corpus([EvalPair("1", gold, gold)], rouge_variant="f1", subchart_summary_mode="mean_best",
                             number_matching="positional")
    assert report.options == {"rouge_variant": "f1", "subchart_summary_mode": "mean_best",
                              "number_matching": "positional"}
    assert report.statistical_accuracy == 100.0


def test_removing_one_number_costs_one_over_g():
    rng = random.Random(3)
    for _ in range(20):
        values = {f"k{j}": rng.randint(0, 99) for j in range(rng.randint(2, 8))}
        gold = _doc([("bar chart", values)])
        drop = rng.choice(list(values))
        pred = _doc([("bar chart", {k: v for k, v in values.items() if k != drop})])
        full = evaluate_corpus([EvalPair("p", gold, gold)]).statistical_accuracy
        less = evaluate_corpus([EvalPair("p", gold, pred)]).statistical_accuracy
        assert full - less == pytest.approx(100.0 / len(values), abs=1e-9)


def test_empty_corpus_is_rejected():
    with pytest.raises(ValueError):
        evaluate_corpus([])
    with pytest.raises(ValueError):
        rouge_l("a", "b", "bleu")
    assert isinstance(MetadataDoc("", "", ()), MetadataDoc)
