from __future__ import annotations

import json
import random

import pytest

from docgen import FIXTURES, a6_docs, random_doc, write_generate_setup
from infochart.cli import derive_seed, main
from infochart.curation import CHECKLIST, DatasetRecord, Review, read_jsonl, write_jsonl_atomic
from infochart.metadata import serialize_metadata


def _corpus(n=3, failing=()):
    rng = random.Random(4)
    out = {}
    for i in range(n):
        doc_id = f"doc{i}"
        out[doc_id] = (f"Input text number {i} with 12% and 40%.", None if doc_id in failing else random_doc(rng, 2 + i))
    return out


def test_generate_single_document(tmp_path, no_network):
    corpus = {"one": ("Text about adults.", a6_docs()["a6_example_1"])}
    _, config = write_generate_setup(tmp_path, corpus)
    (tmp_path / "one.txt").write_text("Text about adults.", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["generate", "--input", str(tmp_path / "one.txt"), "--config", str(config), "--out", str(out)]) == 0
    assert (out / "one" / "out.svg").exists()
    audit = json.loads((out / "one" / "audit.json").read_text())
    assert len(audit["loop"]["iterations"]) == 1
    assert audit["loop"]["terminated_by"] == "accepted"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["gateway_calls"] == {"mock": 1}
    assert manifest["outputs"] == [f"one/{f}" for f in ("audit.json", "doc.json", "ir.json", "out.svg")]


def test_generate_partial_failure(tmp_path, no_network):
    corpus_path, config = write_generate_setup(tmp_path, _corpus(3, failing=("doc1",)))
    out = tmp_path / "out"
    code = main(["generate", "--corpus", str(corpus_path), "--config", str(config), "--out", str(out)])
    assert code == 3
    assert sorted(p.parent.name for p in out.glob("*/out.svg")) == ["doc0", "doc2"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert [f["id"] for f in manifest["failures"]] == ["doc1"]
    assert "NoViableCandidate" in manifest["failures"][0]["error"]


def test_generate_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: 1\nmystery: true\n")
    assert main(["generate", "--input", "x.txt", "--config", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text("metagen:\n  generators:\n    - {backend: nowhere, model: m}\n")
    assert main(["generate", "--input", "x.txt", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "nowhere" in capsys.readouterr().err


def test_print_config(tmp_path, capsys):
    _, config = write_generate_setup(tmp_path, _corpus(1))
    assert main(["generate", "--config", str(config), "--print-config", "--seed", "99"]) == 0
    printed = capsys.readouterr().out
    assert "seed: 99" in printed and "script_entries: 1" in printed


def test_seed_derivation_is_stable():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert derive_seed(1, "a") != derive_seed(2, "a")


def test_render(tmp_path, capsys):
    out = tmp_path / "fig.svg"
    assert main(["render", "--metadata", str(FIXTURES / "a6_example_1.txt"), "--out", str(out)]) == 0
    assert out.read_text().count('class="panel"') == 3
    manifest = json.loads((tmp_path / "fig.svg.manifest.json").read_text())
    assert manifest["outputs"] == ["fig.svg"]
    assert main(["render", "--metadata", str(FIXTURES / "a6_example_3.txt"), "--out", str(out)]) == 0
    assert out.read_text().count('class="panel"') == 1


def test_render_invalid_metadata(tmp_path, capsys):
    doc = a6_docs()["a6_example_3"].to_dict()
    doc["subchart_1"]["kind"] = "radar chart"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["render", "--metadata", str(path), "--out", str(tmp_path / "x.svg")]) == 2
    assert "subchart_1.kind: UnknownKind" in capsys.readouterr().err


def _write_meta(path, docs):
    write_jsonl_atomic(path, [{"id": k, "metadata": v.to_dict()} for k, v in docs.items()])


def test_eval_identity_and_mismatch(tmp_path, capsys):
    docs = a6_docs()
    _write_meta(tmp_path / "gold.jsonl", docs)
    _write_meta(tmp_path / "pred.jsonl", docs)
    out = tmp_path / "report.json"
    args = ["eval", "--pred", str(tmp_path / "pred.jsonl"), "--gold", str(tmp_path / "gold.jsonl"), "--out", str(out)]
    assert main(args + ["--rating-sheet", str(tmp_path / "sheet.csv")]) == 0
    report = json.loads(out.read_text())
    assert report["subchart_accuracy"] == 100.0 and report["rse"] == 0.0
    assert "100.00" in capsys.readouterr().out
    assert (tmp_path / "sheet.csv").read_text().count("\n") == 4

    _write_meta(tmp_path / "pred.jsonl", {"a6_example_1": docs["a6_example_1"], "extra": docs["a6_example_2"]})
    assert main(args) == 2
    err = capsys.readouterr().err
    assert "extra" in err and "a6_example_2" in err


def _records_file(path, n=3, status="unreviewed"):
    docs = list(a6_docs().values())
    recs = []
    for i in range(n):
        review = Review(status, tuple((k, status != "unreviewed") for k in CHECKLIST))
        recs.append(DatasetRecord(f"r{i}", f"About {10 + i}% agree. Others disagree.", docs[i % 3], review))
    write_jsonl_atomic(path, [r.to_dict() for r in recs])


def test_curate_stats_and_split(tmp_path, capsys):
    _records_file(tmp_path / "records.jsonl")
    assert main(["curate", "stats", "--records", str(tmp_path / "records.jsonl")]) == 0
    out = capsys.readouterr().out
    assert "Maximum # of sub-charts in each metadata" in out
    split_out = tmp_path / "split.jsonl"
    code = main(["curate", "split", "--records", str(tmp_path / "records.jsonl"), "--out", str(split_out),
                 "--no-strict"])
    assert code == 0 and all(r["split"] for r in read_jsonl(split_out))


def test_curate_import_review_invalid_edit(tmp_path, capsys):
    _records_file(tmp_path / "records.jsonl", 2)
    review = tmp_path / "review.jsonl"
    assert main(["curate", "export-review", "--records", str(tmp_path / "records.jsonl"), "--out", str(review)]) == 0
    rows = read_jsonl(review)
    rows[1]["metadata"]["subchart_1"]["stats"] = "none"
    write_jsonl_atomic(review, rows)
    assert main(["curate", "import-review", "--review", str(review), "--out", str(tmp_path / "in.jsonl")]) == 2
    assert "r1" in capsys.readouterr().err


def test_curate_prefs_with_mocks(tmp_path, no_network):
    _records_file(tmp_path / "records.jsonl", 4)
    low, high = serialize_metadata(a6_docs()["a6_example_1"]), serialize_metadata(a6_docs()["a6_example_2"])
    (tmp_path / "script.json").write_text(json.dumps({
        "template:metadata_synthesis@t=0.2": low,
        "template:metadata_synthesis@t=0.9": high,
        "template:preference_judge": "Option 2",
    }))
    (tmp_path / "c.yaml").write_text(
        "backends:\n  mock: {kind: scripted_mock, script_file: script.json}\n"
        "metagen:\n  generators: [{backend: mock, model: gen}]\n"
        "curation: {judge_backend: mock}\n"
    )
    out = tmp_path / "prefs.jsonl"
    assert main(["curate", "prefs", "--records", str(tmp_path / "records.jsonl"), "--config", str(tmp_path / "c.yaml"),
                 "--out", str(out)]) == 0
    rows = read_jsonl(out)
    assert len(rows) == 4
    assert all({"prompt", "chosen", "rejected", "order", "generation_hashes"} <= set(r) for r in rows)


def test_curate_synth_text_flags_leaky_record(tmp_path):
    sources = tmp_path / "sources.jsonl"
    write_jsonl_atomic(sources, [{"id": "r0", "image_ref": "img/r0.png"}])
    _records_file(tmp_path / "drafts.jsonl", 1)
    (tmp_path / "c.yaml").write_text(
        "backends:\n  mock: {kind: scripted_mock, script: {'*': 'The bar chart shows it.'}}\n"
        "curation: {backend: mock}\n"
    )
    out = tmp_path / "texts.jsonl"
    code = main(["curate", "synth-text", "--drafts", str(tmp_path / "drafts.jsonl"), "--sources", str(sources),
                 "--config", str(tmp_path / "c.yaml"), "--out", str(out)])
    assert code == 3
    assert read_jsonl(out)[0]["flags"] == ["leak_check_exhausted"]


@pytest.mark.parametrize("argv", [["render"], ["curate"], ["bogus"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
