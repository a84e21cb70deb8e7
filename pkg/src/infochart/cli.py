"""``infochart`` command line.

Exit codes: 0 success, 2 configuration or input errors, 3 pipeline failures
(per-document failures are listed in the manifest and processing continues).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import yaml

from . import __version__
from .chart import IRError, InfeasibleLayout, compile_metadata, layout, render_svg
from .codegen import CoderFailed, run_loop
from .config import AppConfig, load_config
from .curation import (
    DatasetRecord,
    InvalidEditedMetadata,
    LeakCheckExhausted,
    MetadataSynthesisFailed,
    PairDiscarded,
    SchemaVersionMismatch,
    SourceRecord,
    UnreviewedTrainingRecord,
    assign_splits,
    build_preference_pairs,
    check_training_ready,
    classify_complexity,
    dataset_stats,
    read_jsonl,
    review_export,
    review_import,
    synthesize_metadata,
    synthesize_text,
    write_jsonl_atomic,
)
from .evalsuite import EvalPair, evaluate_corpus, format_table
from .gateway import ConfigError, GatewayError
from .metadata import MetadataDoc, MetadataError, parse_metadata, serialize_metadata, validate
from .metagen import GeneratorConfig, NoViableCandidate, generate_metadata

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PIPELINE = 3


class UsageError(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def derive_seed(root: int, doc_id: str) -> int:
    """Per-document seed from the root seed by stable hashing."""
    return int(hashlib.sha256(f"{root}:{doc_id}".encode("utf-8")).hexdigest()[:8], 16)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


class Manifest:
    """One manifest per command, written beside its outputs."""

    def __init__(self, command: str, config: AppConfig | None, seed: int | None):
        self.data: dict[str, Any] = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "config": config.resolved() if config else None,
            "inputs": [],
            "outputs": [],
            "failures": [],
            "timestamps": {"started": _now()},
        }

    def add_input(self, path: Path | str) -> None:
        self.data["inputs"].append(str(path))

    def add_output(self, path: Path | str) -> None:
        self.data["outputs"].append(str(path))

    def fail(self, item: str, error: str) -> None:
        self.data["failures"].append({"id": item, "error": error})

    def write(self, path: Path, call_counts: dict[str, int] | None = None, extra: dict | None = None) -> None:
        self.data["gateway_calls"] = dict(sorted((call_counts or {}).items()))
        self.data["timestamps"]["finished"] = _now()
        # outputs are stored relative to the manifest so output trees can be compared or moved
        base = path.parent.resolve()
        outputs = []
        for out in self.data["outputs"]:
            resolved = Path(out).resolve()
            outputs.append(resolved.relative_to(base).as_posix() if resolved.is_relative_to(base) else str(out))
        self.data["outputs"] = sorted(outputs)
        if extra:
            self.data.update(extra)
        _write(path, _dump(self.data))


# --------------------------------------------------------------------------
# generate


def _load_inputs(args) -> list[tuple[str, str]]:
    if bool(args.input) == bool(args.corpus):
        raise UsageError("give exactly one of --input or --corpus")
    if args.input:
        path = Path(args.input)
        return [(path.stem, path.read_text(encoding="utf-8"))]
    docs = []
    for row in read_jsonl(args.corpus):
        if "id" not in row or "input_text" not in row:
            raise UsageError("corpus rows need id and input_text")
        docs.append((str(row["id"]), str(row["input_text"])))
    ids = [d for d, _ in docs]
    if len(set(ids)) != len(ids):
        raise UsageError("corpus ids must be unique")
    return docs


def cmd_generate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.jobs is not None:
        config.jobs = max(1, args.jobs)
    if args.print_config:
        sys.stdout.write(yaml.safe_dump(config.resolved(), sort_keys=True))
        return EXIT_OK
    if args.out is None:
        raise UsageError("--out is required")
    if config.metagen is None:
        raise ConfigError("config has no metagen section")
    for g in config.metagen.generators:
        config.require_backend(g.backend, "generator")
    docs = _load_inputs(args)
    out = Path(args.out)
    gateway = config.gateway()
    manifest = Manifest("generate", config, config.seed)
    manifest.add_input(args.input or args.corpus)

    def process(item: tuple[str, str]) -> tuple[str, list[Path], str | None]:
        doc_id, text = item
        seed = derive_seed(config.seed, doc_id)
        try:
            doc, stage = generate_metadata(text, config.metagen, gateway, seed=seed)
            ir, loop_audit = run_loop(doc, config.loop, gateway=gateway)
            svg = render_svg(layout(ir), ir)
        except (GatewayError, MetadataError, IRError, InfeasibleLayout, NoViableCandidate, CoderFailed) as exc:
            return doc_id, [], f"{type(exc).__name__}: {exc}"
        target = out / doc_id
        files = {
            "doc.json": serialize_metadata(doc),
            "ir.json": ir.to_json(),
            "out.svg": svg,
            "audit.json": _dump({"id": doc_id, "seed": seed, "metagen": stage.to_dict(), "loop": loop_audit.to_dict()}),
        }
        paths = []
        for name, content in files.items():
            _write(target / name, content)
            paths.append(target / name)
        return doc_id, paths, None

    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        results = list(pool.map(process, docs))
    for doc_id, paths, error in results:
        for p in paths:
            manifest.add_output(p)
        if error:
            manifest.fail(doc_id, error)
            print(f"FAILED {doc_id}: {error}", file=sys.stderr)
    manifest.write(out / "manifest.json", gateway.call_counts)
    ok = sum(1 for _, _, e in results if e is None)
    print(f"generated {ok}/{len(results)} document(s) into {out}")
    return EXIT_PIPELINE if ok < len(results) else EXIT_OK


# --------------------------------------------------------------------------
# render


def cmd_render(args) -> int:
    path = Path(args.metadata)
    try:
        doc = parse_metadata(path.read_text(encoding="utf-8"))
    except MetadataError as exc:
        print(f"error: {path}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = validate(doc)
    if not report.is_valid:
        print(report.format(), file=sys.stderr)
        return EXIT_CONFIG
    try:
        ir = compile_metadata(doc)
        svg = render_svg(layout(ir), ir)
    except (IRError, InfeasibleLayout) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    out = Path(args.out)
    manifest = Manifest("render", None, None)
    manifest.add_input(path)
    _write(out, svg)
    manifest.add_output(out)
    if args.ir_out:
        _write(Path(args.ir_out), ir.to_json())
        manifest.add_output(args.ir_out)
    manifest.write(out.with_name(out.name + ".manifest.json"))
    print(f"rendered {len(ir.panels)} panel(s) to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# eval


def _doc_or_none(value: Any) -> MetadataDoc | None:
    try:
        if isinstance(value, dict):
            return MetadataDoc.from_dict(value)
        return parse_metadata(str(value))
    except (MetadataError, TypeError, AttributeError):
        return None


def _pairs_from_files(args) -> list[EvalPair]:
    if args.pairs:
        rows = read_jsonl(args.pairs)
        gold_rows = {str(r["id"]): r["gold"] for r in rows}
        pred_rows = {str(r["id"]): r.get("pred") for r in rows}
    else:
        if not (args.pred and args.gold):
            raise UsageError("give --pairs, or both --pred and --gold")
        gold_rows = {str(r["id"]): r.get("metadata", r.get("gold")) for r in read_jsonl(args.gold)}
        pred_rows = {str(r["id"]): r.get("metadata", r.get("pred")) for r in read_jsonl(args.pred)}
        diff = sorted(set(gold_rows) ^ set(pred_rows))
        if diff:
            raise UsageError(f"id mismatch between pred and gold: {diff}")
    pairs = []
    for rid in sorted(gold_rows):
        gold = _doc_or_none(gold_rows[rid])
        if gold is None:
            raise UsageError(f"gold metadata for {rid} does not parse")
        pred = _doc_or_none(pred_rows[rid]) if pred_rows[rid] is not None else None
        pairs.append(EvalPair(rid, gold, pred) if pred is not None else EvalPair.unparseable(rid, gold))
    return pairs


def cmd_eval(args) -> int:
    pairs = _pairs_from_files(args)
    if not pairs:
        raise UsageError("no pairs to evaluate")
    report = evaluate_corpus(
        pairs,
        rouge_variant=args.rouge_variant,
        subchart_summary_mode=args.subchart_summary_mode,
        number_matching=args.number_matching,
    )
    table = format_table(report, args.label)
    out = Path(args.out)
    manifest = Manifest("eval", None, None)
    for p in (args.pairs, args.pred, args.gold):
        if p:
            manifest.add_input(p)
    _write(out, _dump(report.to_dict()))
    manifest.add_output(out)
    table_path = out.with_suffix(".md")
    _write(table_path, table)
    manifest.add_output(table_path)
    if args.rating_sheet:
        sheet = Path(args.rating_sheet)
        sheet.parent.mkdir(parents=True, exist_ok=True)
        with open(sheet, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "readability", "visual_appeal", "alignment", "notes"])
            for pair in pairs:
                writer.writerow([pair.id, "", "", "", ""])
        manifest.add_output(sheet)
    manifest.write(out.with_name(out.name + ".manifest.json"))
    sys.stdout.write(table)
    return EXIT_OK


# --------------------------------------------------------------------------
# curate


def _sources(path: str) -> list[SourceRecord]:
    try:
        return [SourceRecord.from_dict(r) for r in read_jsonl(path)]
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad source records in {path}: {exc}") from exc


def _records(path: str) -> list[DatasetRecord]:
    try:
        return [DatasetRecord.from_dict(r) for r in read_jsonl(path)]
    except (KeyError, ValueError, MetadataError) as exc:
        raise UsageError(f"bad dataset records in {path}: {exc}") from exc


def _finish(manifest: Manifest, out: Path, gateway=None, extra: dict | None = None) -> None:
    manifest.add_output(out)
    manifest.write(out.with_name(out.name + ".manifest.json"), gateway.call_counts if gateway else None, extra)


def cmd_curate(args) -> int:
    config = load_config(getattr(args, "config", None))
    cur = config.curation
    manifest = Manifest(f"curate {args.sub}", config, config.seed)
    out = Path(args.out) if getattr(args, "out", None) else None
    sub = args.sub

    if sub == "filter":
        gateway = config.gateway()
        backend = config.require_backend(cur.backend, "curation")
        manifest.add_input(args.sources)
        kept = []
        for src in _sources(args.sources):
            if classify_complexity(src, gateway=gateway, backend=backend, model_id=cur.model, examples=cur.examples):
                kept.append({"id": src.id, "image_ref": src.image_ref, "provenance": src.provenance})
        write_jsonl_atomic(out, kept)
        _finish(manifest, out, gateway, {"kept": len(kept)})
        print(f"kept {len(kept)} complex source(s)")
        return EXIT_OK

    if sub == "synth-meta":
        gateway = config.gateway()
        backend = config.require_backend(cur.backend, "curation")
        manifest.add_input(args.sources)
        rows = []
        for src in _sources(args.sources):
            try:
                doc = synthesize_metadata(src, gateway=gateway, backend=backend, model_id=cur.model, examples=cur.examples)
            except MetadataSynthesisFailed as exc:
                manifest.fail(src.id, str(exc))
                continue
            rows.append(DatasetRecord(src.id, "", doc).to_dict())
        write_jsonl_atomic(out, rows)
        _finish(manifest, out, gateway)
        print(f"drafted {len(rows)} metadata record(s), {len(manifest.data['failures'])} flagged")
        return EXIT_PIPELINE if manifest.data["failures"] else EXIT_OK

    if sub == "synth-text":
        gateway = config.gateway()
        backend = config.require_backend(cur.backend, "curation")
        manifest.add_input(args.drafts)
        manifest.add_input(args.sources)
        sources = {s.id: s for s in _sources(args.sources)}
        rows = []
        for rec in _records(args.drafts):
            src = sources.get(rec.id)
            if src is None:
                manifest.fail(rec.id, "no source record")
                continue
            try:
                result = synthesize_text(
                    src, rec.metadata, gateway=gateway, backend=backend, model_id=cur.model,
                    examples=cur.examples, max_attempts=cur.max_leak_attempts,
                )
            except LeakCheckExhausted as exc:
                manifest.fail(rec.id, str(exc))
                rows.append(DatasetRecord(rec.id, rec.input_text, rec.metadata, rec.review, rec.split,
                                          rec.flags + ("leak_check_exhausted",)).to_dict())
                continue
            rows.append(DatasetRecord(rec.id, result.text, rec.metadata, rec.review, rec.split, rec.flags).to_dict())
        write_jsonl_atomic(out, rows)
        _finish(manifest, out, gateway)
        return EXIT_PIPELINE if manifest.data["failures"] else EXIT_OK

    if sub == "export-review":
        manifest.add_input(args.records)
        n = review_export(_records(args.records), out)
        _finish(manifest, out)
        print(f"exported {n} record(s) for review")
        return EXIT_OK

    if sub == "import-review":
        manifest.add_input(args.review)
        try:
            result = review_import(args.review)
        except (SchemaVersionMismatch, InvalidEditedMetadata) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        write_jsonl_atomic(out, [r.to_dict() for r in result.records])
        _finish(manifest, out, extra={"diffs": result.changed})
        for rid, paths in result.changed.items():
            print(f"{rid}: {', '.join(paths)}")
        print(f"imported {len(result.records)} record(s), {len(result.changed)} changed")
        return EXIT_OK

    if sub == "prefs":
        gateway = config.gateway()
        if config.metagen is None:
            raise ConfigError("prefs needs a metagen generator")
        generator: GeneratorConfig = config.metagen.generators[0]
        judge = config.require_backend(cur.judge_backend, "curation judge")
        seed = config.seed if args.seed is None else args.seed
        rng = random.Random(seed)
        manifest.add_input(args.records)
        rows = []
        for rec in _records(args.records):
            try:
                pair = build_preference_pairs(
                    rec.input_text, generator, cur.t_low, cur.t_high, judge,
                    gateway=gateway, judge_model=cur.judge_model, rng=rng,
                )
            except PairDiscarded as exc:
                logger.info("pair for %s discarded: %s", rec.id, exc)
                manifest.fail(rec.id, f"discarded: {exc}")
                continue
            rows.append({"id": rec.id, **pair.to_dict()})
        write_jsonl_atomic(out, rows)
        _finish(manifest, out, gateway, {"pairs": len(rows)})
        print(f"wrote {len(rows)} preference pair(s)")
        return EXIT_OK

    if sub == "stats":
        manifest.add_input(args.records)
        stats = dataset_stats(_records(args.records))
        sys.stdout.write(stats.format_table())
        if out:
            _write(out, _dump(stats.labelled()))
            _finish(manifest, out)
        return EXIT_OK

    if sub == "split":
        manifest.add_input(args.records)
        seed = cur.split_seed if args.seed is None else args.seed
        records = assign_splits(_records(args.records), seed=seed)
        try:
            check_training_ready(records, strict=args.strict if args.strict is not None else cur.strict)
        except UnreviewedTrainingRecord as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PIPELINE
        write_jsonl_atomic(out, [r.to_dict() for r in records])
        counts = {s: sum(r.split == s for r in records) for s in ("train", "val", "test")}
        _finish(manifest, out, extra={"split_counts": counts})
        print(" ".join(f"{k}={v}" for k, v in counts.items()))
        return EXIT_OK

    raise UsageError(f"unknown curate subcommand {sub!r}")


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infochart", description="Text to statistical infographic pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="text -> metadata -> chart program -> SVG")
    g.add_argument("--input", help="one input text file")
    g.add_argument("--corpus", help="JSONL of {id, input_text}")
    g.add_argument("--config", help="YAML config file")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int, help="root seed (overrides config)")
    g.add_argument("--jobs", type=int, help="worker count (overrides config)")
    g.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("render", help="metadata file -> SVG, no model calls")
    r.add_argument("--metadata", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--ir-out", help="also write the compiled chart program")
    r.set_defaults(func=cmd_render)

    e = sub.add_parser("eval", help="score predicted metadata against gold")
    e.add_argument("--pred", help="JSONL of {id, metadata}")
    e.add_argument("--gold", help="JSONL of {id, metadata}")
    e.add_argument("--pairs", help="JSONL of {id, gold, pred} (alternative to --pred/--gold)")
    e.add_argument("--out", required=True, help="report JSON path (table written beside it as .md)")
    e.add_argument("--label", default="run", help="row label in the table")
    e.add_argument("--rouge-variant", choices=("recall", "f1"), default="recall")
    e.add_argument("--subchart-summary-mode", choices=("max", "mean_best"), default="max")
    e.add_argument("--number-matching", choices=("merge", "positional"), default="merge")
    e.add_argument("--rating-sheet", help="write a blank human rating CSV here")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("curate", help="dataset curation tools")
    csub = c.add_subparsers(dest="sub", required=True)

    def add(name: str, help_: str, *flags: tuple[str, dict]) -> None:
        p = csub.add_parser(name, help=help_)
        for flag, kw in flags:
            p.add_argument(flag, **kw)
        p.set_defaults(func=cmd_curate)

    req = {"required": True}
    add("filter", "keep complex infographics", ("--sources", req), ("--config", req), ("--out", req))
    add("synth-meta", "draft metadata per source", ("--sources", req), ("--config", req), ("--out", req))
    add("synth-text", "write leak-free input text per draft", ("--drafts", req), ("--sources", req),
        ("--config", req), ("--out", req))
    add("export-review", "export records for human review", ("--records", req), ("--out", req))
    add("import-review", "import reviewed records", ("--review", req), ("--out", req))
    add("prefs", "build preference pairs", ("--records", req), ("--config", req), ("--out", req),
        ("--seed", {"type": int}))
    add("stats", "dataset statistics", ("--records", req), ("--out", {}))
    add("split", "assign train/val/test splits", ("--records", req), ("--out", req), ("--config", {}),
        ("--seed", {"type": int}), ("--strict", {"action": argparse.BooleanOptionalAction, "default": None}))
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GatewayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    raise SystemExit(main())
