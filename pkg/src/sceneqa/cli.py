"""Pipeline entry point: synth, ingest, augment, generate, balance, split, stats, evaluate."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .augment import augment_corpus
from .balancer import (
    BalanceConfig,
    audit_binary_categories,
    audit_open_categories,
    balance_corpus,
    structure_shares,
)
from .generator import GeneratorConfig, config_hash, generate_corpus
from .graph import (
    SchemaError,
    ValidationError,
    VocabularyError,
    graph_from_json,
    load_corpus,
    save_corpus,
    validate,
)
from .metrics import PredictionSet, score
from .ontology import OntologyError, default_ontology, load_ontology
from .splits import (
    SplitSpec,
    build_indirect_pairing,
    build_novel_composition,
    build_steps_split,
    default_heldout,
    write_split,
)
from .synth import SynthParams, synth_corpus
from .templates import QuestionRecord, default_registry, load_registry

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_STRICT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


class DataError(RuntimeError):
    pass


def _load_ontology(path: str | None):
    return load_ontology(path) if path else default_ontology()


def _load_registry(path: str | None):
    return load_registry(path) if path else default_registry()


def _write_jsonl(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1, sort_keys=True)
        handle.write("\n")


def _read_questions(path: str) -> list[QuestionRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(QuestionRecord.from_json(json.loads(line)))
    return records


def _config_section(args, stage: str) -> dict:
    if not getattr(args, "config", None):
        return {}
    with open(args.config, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    return payload.get(stage, {})


def _merged(args, stage: str, key: str, default):
    """Priority: explicit flag > config file section > default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    section = _config_section(args, stage)
    if key in section:
        return section[key]
    return default


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return args.workers
    return int(os.environ.get("SCENEQA_WORKERS", "1"))


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args) -> int:
    ontology = _load_ontology(args.ontology)
    params = SynthParams(
        ontology,
        frames=_merged(args, "synth", "frames", 6),
        objects_per_frame=_merged(args, "synth", "objects-per-frame", 3),
        actions=_merged(args, "synth", "actions", 4),
        duration=_merged(args, "synth", "duration", 30.0),
    )
    seed = _merged(args, "synth", "seed", 0)
    count = _merged(args, "synth", "count", 20)
    graphs = synth_corpus(count, seed, params)
    out = Path(args.out)
    save_corpus(graphs, out / "graphs")
    _write_json(
        out / "synth_manifest.json",
        {
            "seed": seed,
            "count": count,
            "config_hash": config_hash({"seed": seed, "count": count,
                                        "frames": params.frames,
                                        "objects_per_frame": params.objects_per_frame,
                                        "actions": params.actions,
                                        "duration": params.duration}),
            "videos": [g.video_id for g in graphs],
        },
    )
    print(f"wrote {count} graphs to {out / 'graphs'}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    ontology = _load_ontology(args.ontology)
    source = Path(args.graphs)
    files = sorted(source.glob("*.json")) if source.is_dir() else [source]
    graphs, violation_rows = [], []
    for file in files:
        with open(file, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        documents = payload if isinstance(payload, list) else [payload]
        for document in documents:
            try:
                graphs.append(graph_from_json(document, ontology))
            except (SchemaError, VocabularyError, ValidationError) as exc:
                violation_rows.append(
                    {"file": file.name, "video_id": document.get("video_id"),
                     "error": type(exc).__name__, "detail": str(exc)}
                )
    for graph in graphs:
        for violation in validate(graph, ontology):
            violation_rows.append({"video_id": graph.video_id, **violation.to_json()})
    out = Path(args.out)
    save_corpus(graphs, out / "graphs")
    _write_jsonl(out / "violations.jsonl", violation_rows)
    print(f"ingested {len(graphs)} graphs, {len(violation_rows)} violations")
    if violation_rows and args.strict:
        return EXIT_STRICT
    return EXIT_OK


def cmd_augment(args) -> int:
    ontology = _load_ontology(args.ontology)
    graphs = load_corpus(args.graphs, ontology)
    epsilon = _merged(args, "augment", "epsilon", 0.1)
    augmented, reports = augment_corpus(graphs, ontology, epsilon)
    out = Path(args.out)
    save_corpus(augmented, out / "graphs")
    _write_jsonl(out / "augment_reports.jsonl", [r.to_json() for r in reports])
    sparse = sum(1 for g in augmented if g.sparse_spatial)
    print(f"augmented {len(augmented)} graphs ({sparse} flagged sparse)")
    return EXIT_OK


def cmd_generate(args) -> int:
    ontology = _load_ontology(args.ontology)
    registry = _load_registry(args.templates)
    graphs = load_corpus(args.graphs, ontology)
    seed = _merged(args, "generate", "seed", 0)
    config = GeneratorConfig(
        per_video_cap=_merged(args, "generate", "cap", 10_000),
        loc_anchors=_merged(args, "generate", "loc-anchors", 3),
        indirect_per_base=_merged(args, "generate", "indirect-per-base", 2),
    )
    result = generate_corpus(graphs, registry, ontology, seed, config, _workers(args))
    out = Path(args.out)
    _write_jsonl(out / "questions.jsonl", [r.to_json() for r in result.records])
    _write_jsonl(out / "rejections.jsonl", [r.to_json() for r in result.rejections])
    _write_json(out / "manifest.json", result.manifest)
    print(
        f"generated {len(result.records)} questions "
        f"({len(result.rejections)} rejections) for {len(graphs)} videos"
    )
    return EXIT_OK


def cmd_balance(args) -> int:
    records = _read_questions(args.questions)
    if args.balance_config:
        with open(args.balance_config, "r", encoding="utf-8") as handle:
            config = BalanceConfig.from_json(json.load(handle))
    else:
        config = BalanceConfig.from_json(_config_section(args, "balance"))
    if args.seed is not None:
        config.seed = args.seed
    balanced, plan = balance_corpus(records, config)
    out = Path(args.out)
    _write_jsonl(out / "balanced.jsonl", [r.to_json() for r in balanced])
    plan_rows = [
        {"qid": qid, "stage": stage} for qid, stage in sorted(plan.deletions.items())
    ]
    _write_jsonl(out / "plan.jsonl", plan_rows)
    _write_json(
        out / "balance_manifest.json",
        {
            "seed": config.seed,
            "config": config.to_json(),
            "config_hash": config_hash(config.to_json()),
            "input": len(records),
            "survivors": len(balanced),
            "deletions_by_stage": {
                stage: sum(1 for s in plan.deletions.values() if s == stage)
                for stage in ("localization", "answer", "structural")
            },
            "flagged": sorted(set(plan.flagged)),
            "quota_ledger": plan.quota_ledger,
        },
    )
    shares = structure_shares(balanced)
    print(f"balanced {len(records)} -> {len(balanced)} questions")
    print("structure shares: " + ", ".join(f"{s}={shares.get(s, 0):.3f}" for s in shares))
    if plan.flagged and args.strict:
        return EXIT_STRICT
    return EXIT_OK


def cmd_split(args) -> int:
    records = _read_questions(args.questions)
    if args.split_spec:
        with open(args.split_spec, "r", encoding="utf-8") as handle:
            spec = SplitSpec.from_json(json.load(handle))
    else:
        section = _config_section(args, "split")
        spec = SplitSpec.from_json(section) if section else SplitSpec(
            kind="novel-composition", heldout=default_heldout()
        )
    if args.kind:
        spec.kind = args.kind
    if args.steps_threshold is not None:
        spec.steps_threshold = args.steps_threshold
    if args.seed is not None:
        spec.seed = args.seed

    out = Path(args.out)
    flags: list[str] = []
    if spec.kind == "novel-composition":
        result = build_novel_composition(records, spec)
        write_split(result, out / "novel_composition")
        flags = result.flags
        print(
            f"novel-composition: train={len(result.train_qids)} "
            f"test={len(result.test_qids)} excluded={len(result.exclusion_log)}"
        )
    elif spec.kind == "more-steps":
        result = build_steps_split(records, spec.steps_threshold, spec)
        write_split(result, out / "more_steps")
        flags = result.flags
        print(
            f"more-steps (M={spec.steps_threshold}): train={len(result.train_qids)} "
            f"test={len(result.test_qids)}"
        )
    elif spec.kind == "indirect-reference":
        pairing = build_indirect_pairing(records)
        _write_json(
            out / "indirect_reference" / "pairing.json",
            {"pairs": pairing.pairs, "unpaired": pairing.unpaired},
        )
        print(
            f"indirect-reference: {sum(len(v) for k in pairing.pairs.values() for v in k.values())} "
            f"pairs, {len(pairing.unpaired)} unpaired"
        )
    else:
        raise DataError(f"unknown split kind {spec.kind!r}")
    _write_json(out / "split_spec.json", spec.to_json())
    if flags and args.strict:
        return EXIT_STRICT
    return EXIT_OK


def cmd_stats(args) -> int:
    from collections import Counter

    records = _read_questions(args.questions)
    if not records:
        raise DataError("no questions to report on")
    shares = structure_shares(records)
    by_template = Counter(r.template_id for r in records)
    by_reasoning = Counter(rt for r in records for rt in r.reasoning)
    by_answer_type = Counter(r.answer_type for r in records)
    by_steps = Counter(r.steps for r in records)

    print(f"questions: {len(records)}")
    print("structure shares:")
    for structure, share in shares.items():
        print(f"  {structure:<8} {share:6.3f}  ({int(share * len(records))})")
    print("answer types: " + ", ".join(f"{k}={v}" for k, v in sorted(by_answer_type.items())))
    print("reasoning:")
    for name, count in sorted(by_reasoning.items()):
        print(f"  {name:<22} {count}")
    print("steps histogram:")
    for steps, count in sorted(by_steps.items()):
        print(f"  {steps:>2} steps  {count}")

    out = Path(args.out) if args.out else None
    if out:
        binary_gaps = audit_binary_categories(records)
        stats_payload = {
            "questions": len(records),
            "structure_shares": shares,
            "by_template": dict(sorted(by_template.items())),
            "by_reasoning": dict(sorted(by_reasoning.items())),
            "by_answer_type": dict(sorted(by_answer_type.items())),
            "by_steps": {str(k): v for k, v in sorted(by_steps.items())},
            "binary_max_gap": max(binary_gaps.values()) if binary_gaps else 0,
        }
        _write_json(out / "stats.json", stats_payload)
        if args.figures:
            from . import report as report_mod

            for path in report_mod.stats_figures(records, out):
                print(f"figure: {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ontology = _load_ontology(args.ontology)
    records = _read_questions(args.questions)
    predictions = PredictionSet.load(args.predictions, {r.qid for r in records})
    if not predictions.answers:
        raise DataError("predictions cover no corpus question")
    for qid in predictions.unknown_qids[:5]:
        print(f"warning: prediction for unknown qid {qid} skipped", file=sys.stderr)
    report = score(records, predictions.answers, ontology, predictions.unknown_qids)
    out = Path(args.out)
    _write_json(out / "report.json", report.to_json())
    report.write_csv(out / "report.csv")
    overall = report.overall["all"]
    print(f"overall accuracy: {overall.accuracy:.4f} over {overall.count} questions")
    if report.regression.get("slope") is not None:
        print(
            f"steps regression: slope={report.regression['slope']:.4f} "
            f"R2={report.regression['r_squared']:.3f}"
        )
    if args.figures:
        from . import report as report_mod

        for path in report_mod.evaluation_figures(report, out):
            print(f"figure: {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> _Parser:
    parser = _Parser(prog="sceneqa", description=__doc__)
    parser.add_argument("--config", help="JSON config with per-stage sections")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene-graph corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--objects-per-frame", type=int)
    p.add_argument("--actions", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--ontology")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="load, canonicalize, and validate scene graphs")
    p.add_argument("--graphs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ontology")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("augment", help="entailments, consistency, propagation, intervals")
    p.add_argument("--graphs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ontology")
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("generate", help="enumerate, filter, and emit the unbalanced corpus")
    p.add_argument("--graphs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ontology")
    p.add_argument("--templates")
    p.add_argument("--seed", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--loc-anchors", type=int)
    p.add_argument("--indirect-per-base", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("balance", help="two-stage answer and structure balancing")
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--balance-config")
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("split", help="build generalization train/test splits")
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-spec")
    p.add_argument("--kind", choices=["novel-composition", "more-steps", "indirect-reference"])
    p.add_argument("--steps-threshold", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="print and plot corpus category histograms")
    p.add_argument("--questions", required=True)
    p.add_argument("--out")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("evaluate", help="score a predictions file against a corpus")
    p.add_argument("--questions", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ontology")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SchemaError, VocabularyError, ValidationError, OntologyError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
