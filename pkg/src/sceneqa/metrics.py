"""Scoring of model predictions: category accuracies, baselines, regressions."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .balancer import content_key
from .ontology import Ontology
from .templates import QuestionRecord

REASONING_ROWS = (
    "obj-rel",
    "rel-action",
    "obj-act",
    "superlative",
    "sequencing",
    "exists",
    "duration-comparison",
    "activity-recognition",
)
SEMANTIC_ROWS = ("object", "relationship", "action")
STRUCTURE_ROWS = ("query", "compare", "choose", "verify", "logic")
INDIRECT_KINDS = ("object", "relationship", "action", "temporal")


def normalize_answer(text: str, ontology: Ontology | None = None) -> str:
    text = text.strip().lower()
    if ontology is not None:
        text = ontology.canonical(text)
    return text


@dataclass
class PredictionSet:
    answers: dict[str, str]
    unknown_qids: list[str] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path, corpus_qids: set[str] | None = None) -> "PredictionSet":
        answers = {}
        unknown = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                payload = json.loads(line)
                qid, answer = payload["qid"], payload["answer"]
                if corpus_qids is not None and qid not in corpus_qids:
                    unknown.append(qid)
                    continue
                answers[qid] = answer
        return cls(answers, unknown)


@dataclass
class Cell:
    count: int = 0
    correct: int = 0
    most_likely_correct: int = 0

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.count if self.count else None

    @property
    def most_likely(self) -> float | None:
        return self.most_likely_correct / self.count if self.count else None

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "accuracy": self.accuracy,
            "most_likely": self.most_likely,
        }


@dataclass
class EvalReport:
    reasoning: dict[str, dict[str, Cell]]
    semantic: dict[str, dict[str, Cell]]
    structure: dict[str, dict[str, Cell]]
    overall: dict[str, Cell]
    indirect: dict[str, dict]
    regression: dict
    missing_predictions: int = 0
    skipped_qids: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        def table(rows: dict[str, dict[str, Cell]]) -> dict:
            return {
                name: {at: cell.to_json() for at, cell in cells.items() if cell.count}
                for name, cells in rows.items()
                if any(cell.count for cell in cells.values())
            }

        return {
            "reasoning": table(self.reasoning),
            "semantic": table(self.semantic),
            "structure": table(self.structure),
            "overall": {at: cell.to_json() for at, cell in self.overall.items() if cell.count},
            "indirect": self.indirect,
            "regression": self.regression,
            "missing_predictions": self.missing_predictions,
            "skipped_qids": self.skipped_qids,
        }

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["section", "category", "answer_type", "questions", "most_likely", "accuracy"]
            )

            def emit(section: str, name: str, cells: dict[str, Cell]) -> None:
                for answer_type in ("binary", "open", "all"):
                    cell = cells.get(answer_type)
                    if cell is None or not cell.count:
                        continue
                    writer.writerow(
                        [
                            section,
                            name,
                            answer_type,
                            cell.count,
                            f"{cell.most_likely:.4f}" if cell.most_likely is not None else "",
                            f"{cell.accuracy:.4f}" if cell.accuracy is not None else "",
                        ]
                    )

            for name in REASONING_ROWS:
                emit("reasoning", name, self.reasoning.get(name, {}))
            for name in SEMANTIC_ROWS:
                emit("semantic", name, self.semantic.get(name, {}))
            for name in STRUCTURE_ROWS:
                emit("structure", name, self.structure.get(name, {}))
            emit("overall", "overall", self.overall)
            for kind in INDIRECT_KINDS:
                entry = self.indirect.get(kind)
                if not entry:
                    continue
                precision = entry["precision"]
                writer.writerow(
                    [
                        "indirect",
                        kind,
                        "all",
                        entry["recall_count"],
                        "" if precision is None else f"{precision:.4f}",
                        f"{entry['recall']:.4f}" if entry["recall"] is not None else "",
                    ]
                )


def most_likely_answers(records: list[QuestionRecord]) -> dict[str, str]:
    """The most common answer of each content category (ties: lexicographic)."""
    by_category: dict[str, Counter] = defaultdict(Counter)
    for record in records:
        by_category[content_key(record)][record.answer] += 1
    return {
        category: sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        for category, counts in by_category.items()
    }


def most_likely_baseline(records: list[QuestionRecord]) -> dict[str, float]:
    """Accuracy of always guessing each content category's most common answer."""
    guesses = most_likely_answers(records)
    by_category: dict[str, list[QuestionRecord]] = defaultdict(list)
    for record in records:
        by_category[content_key(record)].append(record)
    return {
        category: sum(1 for r in group if r.answer == guesses[category]) / len(group)
        for category, group in by_category.items()
        if group
    }


def steps_regression(
    records: list[QuestionRecord],
    predictions: dict[str, str],
    ontology: Ontology | None = None,
    weighted: bool = True,
) -> dict:
    """Least squares of per-step accuracy on step count, weighted by question
    counts per step (the dot-size convention). Unweighted available via flag."""
    per_step: dict[int, Cell] = defaultdict(Cell)
    for record in records:
        cell = per_step[record.steps]
        cell.count += 1
        predicted = predictions.get(record.qid)
        if predicted is not None and normalize_answer(predicted, ontology) == normalize_answer(
            record.answer, ontology
        ):
            cell.correct += 1
    table = {
        step: {"count": cell.count, "accuracy": cell.accuracy}
        for step, cell in sorted(per_step.items())
    }
    points = [(step, cell.accuracy, cell.count) for step, cell in sorted(per_step.items())]
    if len(points) < 2:
        return {"slope": None, "intercept": None, "r_squared": None, "per_step": table,
                "weighted": weighted}

    weights = [count if weighted else 1 for _, _, count in points]
    total = sum(weights)
    mean_x = sum(w * x for (x, _, _), w in zip(points, weights)) / total
    mean_y = sum(w * y for (_, y, _), w in zip(points, weights)) / total
    sxx = sum(w * (x - mean_x) ** 2 for (x, _, _), w in zip(points, weights))
    sxy = sum(w * (x - mean_x) * (y - mean_y) for (x, y, _), w in zip(points, weights))
    if sxx == 0:
        return {"slope": None, "intercept": None, "r_squared": None, "per_step": table,
                "weighted": weighted}
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_total = sum(w * (y - mean_y) ** 2 for (_, y, _), w in zip(points, weights))
    ss_residual = sum(
        w * (y - (intercept + slope * x)) ** 2 for (x, y, _), w in zip(points, weights)
    )
    r_squared = 0.0 if ss_total == 0 else 1.0 - ss_residual / ss_total
    return {
        "slope": slope,
        "intercept": intercept,
        "r_squared": r_squared,
        "per_step": table,
        "weighted": weighted,
    }


def score(
    records: list[QuestionRecord],
    predictions: dict[str, str],
    ontology: Ontology | None = None,
    skipped_qids: list[str] | None = None,
) -> EvalReport:
    """Exact-match accuracy per category; indirect precision/recall; regression."""
    guesses = most_likely_answers(records)

    def new_rows(names) -> dict[str, dict[str, Cell]]:
        return {name: {at: Cell() for at in ("binary", "open", "all")} for name in names}

    reasoning = new_rows(REASONING_ROWS)
    semantic = new_rows(SEMANTIC_ROWS)
    structure = new_rows(STRUCTURE_ROWS)
    overall = {at: Cell() for at in ("binary", "open", "all")}

    correct_qids: set[str] = set()
    missing = 0
    for record in records:
        predicted = predictions.get(record.qid)
        if predicted is None:
            missing += 1
            is_correct = False
        else:
            is_correct = normalize_answer(predicted, ontology) == normalize_answer(
                record.answer, ontology
            )
        if is_correct:
            correct_qids.add(record.qid)
        ml_correct = record.answer == guesses[content_key(record)]

        def tally(cell: Cell) -> None:
            cell.count += 1
            cell.correct += int(is_correct)
            cell.most_likely_correct += int(ml_correct)

        for at in (record.answer_type, "all"):
            tally(overall[at])
            for r_type in record.reasoning:
                if r_type in reasoning:
                    tally(reasoning[r_type][at])
            if record.semantic in semantic:
                tally(semantic[record.semantic][at])
            if record.structure in structure:
                tally(structure[record.structure][at])

    by_qid = {r.qid: r for r in records}
    indirect: dict[str, dict] = {}
    for kind in INDIRECT_KINDS:
        kind_records = [r for r in records if r.indirect_kind == kind]
        if not kind_records:
            continue
        recall_correct = sum(1 for r in kind_records if r.qid in correct_qids)
        precision_pool = [
            r
            for r in kind_records
            if r.direct_counterpart in by_qid and r.direct_counterpart in correct_qids
        ]
        precision_correct = sum(1 for r in precision_pool if r.qid in correct_qids)
        indirect[kind] = {
            "recall": recall_correct / len(kind_records),
            "recall_count": len(kind_records),
            # N/A (None) when no direct counterpart was answered correctly.
            "precision": (
                precision_correct / len(precision_pool) if precision_pool else None
            ),
            "precision_count": len(precision_pool),
        }

    regression = steps_regression(records, predictions, ontology)
    return EvalReport(
        reasoning=reasoning,
        semantic=semantic,
        structure=structure,
        overall=overall,
        indirect=indirect,
        regression=regression,
        missing_predictions=missing,
        skipped_qids=skipped_qids or [],
    )
