"""Generalization train/test split construction over a balanced corpus."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis
from .dsl import Node
from .templates import QuestionRecord

SPLIT_KINDS = ("novel-composition", "indirect-reference", "more-steps")

# Duration-flavored wording that marks a question as reasoning over length.
DURATION_MARKERS = (
    "longer",
    "shorter",
    "more time",
    "less time",
    "most amount of time",
    "least amount of time",
    "longest",
    "shortest",
)


@dataclass
class HeldOut:
    sequencing: list[tuple[str, str]] = field(default_factory=list)  # (time, action)
    superlative: list[tuple[str, str]] = field(default_factory=list)  # (extremum, rel)
    duration: list[str] = field(default_factory=list)  # actions
    obj_rel: list[tuple[str, str]] = field(default_factory=list)  # (object, rel)

    def to_json(self) -> dict:
        return {
            "sequencing": [list(p) for p in self.sequencing],
            "superlative": [list(p) for p in self.superlative],
            "duration": list(self.duration),
            "obj_rel": [list(p) for p in self.obj_rel],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "HeldOut":
        return cls(
            sequencing=[tuple(p) for p in payload.get("sequencing", [])],
            superlative=[tuple(p) for p in payload.get("superlative", [])],
            duration=list(payload.get("duration", [])),
            obj_rel=[tuple(p) for p in payload.get("obj_rel", [])],
        )


def default_heldout() -> HeldOut:
    actions = [
        "standing up",
        "walking through a doorway",
        "playing with a phone",
        "opening a laptop",
        "grasping a doorknob",
        "throwing a broom somewhere",
    ]
    return HeldOut(
        sequencing=[("before", a) for a in actions],
        superlative=[
            ("first", "behind"),
            ("first", "in"),
            ("first", "leaning on"),
            ("first", "carrying"),
            ("first", "on the side of"),
            ("first", "holding"),
        ],
        duration=list(actions),
        obj_rel=[
            ("table", "wiping"),
            ("dish", "wiping"),
            ("table", "beneath"),
            ("dish", "beneath"),
            ("food", "in front of"),
            ("paper", "carrying"),
            ("chair", "leaning on"),
        ],
    )


@dataclass
class SplitSpec:
    kind: str
    heldout: HeldOut = field(default_factory=default_heldout)
    steps_threshold: int = 3
    base_video_split: dict[str, str] = field(default_factory=dict)
    train_fraction: float = 0.8
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "heldout": self.heldout.to_json(),
            "steps_threshold": self.steps_threshold,
            "base_video_split": dict(self.base_video_split),
            "train_fraction": self.train_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "SplitSpec":
        return cls(
            kind=payload["kind"],
            heldout=HeldOut.from_json(payload.get("heldout", default_heldout().to_json())),
            steps_threshold=payload.get("steps_threshold", 3),
            base_video_split=dict(payload.get("base_video_split", {})),
            train_fraction=payload.get("train_fraction", 0.8),
            seed=payload.get("seed", 0),
        )


@dataclass
class SplitResult:
    train_qids: list[str]
    test_qids: list[str]
    exclusion_log: dict[str, str] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


def assign_videos(video_ids: list[str], spec: SplitSpec) -> dict[str, str]:
    """Deterministic video partition; explicit assignments win."""
    assignment = {}
    for video_id in sorted(set(video_ids)):
        if video_id in spec.base_video_split:
            assignment[video_id] = spec.base_video_split[video_id]
            continue
        digest = hashlib.sha1(f"{spec.seed}|{video_id}".encode()).hexdigest()
        share = int(digest[:8], 16) / 0xFFFFFFFF
        assignment[video_id] = "train" if share < spec.train_fraction else "test"
    return assignment


# ---------------------------------------------------------------------------
# Held-out pair detection (program level and text level)


def _walk(node: Node):
    yield node
    for arg in node.args:
        if isinstance(arg, Node):
            yield from _walk(arg)


def ast_sequencing_hit(record: QuestionRecord, time_word: str, action: str) -> bool:
    for node in _walk(record.program.root):
        if node.op == "getFrames" and node.args[1] == time_word:
            if analysis.program_actions(node.args[0]) == {action}:
                return True
        if node.op == "actions" and len(node.args) == 2 and node.args[0] == time_word:
            if node.args[1] == action:
                return True
    return False


def ast_superlative_hit(record: QuestionRecord, extremum: str, relationship: str) -> bool:
    wanted = ("start", "least") if extremum == "first" else ("end", "most")
    comparative_wanted = ("start", "less") if extremum == "first" else ("end", "more")
    for node in _walk(record.program.root):
        if node.op == "superlative" and (node.args[1], node.args[2]) == wanted:
            if relationship in analysis._filter_relationships(node.args[0]):
                return True
        if node.op == "comparative" and (node.args[2], node.args[3]) == comparative_wanted:
            rels = set()
            for child in node.args[:2]:
                if isinstance(child, Node):
                    rels |= analysis._filter_relationships(child)
            if relationship in rels:
                return True
    return False


def ast_duration_hit(record: QuestionRecord, action: str) -> bool:
    for kind, payload in analysis.duration_margin_checks(record.program.root):
        if kind == "pair" and action in payload:
            return True
        if kind == "global":
            if record.answer == action or action in record.bindings.values():
                return True
    return False


def ast_objrel_hit(record: QuestionRecord, obj: str, rel: str) -> bool:
    return (obj, rel) in analysis.record_pairs(record)


def text_hits(record: QuestionRecord, heldout: HeldOut) -> list[str]:
    text = record.text.lower()
    hits = []
    for time_word, action in heldout.sequencing:
        if f"{time_word} {action}" in text:
            hits.append(f"sequencing:{time_word}+{action}")
    for extremum, rel in heldout.superlative:
        if extremum in text and rel in text:
            hits.append(f"superlative:{extremum}+{rel}")
    for action in heldout.duration:
        if action in text and any(marker in text for marker in DURATION_MARKERS):
            hits.append(f"duration:{action}")
    for obj, rel in heldout.obj_rel:
        if obj in text and rel in text:
            hits.append(f"obj-rel:{obj}+{rel}")
    return hits


def ast_hits(record: QuestionRecord, heldout: HeldOut) -> list[str]:
    hits = []
    for time_word, action in heldout.sequencing:
        if ast_sequencing_hit(record, time_word, action):
            hits.append(f"sequencing:{time_word}+{action}")
    for extremum, rel in heldout.superlative:
        if ast_superlative_hit(record, extremum, rel):
            hits.append(f"superlative:{extremum}+{rel}")
    for action in heldout.duration:
        if ast_duration_hit(record, action):
            hits.append(f"duration:{action}")
    for obj, rel in heldout.obj_rel:
        if ast_objrel_hit(record, obj, rel):
            hits.append(f"obj-rel:{obj}+{rel}")
    return hits


def heldout_hits(record: QuestionRecord, heldout: HeldOut) -> list[str]:
    return sorted(set(ast_hits(record, heldout)) | set(text_hits(record, heldout)))


# ---------------------------------------------------------------------------
# Split builders


def build_novel_composition(
    records: list[QuestionRecord], spec: SplitSpec
) -> SplitResult:
    """Held-out concept pairs never reach the train side (members may appear
    separately); the test side keeps only questions that combine them."""
    videos = assign_videos([r.video_id for r in records], spec)
    train, test, log = [], [], {}
    for record in sorted(records, key=lambda r: r.qid):
        side = videos[record.video_id]
        hits = heldout_hits(record, spec.heldout)
        if side == "train":
            if hits:
                log[record.qid] = "train-contains:" + hits[0]
            else:
                train.append(record.qid)
        else:
            if hits:
                test.append(record.qid)
            else:
                log[record.qid] = "test-without-pair"
    flags = []
    if not test:
        flags.append("empty-test")
    if not train:
        flags.append("empty-train")
    return SplitResult(train, test, log, flags)


def build_steps_split(
    records: list[QuestionRecord], steps_threshold: int, spec: SplitSpec
) -> SplitResult:
    """Train keeps simple questions (steps <= M on train videos); test keeps
    strictly harder ones on test videos."""
    if steps_threshold < 1:
        raise ValueError("steps threshold must be >= 1")
    videos = assign_videos([r.video_id for r in records], spec)
    train, test, log = [], [], {}
    for record in sorted(records, key=lambda r: r.qid):
        side = videos[record.video_id]
        if side == "train":
            if record.steps <= steps_threshold:
                train.append(record.qid)
            else:
                log[record.qid] = f"train-steps>{steps_threshold}"
        else:
            if record.steps > steps_threshold:
                test.append(record.qid)
            else:
                log[record.qid] = f"test-steps<={steps_threshold}"
    flags = []
    if not test:
        flags.append("empty-test")
    if not train:
        flags.append("empty-train")
    return SplitResult(train, test, log, flags)


@dataclass
class PairingResult:
    pairs: dict[str, dict[str, list[str]]]  # direct qid -> kind -> indirect qids
    unpaired: list[str] = field(default_factory=list)

    def by_kind(self) -> dict[str, list[tuple[str, str]]]:
        grouped: dict[str, list[tuple[str, str]]] = {}
        for direct, kinds in sorted(self.pairs.items()):
            for kind, indirect_qids in sorted(kinds.items()):
                for qid in indirect_qids:
                    grouped.setdefault(kind, []).append((direct, qid))
        return grouped


def build_indirect_pairing(records: list[QuestionRecord]) -> PairingResult:
    """Link each surviving indirect question to its surviving direct version."""
    alive = {r.qid for r in records}
    pairs: dict[str, dict[str, list[str]]] = {}
    unpaired = []
    for record in sorted(records, key=lambda r: r.qid):
        if record.direct_counterpart is None or record.indirect_kind is None:
            continue
        if record.direct_counterpart in alive:
            pairs.setdefault(record.direct_counterpart, {}).setdefault(
                record.indirect_kind, []
            ).append(record.qid)
        else:
            unpaired.append(record.qid)
    return PairingResult(pairs, unpaired)


def verify_video_partition(
    records: list[QuestionRecord], result: SplitResult
) -> bool:
    """No video contributes questions to both sides."""
    by_qid = {r.qid: r for r in records}
    train_videos = {by_qid[q].video_id for q in result.train_qids}
    test_videos = {by_qid[q].video_id for q in result.test_qids}
    return not (train_videos & test_videos)


def write_split(result: SplitResult, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "train.txt").write_text("\n".join(result.train_qids) + "\n")
    (directory / "test.txt").write_text("\n".join(result.test_qids) + "\n")
    with open(directory / "exclusions.jsonl", "w", encoding="utf-8") as handle:
        for qid in sorted(result.exclusion_log):
            handle.write(json.dumps({"qid": qid, "rule": result.exclusion_log[qid]}) + "\n")
    if result.flags:
        (directory / "flags.json").write_text(json.dumps(result.flags, indent=1) + "\n")
