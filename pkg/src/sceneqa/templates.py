"""Template registry, question instantiation, and composition operators."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import nlg
from .dsl import (
    Ambiguous,
    Answer,
    Item,
    Node,
    Program,
    Undefined,
    count_steps,
    evaluate,
    parse_sexpr,
    typecheck,
)
from .graph import VideoGraph
from .ontology import Ontology

STRUCTURES = ("query", "compare", "choose", "verify", "logic")
SEMANTICS = ("object", "relationship", "action")
REASONING_TYPES = (
    "obj-rel",
    "rel-action",
    "obj-act",
    "superlative",
    "sequencing",
    "exists",
    "duration-comparison",
    "activity-recognition",
)
TIME_WORDS = ("before", "after", "while")


class RegistryError(ValueError):
    """The template registry contradicts its declared metadata."""


class EvaluationRejected(Exception):
    """Candidate evaluated to Undefined or Ambiguous and must be discarded."""

    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind  # "undefined" | "ambiguous"
        self.detail = detail


class CompositionError(ValueError):
    """An indirect reference or localization cannot be applied to this record."""


@dataclass(frozen=True)
class Template:
    id: str
    structure: str
    semantic: str
    reasoning: tuple[str, ...]
    base_steps: int
    answer_type: str  # binary | open
    binary_options: str | None  # yes_no | before_after | in_question
    slots: dict[str, str]  # slot name -> kind
    frames: tuple[str, ...]
    skeleton: Node
    localizable: bool

    def option_slots(self) -> tuple[str, str] | None:
        if self.binary_options != "in_question":
            return None
        if "object" in self.slots and "object2" in self.slots:
            return ("object", "object2")
        return ("action", "action2")


@dataclass(frozen=True)
class IndirectRef:
    id: str
    kind: str  # object | relationship | action
    phrase: str
    slots: dict[str, str]
    skeleton: Node
    host_frames: dict[str, str] = field(default_factory=dict)

    def added_steps(self) -> int:
        return count_steps(self.skeleton)


@dataclass
class QuestionRecord:
    qid: str
    video_id: str
    text: str
    answer: str
    program: Program
    template_id: str
    structure: str
    semantic: str
    reasoning: tuple[str, ...]
    answer_type: str
    steps: int
    localization: str = "none"  # none | answer-changed | answer-unchanged
    direct_counterpart: str | None = None
    bindings: dict[str, str] = field(default_factory=dict)
    indirect_kind: str | None = None
    options: tuple[str, str] | None = None
    loc_time: str | None = None
    loc_anchor: str | None = None

    def primary_reasoning(self) -> str:
        return self.reasoning[0] if self.reasoning else "other"

    def content_category(self) -> tuple[str, ...]:
        parts = [self.primary_reasoning(), self.template_id]
        parts.extend(self.bindings[s] for s in sorted(self.bindings))
        return tuple(parts)

    def to_json(self) -> dict:
        return {
            "qid": self.qid,
            "video_id": self.video_id,
            "text": self.text,
            "answer": self.answer,
            "program": self.program.to_sexpr(),
            "template_id": self.template_id,
            "structure": self.structure,
            "semantic": self.semantic,
            "reasoning": list(self.reasoning),
            "answer_type": self.answer_type,
            "steps": self.steps,
            "localization": self.localization,
            "direct_counterpart": self.direct_counterpart,
            "bindings": self.bindings,
            "indirect_kind": self.indirect_kind,
            "options": list(self.options) if self.options else None,
            "loc_time": self.loc_time,
            "loc_anchor": self.loc_anchor,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "QuestionRecord":
        root = parse_sexpr(payload["program"])
        return cls(
            qid=payload["qid"],
            video_id=payload["video_id"],
            text=payload["text"],
            answer=payload["answer"],
            program=Program(root, payload["template_id"], payload["steps"]),
            template_id=payload["template_id"],
            structure=payload["structure"],
            semantic=payload["semantic"],
            reasoning=tuple(payload["reasoning"]),
            answer_type=payload["answer_type"],
            steps=payload["steps"],
            localization=payload.get("localization", "none"),
            direct_counterpart=payload.get("direct_counterpart"),
            bindings=dict(payload.get("bindings", {})),
            indirect_kind=payload.get("indirect_kind"),
            options=tuple(payload["options"]) if payload.get("options") else None,
            loc_time=payload.get("loc_time"),
            loc_anchor=payload.get("loc_anchor"),
        )


class Registry:
    def __init__(self, templates: list[Template], refs: list[IndirectRef],
                 hosts: dict[str, dict[str, str]]):
        self.templates = {t.id: t for t in templates}
        self.indirect_refs = {r.id: r for r in refs}
        self.indirect_hosts = hosts
        self._verify()

    def _verify(self) -> None:
        if len(self.templates) < 28:
            raise RegistryError(f"registry has {len(self.templates)} templates, need >= 28")
        for template in self.templates.values():
            if template.structure not in STRUCTURES:
                raise RegistryError(f"{template.id}: bad structure {template.structure!r}")
            if template.semantic not in SEMANTICS:
                raise RegistryError(f"{template.id}: bad semantic {template.semantic!r}")
            for reason in template.reasoning:
                if reason not in REASONING_TYPES:
                    raise RegistryError(f"{template.id}: bad reasoning {reason!r}")
            declared = template.base_steps
            counted = count_steps(template.skeleton)
            if counted != declared:
                raise RegistryError(
                    f"{template.id}: declares {declared} steps but program counts {counted}"
                )
            if template.answer_type == "binary" and template.binary_options is None:
                raise RegistryError(f"{template.id}: binary template without options rule")
            program_text = json.dumps(template.skeleton.to_sexpr())
            joined_frames = " ".join(template.frames)
            for slot in template.slots:
                if f"${slot}" not in program_text:
                    raise RegistryError(f"{template.id}: slot {slot!r} absent from program")
                if f"<{slot}" not in joined_frames:
                    raise RegistryError(f"{template.id}: slot {slot!r} absent from frames")
            problems = typecheck(template.skeleton)
            if problems:
                raise RegistryError(f"{template.id}: skeleton fails typecheck: {problems}")

    def by_structure(self, structure: str) -> list[Template]:
        return [t for t in sorted(self.templates.values(), key=lambda t: t.id)
                if t.structure == structure]

    def hosts_for(self, ref: IndirectRef) -> dict[str, str]:
        return self.indirect_hosts.get(ref.kind, {})


def _parse_registry(payload: dict) -> Registry:
    templates = [
        Template(
            id=entry["id"],
            structure=entry["structure"],
            semantic=entry["semantic"],
            reasoning=tuple(entry["reasoning"]),
            base_steps=entry["steps"],
            answer_type=entry["answer_type"],
            binary_options=entry.get("binary_options"),
            slots=dict(entry["slots"]),
            frames=tuple(entry["frames"]),
            skeleton=parse_sexpr(entry["program"]),
            localizable=entry.get("localizable", False),
        )
        for entry in payload["templates"]
    ]
    refs = [
        IndirectRef(
            id=entry["id"],
            kind=entry["kind"],
            phrase=entry["phrase"],
            slots=dict(entry.get("slots", {})),
            skeleton=parse_sexpr(entry["program"]),
            host_frames=dict(entry.get("host_frames", {})),
        )
        for entry in payload.get("indirect_refs", [])
    ]
    return Registry(templates, refs, payload.get("indirect_hosts", {}))


def load_registry(path: str | Path) -> Registry:
    with open(path, "r", encoding="utf-8") as handle:
        return _parse_registry(json.load(handle))


def default_registry() -> Registry:
    text = resources.files("sceneqa.data").joinpath("templates.json").read_text("utf-8")
    return _parse_registry(json.loads(text))


# ---------------------------------------------------------------------------
# Program assembly


def substitute(node: Node, bindings: dict[str, str]) -> Node:
    args = []
    for arg in node.args:
        if isinstance(arg, Node):
            args.append(substitute(arg, bindings))
        elif isinstance(arg, str) and arg.startswith("$"):
            name = arg[1:]
            if name not in bindings:
                raise CompositionError(f"unbound program slot {name!r}")
            args.append(bindings[name])
        else:
            args.append(arg)
    return Node(node.op, tuple(args))


def replace_subtree(node: Node, target: Node, replacement: Node) -> tuple[Node, int]:
    if node == target:
        return replacement, 1
    replaced = 0
    args = []
    for arg in node.args:
        if isinstance(arg, Node) and replaced == 0:
            new_arg, hit = replace_subtree(arg, target, replacement)
            args.append(new_arg)
            replaced += hit
        else:
            args.append(arg)
    return Node(node.op, tuple(args)), replaced


def _stable_hash(text: str) -> str:
    return hashlib.sha1(text.encode("utf-8")).hexdigest()


def make_qid(video_id: str, template_id: str, bindings: dict[str, str],
             variant: str = "") -> str:
    slots = ",".join(f"{k}={bindings[k]}" for k in sorted(bindings))
    return _stable_hash(f"{video_id}|{template_id}|{slots}|{variant}")[:16]


def _choose_frame(template: Template, bindings: dict[str, str], qid: str,
                  ontology: Ontology, seed: int) -> str:
    compatible = [
        pattern
        for pattern in template.frames
        if nlg.frame_compatible(pattern, template.slots, bindings, ontology)
    ]
    if not compatible:
        raise nlg.GrammarError(
            f"{template.id}: no frame fits bindings {bindings!r}"
        )
    index = int(_stable_hash(f"{qid}|frame|{seed}"), 16) % len(compatible)
    return compatible[index]


def _result_or_reject(result) -> object:
    if isinstance(result, Undefined):
        raise EvaluationRejected("undefined", result.reason)
    if isinstance(result, Ambiguous):
        raise EvaluationRejected("ambiguous", ", ".join(result.candidates))
    assert isinstance(result, Answer)
    return result.value


def realize_answer(template: Template, value: object) -> str:
    if isinstance(value, bool):
        if template.binary_options != "before_after":
            raise EvaluationRejected("undefined", "boolean answer on non-temporal template")
        return "before" if value else "after"
    if isinstance(value, Item):
        return value.name
    if isinstance(value, str):
        return value
    raise EvaluationRejected("undefined", f"unanswerable value {value!r}")


def answer_options(template: Template, bindings: dict[str, str]) -> tuple[str, str] | None:
    if template.answer_type != "binary":
        return None
    if template.binary_options == "yes_no":
        return ("yes", "no")
    if template.binary_options == "before_after":
        return ("before", "after")
    slots = template.option_slots()
    return (bindings[slots[0]], bindings[slots[1]])


def instantiate(
    template: Template,
    bindings: dict[str, str],
    graph: VideoGraph,
    seed: int,
    ontology: Ontology,
) -> QuestionRecord:
    """Fill a template; raises EvaluationRejected/GrammarError on bad candidates."""
    missing = set(template.slots) - set(bindings)
    if missing:
        raise CompositionError(f"{template.id}: unbound slots {sorted(missing)}")

    root = substitute(template.skeleton, bindings)
    program = Program(root, template.id, count_steps(root))
    value = _result_or_reject(evaluate(program, graph))
    answer = realize_answer(template, value)

    options = answer_options(template, bindings)
    if options is not None and answer not in options:
        raise EvaluationRejected(
            "undefined", f"answer {answer!r} not among options {options}"
        )

    qid = make_qid(graph.video_id, template.id, bindings)
    pattern = _choose_frame(template, bindings, qid, ontology, seed)
    text = nlg.realize(pattern, template.slots, bindings, ontology)

    return QuestionRecord(
        qid=qid,
        video_id=graph.video_id,
        text=text,
        answer=answer,
        program=program,
        template_id=template.id,
        structure=template.structure,
        semantic=template.semantic,
        reasoning=template.reasoning,
        answer_type=template.answer_type,
        steps=program.step_count,
        bindings=dict(bindings),
        options=options,
    )


def localization_window(time_word: str, anchor: str) -> Node:
    return Node(
        "getFrames",
        (
            Node("iterate", (Node("actions"), Node("named", (anchor,)), "all")),
            time_word,
        ),
    )


def add_temporal_localization(
    record: QuestionRecord,
    time_word: str,
    anchor: str,
    graph: VideoGraph,
    registry: Registry,
    ontology: Ontology,
    seed: int = 0,
) -> QuestionRecord:
    """Wrap the record's program in a frame window anchored at `anchor`."""
    template = registry.templates[record.template_id]
    if not template.localizable:
        raise CompositionError(f"{record.template_id} does not allow localization")
    if time_word not in TIME_WORDS:
        raise CompositionError(f"bad time word {time_word!r}")
    if anchor not in graph.action_names():
        raise CompositionError(f"anchor {anchor!r} not in video")

    root = Node("localize", (localization_window(time_word, anchor), record.program.root))
    program = Program(root, record.template_id, count_steps(root))
    value = _result_or_reject(evaluate(program, graph))
    answer = realize_answer(template, value)
    if record.options is not None and answer not in record.options:
        raise EvaluationRejected(
            "undefined", f"localized answer {answer!r} not among options"
        )

    qid = make_qid(
        graph.video_id, record.template_id, record.bindings,
        variant=f"loc:{time_word}:{anchor}|base:{record.qid}",
    )
    base_pattern = _choose_frame(template, record.bindings, record.qid, ontology, seed)
    text = nlg.realize(
        base_pattern,
        template.slots,
        record.bindings,
        ontology,
        loc_phrase=nlg.localization_phrase(time_word, anchor, ontology),
    )
    return replace(
        record,
        qid=qid,
        text=text,
        answer=answer,
        program=program,
        steps=program.step_count,
        localization="answer-changed" if answer != record.answer else "answer-unchanged",
        direct_counterpart=record.qid,
        indirect_kind="temporal",
        loc_time=time_word,
        loc_anchor=anchor,
    )


def _direct_resolution_node(kind: str, value: str) -> Node:
    if kind == "action":
        return Node(
            "iterate", (Node("actions"), Node("named", (value,)), "all")
        )
    return Node("const", (kind, value))


def add_indirect(
    record: QuestionRecord,
    ref: IndirectRef,
    ref_bindings: dict[str, str],
    slot: str,
    graph: VideoGraph,
    registry: Registry,
    ontology: Ontology,
    seed: int = 0,
) -> QuestionRecord:
    """Swap a direct mention for `ref`'s resolving sub-program and phrase."""
    template = registry.templates[record.template_id]
    hosts = registry.hosts_for(ref)
    if hosts.get(record.template_id) != slot:
        raise CompositionError(f"{ref.id} cannot replace {slot!r} in {record.template_id}")
    if record.localization != "none" or record.indirect_kind is not None:
        raise CompositionError("record already carries a composition")
    target_value = record.bindings.get(slot)
    if target_value is None:
        raise CompositionError(f"record has no direct mention for slot {slot!r}")

    sub = substitute(ref.skeleton, ref_bindings)
    resolved = evaluate(sub, graph)
    if not isinstance(resolved, Answer):
        raise CompositionError(f"{ref.id} does not resolve on this video")
    resolved_value = resolved.value
    if isinstance(resolved_value, tuple):
        if len(resolved_value) != 1:
            raise CompositionError(f"{ref.id} resolves to {len(resolved_value)} elements")
        resolved_value = resolved_value[0]
    if not isinstance(resolved_value, Item) or resolved_value.name != target_value:
        found = resolved_value.name if isinstance(resolved_value, Item) else resolved_value
        raise CompositionError(
            f"{ref.id} resolves to {found!r}, record mentions {target_value!r}"
        )

    target_node = _direct_resolution_node(ref.kind, target_value)
    root, hits = replace_subtree(record.program.root, target_node, sub)
    if hits != 1:
        raise CompositionError(
            f"direct mention of {target_value!r} not found once in program"
        )
    program = Program(root, record.template_id, count_steps(root))
    value = _result_or_reject(evaluate(program, graph))
    answer = realize_answer(template, value)
    if answer != record.answer:
        raise CompositionError(
            f"indirect answer {answer!r} differs from direct {record.answer!r}"
        )

    phrase = nlg.realize(ref.phrase, ref.slots, ref_bindings, ontology) if ref.phrase else ""
    if phrase:
        phrase = phrase[0].lower() + phrase[1:]
    qid = make_qid(
        graph.video_id, record.template_id, record.bindings,
        variant=f"ind:{ref.id}:{slot}:"
        + ",".join(f"{k}={ref_bindings[k]}" for k in sorted(ref_bindings))
        + f"|base:{record.qid}",
    )
    if record.template_id in ref.host_frames:
        merged_slots = dict(template.slots) | ref.slots
        merged_bindings = dict(record.bindings) | ref_bindings
        text = nlg.realize(
            ref.host_frames[record.template_id], merged_slots, merged_bindings, ontology
        )
    else:
        base_pattern = _choose_frame(template, record.bindings, record.qid, ontology, seed)
        text = nlg.realize(
            base_pattern, template.slots, record.bindings, ontology,
            overrides={slot: phrase},
        )
    return replace(
        record,
        qid=qid,
        text=text,
        answer=answer,
        program=program,
        steps=program.step_count,
        direct_counterpart=record.qid,
        indirect_kind=ref.kind,
    )
