"""Graph cleanup passes: entailments, interval repair, consistency, propagation."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .graph import ActionSpan, FrameAnnotation, ObjectInstance, VideoGraph
from .ontology import Ontology, SequenceRule

DEFAULT_EPSILON = 0.1
SPARSITY_THRESHOLD = 0.60
CONSISTENCY_THRESHOLD = 0.95
VERTICAL = ("above", "beneath")


@dataclass
class AugmentReport:
    video_id: str
    entailments_added: int = 0
    synonyms_merged: int = 0
    intervals_adjusted: int = 0
    attention_stripped: int = 0
    spatial_flips: int = 0
    sparse_flagged: bool = False

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _rewrite_frames(
    graph: VideoGraph, frames: list[tuple[float, dict[str, frozenset[str]]]]
) -> VideoGraph:
    rebuilt = tuple(
        FrameAnnotation(
            timestamp=ts,
            objects=tuple(
                ObjectInstance(obj, rels) for obj, rels in sorted(instances.items())
            ),
        )
        for ts, instances in frames
    )
    return replace(graph, frames=rebuilt)


def _frame_map(graph: VideoGraph) -> list[tuple[float, dict[str, frozenset[str]]]]:
    return [
        (frame.timestamp, {inst.object_class: inst.relationships for inst in frame.objects})
        for frame in graph.frames
    ]


def apply_entailments(graph: VideoGraph, ontology: Ontology) -> VideoGraph:
    """Close every instance's relationship set under the entailment rules.

    Relationship rules chain (carrying -> holding -> touching) until a fixed
    point; action rules fire on instances of the action's object inside the
    covered frames. Never removes anything, so the pass is idempotent.
    """
    rel_rules: dict[str, tuple[str, ...]] = {}
    action_rules: dict[str, tuple[str, ...]] = {}
    for rule in ontology.entailment_rules:
        if rule.antecedent_kind == "relationship":
            rel_rules[rule.antecedent] = rule.consequents
        else:
            action_rules[rule.antecedent] = rule.consequents

    frames = _frame_map(graph)
    for ts, instances in frames:
        covering = [
            span for span in graph.actions if span.start <= ts <= span.end
        ]
        for obj, rels in instances.items():
            expanded = set(rels)
            for span in covering:
                action = ontology.action_classes.get(span.action_class)
                if action is None or action.object != obj:
                    continue
                expanded.update(action_rules.get(span.action_class, ()))
            changed = True
            while changed:
                changed = False
                for rel in list(expanded):
                    for consequent in rel_rules.get(rel, ()):
                        if consequent not in expanded:
                            expanded.add(consequent)
                            changed = True
            instances[obj] = frozenset(expanded)
    return _rewrite_frames(graph, frames)


def count_relationships(graph: VideoGraph) -> int:
    return sum(len(inst.relationships) for frame in graph.frames for inst in frame.objects)


def adjust_action_intervals(
    graph: VideoGraph,
    sequence_rules: list[SequenceRule],
    ontology: Ontology,
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[VideoGraph, int, list[str]]:
    """Force rule-matched same-object action pairs into strict sequence.

    Overlapping matched pairs get earlier.end = later.start - epsilon. Rules
    flagged insert_missing_earlier synthesize the missing earlier action just
    before a mid-video later action. Returns (graph, modifications, skipped).
    """
    by_class = ontology.action_classes
    class_for = {
        (a.verb, a.object): name for name, a in by_class.items() if a.object
    }
    spans = list(graph.actions)
    skipped: list[str] = []
    modified = 0

    def decomposed(span: ActionSpan) -> tuple[str | None, str | None]:
        action = by_class.get(span.action_class)
        if action is None:
            return None, None
        return action.verb, action.object

    for rule in sequence_rules:
        later_spans = [
            (i, s) for i, s in enumerate(spans) if decomposed(s)[0] == rule.later_verb
        ]
        for later_index, later in later_spans:
            later = spans[later_index]
            obj = decomposed(later)[1]
            if obj is None:
                continue
            earlier_candidates = [
                (i, s)
                for i, s in enumerate(spans)
                if i != later_index
                and decomposed(s) == (rule.earlier_verb, obj)
                and s.start < later.start
            ]
            if earlier_candidates:
                index, earlier = max(earlier_candidates, key=lambda pair: pair[1].start)
                if earlier.end >= later.start:
                    new_end = later.start - epsilon
                    if new_end <= earlier.start:
                        skipped.append(
                            f"{earlier.action_class} [{earlier.start}, {earlier.end}] "
                            f"cannot end before {later.action_class}"
                        )
                    else:
                        spans[index] = replace(earlier, end=round(new_end, 6))
                        modified += 1
            elif rule.insert_missing_earlier:
                name = class_for.get((rule.earlier_verb, obj))
                insert_end = later.start - epsilon
                insert_start = insert_end - epsilon
                if name is not None and insert_start > epsilon:
                    spans.append(ActionSpan(name, round(insert_start, 6), round(insert_end, 6)))
                    modified += 1
    ordered = tuple(sorted(spans, key=lambda s: (s.start, s.end, s.action_class)))
    return replace(graph, actions=ordered), modified, skipped


def repair_spatial_consistency(
    corpus: list[VideoGraph],
) -> tuple[list[VideoGraph], dict[str, int]]:
    """Normalize above/beneath per object class across the whole corpus.

    Classes whose majority convention covers more than 95% of annotations get
    the minority flipped; anything at or below 95% loses both relationships.
    Returns the rewritten corpus and per-video flip counts.
    """
    counts: dict[str, dict[str, int]] = {}
    for graph in corpus:
        for frame in graph.frames:
            for inst in frame.objects:
                for rel in VERTICAL:
                    if rel in inst.relationships:
                        counts.setdefault(inst.object_class, {"above": 0, "beneath": 0})
                        counts[inst.object_class][rel] += 1

    decision: dict[str, str | None] = {}
    for obj, tally in counts.items():
        total = tally["above"] + tally["beneath"]
        majority = "above" if tally["above"] >= tally["beneath"] else "beneath"
        if total and tally[majority] / total > CONSISTENCY_THRESHOLD:
            decision[obj] = majority
        else:
            decision[obj] = None  # drop both

    flips: dict[str, int] = {}
    repaired = []
    for graph in corpus:
        flips[graph.video_id] = 0
        frames = _frame_map(graph)
        for _, instances in frames:
            for obj, rels in instances.items():
                if obj not in decision or not (set(rels) & set(VERTICAL)):
                    continue
                keep = decision[obj]
                new_rels = set(rels) - set(VERTICAL)
                if keep is not None:
                    if keep not in rels:
                        flips[graph.video_id] += 1
                    new_rels.add(keep)
                instances[obj] = frozenset(new_rels)
        repaired.append(_rewrite_frames(graph, frames))
    return repaired, flips


def strip_attention(graph: VideoGraph, ontology: Ontology) -> VideoGraph:
    frames = _frame_map(graph)
    for _, instances in frames:
        for obj, rels in instances.items():
            instances[obj] = frozenset(rels - ontology.attention_relationships)
    return _rewrite_frames(graph, frames)


def flag_sparsity(graph: VideoGraph, threshold: float = SPARSITY_THRESHOLD) -> VideoGraph:
    spatial = {"above", "beneath", "in front of", "behind", "on the side of", "in"}
    total = 0
    with_spatial = 0
    for frame in graph.frames:
        for inst in frame.objects:
            total += 1
            if inst.relationships & spatial:
                with_spatial += 1
    sparse = True if total == 0 else (with_spatial / total) < threshold
    return replace(graph, sparse_spatial=sparse)


def propagate_annotations(graph: VideoGraph, ontology: Ontology | None = None) -> VideoGraph:
    """Copy objects seen inside an action span to the span's other frames.

    Copies carry contact and verb relationships only; spatial relationships
    never travel. Requires entailments to have run first.
    """
    propagatable = set()
    if ontology is not None:
        propagatable = {
            name
            for name, cat in ontology.relationship_classes.items()
            if cat in ("contact", "verb")
        }
    frames = _frame_map(graph)
    for span in graph.actions:
        inside = [
            i for i, (ts, _) in enumerate(frames) if span.start <= ts <= span.end
        ]
        if len(inside) < 2:
            continue
        union: dict[str, set[str]] = {}
        for i in inside:
            for obj, rels in frames[i][1].items():
                keep = {r for r in rels if r in propagatable} if ontology else set(rels)
                union.setdefault(obj, set()).update(keep)
        for i in inside:
            instances = frames[i][1]
            for obj, rels in union.items():
                if obj not in instances and rels:
                    instances[obj] = frozenset(rels)
    return _rewrite_frames(graph, frames)


def augment_graph(
    graph: VideoGraph,
    ontology: Ontology,
    epsilon: float = DEFAULT_EPSILON,
    synonyms_merged: int = 0,
) -> tuple[VideoGraph, AugmentReport]:
    """Run every per-video pass (consistency repair is corpus-level, see augment_corpus)."""
    report = AugmentReport(video_id=graph.video_id, synonyms_merged=synonyms_merged)

    before = count_relationships(graph)
    graph = apply_entailments(graph, ontology)
    # Propagated copies can land inside other spans and trigger fresh action
    # entailments, so iterate the pair to a fixed point.
    while True:
        stepped = propagate_annotations(graph, ontology)
        stepped = apply_entailments(stepped, ontology)
        if stepped == graph:
            break
        graph = stepped
    report.entailments_added = count_relationships(graph) - before

    before = count_relationships(graph)
    graph = strip_attention(graph, ontology)
    report.attention_stripped = before - count_relationships(graph)

    graph, modified, _ = adjust_action_intervals(
        graph, ontology.sequence_rules, ontology, epsilon
    )
    report.intervals_adjusted = modified

    # Inserted or shifted spans can cover frames they did not before; re-close
    # entailments so a second pipeline run finds nothing left to add.
    while True:
        stepped = apply_entailments(propagate_annotations(graph, ontology), ontology)
        if stepped == graph:
            break
        graph = stepped

    graph = flag_sparsity(graph)
    report.sparse_flagged = graph.sparse_spatial
    return graph, report


def augment_corpus(
    corpus: list[VideoGraph],
    ontology: Ontology,
    epsilon: float = DEFAULT_EPSILON,
    merge_counts: dict[str, int] | None = None,
) -> tuple[list[VideoGraph], list[AugmentReport]]:
    """Full pipeline: entail -> consistency -> propagate -> strip -> adjust -> flag."""
    entailed = [apply_entailments(graph, ontology) for graph in corpus]
    repaired, flips = repair_spatial_consistency(entailed)
    graphs = []
    reports = []
    for graph in repaired:
        merged = (merge_counts or {}).get(graph.video_id, 0)
        final, report = augment_graph(graph, ontology, epsilon, synonyms_merged=merged)
        report.spatial_flips = flips.get(graph.video_id, 0)
        graphs.append(final)
        reports.append(report)
    return graphs, reports
