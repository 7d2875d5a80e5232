"""Candidate enumeration, quality filtering, and unbalanced corpus generation."""

from __future__ import annotations

import hashlib
import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field

from . import analysis, nlg
from .graph import VideoGraph
from .ontology import Ontology
from .templates import (
    CompositionError,
    EvaluationRejected,
    QuestionRecord,
    Registry,
    add_indirect,
    add_temporal_localization,
    instantiate,
    make_qid,
)

RARE_PAIR_MIN = 10
DURATION_MARGIN_SECONDS = 7.0

# Filter order is part of the external contract: rejection logs record only the
# first failing reason, structural checks before corpus-statistics checks.
FILTER_ORDER = (
    "grammar",
    "confusing-relationship",
    "similar-objects",
    "blacklist",
    "answer-in-question",
    "unrealistic-decoy",
    "duration-margin",
    "rare-pair",
    "single-global-answer",
)


@dataclass
class GeneratorConfig:
    per_video_cap: int = 10_000
    decoy_objects: int = 4
    decoy_relationships: int = 3
    choose_decoys: int = 2
    loc_anchors: int = 3
    indirect_per_base: int = 2

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Candidate:
    template_id: str
    bindings: tuple[tuple[str, str], ...]
    loc: tuple[str, str] | None = None  # (time word, anchor action)
    indirect: tuple[str, str] | None = None  # (ref id, slot)

    def binding_map(self) -> dict[str, str]:
        return dict(self.bindings)


@dataclass
class Rejection:
    qid: str
    video_id: str
    template_id: str
    text: str
    reason: str

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CorpusStats:
    pair_counts: dict[tuple[str, str], int] = field(default_factory=dict)
    answer_global: dict[str, Counter] = field(default_factory=dict)
    single_answer_categories: set[str] = field(default_factory=set)

    def pair_count(self, obj: str, rel: str) -> int:
        return self.pair_counts.get((obj, rel), 0)


def _video_rng(seed: int, video_id: str) -> random.Random:
    digest = hashlib.sha1(f"{seed}|{video_id}".encode()).hexdigest()
    return random.Random(int(digest[:16], 16))


def _cat_key(record: QuestionRecord) -> str:
    return "/".join(record.content_category())


def category_key(record: QuestionRecord) -> str:
    return _cat_key(record)


# ---------------------------------------------------------------------------
# Enumeration


def _graph_shape(graph: VideoGraph, ontology: Ontology):
    objects = graph.object_classes()
    rels = [
        r
        for r in graph.relationship_names()
        if ontology.knows_relationship(r)
        and not (graph.sparse_spatial and ontology.relationship_category(r) == "spatial")
    ]
    spans = sorted(graph.actions, key=lambda s: (s.start, s.end, s.action_class))
    class_counts = Counter(s.action_class for s in spans)
    unique_actions = [
        name for name in graph.action_names() if class_counts[name] == 1
    ]
    rel_objects: dict[str, list[str]] = {}
    for frame in graph.frames:
        for inst in frame.objects:
            for rel in inst.relationships:
                rel_objects.setdefault(rel, [])
                if inst.object_class not in rel_objects[rel]:
                    rel_objects[rel].append(inst.object_class)
    for rel in rel_objects:
        rel_objects[rel].sort()
    return objects, rels, unique_actions, rel_objects


def enumerate_candidates(
    graph: VideoGraph,
    registry: Registry,
    ontology: Ontology,
    config: GeneratorConfig | None = None,
    seed: int = 0,
) -> list[Candidate]:
    """All kind-correct bindings for every template, plus localization and
    indirect variants, reservoir-capped per video."""
    config = config or GeneratorConfig()
    rng = _video_rng(seed, graph.video_id)
    objects, rels, unique_actions, rel_objects = _graph_shape(graph, ontology)
    if not objects and not graph.actions:
        return []
    vocab_objects = sorted(ontology.object_classes)
    vocab_rels = [
        r
        for r in ontology.askable_relationships()
        if not (graph.sparse_spatial and ontology.relationship_category(r) == "spatial")
    ]
    absent_objects = [o for o in vocab_objects if o not in objects]
    absent_rels = [r for r in vocab_rels if r not in rels]

    def sample(pool: list[str], k: int) -> list[str]:
        if len(pool) <= k:
            return list(pool)
        return sorted(rng.sample(pool, k))

    def direct(template_id: str, **bindings: str) -> Candidate:
        return Candidate(template_id, tuple(sorted(bindings.items())))

    out: list[Candidate] = []
    for template in sorted(registry.templates.values(), key=lambda t: t.id):
        tid = template.id
        if tid == "objExists":
            for o in objects + sample(absent_objects, config.decoy_objects):
                out.append(direct(tid, object=o))
        elif tid == "objRelExists":
            for r in rels:
                for o in objects:
                    out.append(direct(tid, relationship=r, object=o))
        elif tid == "relExists":
            for r in rels + sample(absent_rels, config.decoy_relationships):
                out.append(direct(tid, relationship=r))
        elif tid == "actExists":
            for a in sorted(ontology.action_classes):
                out.append(direct(tid, action=a))
        elif tid in ("andObjRelExists", "xorObjRelExists"):
            for r in rels:
                related = set(rel_objects.get(r, []))
                for o1 in objects:
                    for o2 in objects:
                        if o1 == o2:
                            continue
                        if tid == "xorObjRelExists" and o2 in related and o1 not in related:
                            continue  # keep "X but not Y" aligned with xor truth
                        out.append(direct(tid, relationship=r, object=o1, object2=o2))
        elif tid == "objWhatGeneral":
            out.append(direct(tid))
        elif tid == "objWhat":
            for r in rels:
                out.append(direct(tid, relationship=r))
        elif tid == "objWhatChoose":
            for r in rels:
                related = rel_objects.get(r, [])
                decoys = [o for o in objects if o not in related]
                decoys += sample(absent_objects, config.choose_decoys)
                for o1 in related:
                    for o2 in decoys[: config.choose_decoys + 2]:
                        out.append(direct(tid, relationship=r, object=o1, object2=o2))
                        out.append(direct(tid, relationship=r, object=o2, object2=o1))
        elif tid in ("actWhatAfterAll", "actWhatBefore"):
            for a in unique_actions:
                out.append(direct(tid, action=a))
        elif tid in ("objFirst", "objLast"):
            for r in sorted(set(rels) & set(rel_objects)):
                out.append(direct(tid, relationship=r))
        elif tid in ("objFirstChoose", "objLastChoose"):
            for r in sorted(set(rels) & set(rel_objects)):
                related = rel_objects[r]
                for o1 in related:
                    for o2 in related:
                        if o1 != o2:
                            out.append(direct(tid, relationship=r, object=o1, object2=o2))
        elif tid in ("objFirstVerify", "objLastVerify"):
            for r in sorted(set(rels) & set(rel_objects)):
                for o in rel_objects[r]:
                    out.append(direct(tid, relationship=r, object=o))
        elif tid in ("actFirst", "actLast", "actLongest", "actShortest"):
            if len(graph.actions) >= 2:
                out.append(direct(tid))
        elif tid in (
            "actLengthLongerCompare",
            "actLengthShorterCompare",
            "actLengthLongerVerify",
            "actLengthShorterVerify",
            "actTime",
        ):
            for a1 in unique_actions:
                for a2 in unique_actions:
                    if a1 != a2:
                        out.append(direct(tid, action=a1, action2=a2))
        elif tid == "relTime":
            for r in rels:
                for a in unique_actions:
                    out.append(direct(tid, relationship=r, action=a))
        elif tid == "objTime":
            for o in objects:
                for a in unique_actions:
                    out.append(direct(tid, object=o, action=a))

    # Localization variants on localizable templates.
    localized: list[Candidate] = []
    for candidate in out:
        template = registry.templates[candidate.template_id]
        if not template.localizable or not unique_actions:
            continue
        anchors = sample(unique_actions, config.loc_anchors)
        for time_word in ("before", "after", "while"):
            for anchor in anchors:
                localized.append(
                    Candidate(candidate.template_id, candidate.bindings, loc=(time_word, anchor))
                )
    out.extend(localized)

    # Indirect-reference variants on host templates.
    indirect: list[Candidate] = []
    for candidate in out:
        if candidate.loc is not None:
            continue
        for ref in sorted(registry.indirect_refs.values(), key=lambda r: r.id):
            slot = registry.hosts_for(ref).get(candidate.template_id)
            if slot is not None:
                indirect.append(
                    Candidate(
                        candidate.template_id, candidate.bindings, indirect=(ref.id, slot)
                    )
                )
    out.extend(indirect)

    if len(out) > config.per_video_cap:
        # Seeded reservoir keeps a uniform subsample in enumeration order.
        chosen: list[tuple[int, Candidate]] = []
        for index, candidate in enumerate(out):
            if index < config.per_video_cap:
                chosen.append((index, candidate))
            else:
                j = rng.randint(0, index)
                if j < config.per_video_cap:
                    chosen[j] = (index, candidate)
        chosen.sort(key=lambda pair: pair[0])
        out = [c for _, c in chosen]
    return out


# ---------------------------------------------------------------------------
# Candidate construction


def _ref_binding_options(
    ref_id: str,
    slot: str,
    bindings: dict[str, str],
    graph: VideoGraph,
    ontology: Ontology,
) -> list[dict[str, str]]:
    """Plausible slot fillers for an indirect reference, cheapest scan first."""
    if ref_id in ("objectWithRel", "objectWithRelFirst", "objectWithRelLast"):
        target = bindings.get(slot)
        rels = set()
        for frame in graph.frames:
            for inst in frame.objects:
                if inst.object_class == target:
                    rels.update(
                        r
                        for r in inst.relationships
                        if r not in ontology.confusing_relationships
                    )
        rels.discard(bindings.get("relationship"))
        return [{"irel": r} for r in sorted(rels)]
    if ref_id in ("longestAction", "shortestAction"):
        return [{}]
    if ref_id == "relOnObject":
        return [{"iobject": o} for o in graph.object_classes()]
    return []


def build_records(
    graph: VideoGraph,
    candidates: list[Candidate],
    registry: Registry,
    ontology: Ontology,
    seed: int,
    config: GeneratorConfig | None = None,
) -> tuple[list[QuestionRecord], list[Rejection], Counter]:
    """Instantiate candidates; Ambiguous evaluations are logged, Undefined and
    unresolvable compositions are dropped and counted."""
    config = config or GeneratorConfig()
    records: list[QuestionRecord] = []
    rejections: list[Rejection] = []
    drops: Counter = Counter()
    indirect_built: Counter = Counter()

    def log_reject(candidate: Candidate, reason: str, text: str = "") -> None:
        variant = ""
        if candidate.loc:
            variant = f"loc:{candidate.loc[0]}:{candidate.loc[1]}"
        if candidate.indirect:
            variant = f"ind:{candidate.indirect[0]}"
        rejections.append(
            Rejection(
                qid=make_qid(
                    graph.video_id, candidate.template_id, candidate.binding_map(), variant
                ),
                video_id=graph.video_id,
                template_id=candidate.template_id,
                text=text,
                reason=reason,
            )
        )

    for candidate in candidates:
        template = registry.templates[candidate.template_id]
        bindings = candidate.binding_map()
        try:
            base = instantiate(template, bindings, graph, seed, ontology)
        except EvaluationRejected as rejected:
            if candidate.loc is None and candidate.indirect is None:
                if rejected.kind == "ambiguous":
                    log_reject(candidate, "multiple-answers")
                else:
                    drops["undefined"] += 1
            else:
                drops["base-unavailable"] += 1
            continue
        except nlg.GrammarError:
            log_reject(candidate, "grammar")
            continue

        if candidate.loc is not None:
            time_word, anchor = candidate.loc
            try:
                record = add_temporal_localization(
                    base, time_word, anchor, graph, registry, ontology, seed
                )
            except EvaluationRejected as rejected:
                if rejected.kind == "ambiguous":
                    log_reject(candidate, "multiple-answers")
                else:
                    drops["undefined"] += 1
                continue
            except (CompositionError, nlg.GrammarError):
                drops["composition"] += 1
                continue
            records.append(record)
        elif candidate.indirect is not None:
            ref_id, slot = candidate.indirect
            ref = registry.indirect_refs[ref_id]
            base_key = (base.qid,)
            built = 0
            for ref_bindings in _ref_binding_options(ref_id, slot, bindings, graph, ontology):
                if indirect_built[base_key] >= config.indirect_per_base:
                    break
                try:
                    record = add_indirect(
                        base, ref, ref_bindings, slot, graph, registry, ontology, seed
                    )
                except EvaluationRejected as rejected:
                    if rejected.kind == "ambiguous":
                        log_reject(candidate, "multiple-answers")
                    else:
                        drops["undefined"] += 1
                    continue
                except (CompositionError, nlg.GrammarError):
                    drops["composition"] += 1
                    continue
                records.append(record)
                indirect_built[base_key] += 1
                built += 1
            if built == 0:
                drops["no-indirect"] += 1
        else:
            records.append(base)
    return records, rejections, drops


# ---------------------------------------------------------------------------
# Quality filtering


def corpus_pair_counts(graphs: list[VideoGraph]) -> dict[tuple[str, str], int]:
    counts: Counter = Counter()
    for graph in graphs:
        for frame in graph.frames:
            for inst in frame.objects:
                for rel in inst.relationships:
                    counts[(inst.object_class, rel)] += 1
    return dict(counts)


def build_stats(
    graphs: list[VideoGraph], records: list[QuestionRecord]
) -> CorpusStats:
    stats = CorpusStats(pair_counts=corpus_pair_counts(graphs))
    for record in records:
        key = _cat_key(record)
        stats.answer_global.setdefault(key, Counter())[record.answer] += 1
    stats.single_answer_categories = {
        key for key, answers in stats.answer_global.items() if len(answers) == 1
    }
    return stats


def _answer_in_text(answer: str, text: str) -> bool:
    return re.search(rf"\b{re.escape(answer.lower())}\b", text.lower()) is not None


def _durations(graph: VideoGraph) -> dict[str, float]:
    return {
        span.action_class: span.duration
        for span in graph.actions
    }


def quality_filter(
    record: QuestionRecord,
    stats: CorpusStats,
    ontology: Ontology,
    graph: VideoGraph,
) -> Rejection | None:
    """None means keep; otherwise the first failing filter in FILTER_ORDER."""
    root = record.program.root

    def reject(reason: str) -> Rejection:
        return Rejection(
            qid=record.qid,
            video_id=record.video_id,
            template_id=record.template_id,
            text=record.text,
            reason=reason,
        )

    if "<" in record.text or not record.text.endswith("?") or not record.answer:
        return reject("grammar")

    if analysis.program_relationships(root) & ontology.confusing_relationships:
        return reject("confusing-relationship")

    mentioned = analysis.mentioned_objects(record)
    if record.answer in ontology.object_classes:
        mentioned.add(record.answer)
    for pair in ontology.similar_objects:
        if pair <= mentioned:
            return reject("similar-objects")

    for obj, rel in analysis.record_pairs(record):
        if ontology.is_blacklisted(obj, rel):
            return reject("blacklist")

    if record.answer_type == "open" and _answer_in_text(record.answer, record.text):
        return reject("answer-in-question")

    if record.template_id == "actExists" and record.answer == "no":
        action = ontology.action_classes[record.bindings["action"]]
        video_verbs = {
            ontology.action_classes[s.action_class].verb for s in graph.actions
        }
        video_objects = set(graph.object_classes())
        video_objects.update(
            ontology.action_classes[s.action_class].object
            for s in graph.actions
            if ontology.action_classes[s.action_class].object
        )
        shares_verb = action.verb in video_verbs
        shares_object = action.object is not None and action.object in video_objects
        if not (shares_verb or shares_object):
            return reject("unrealistic-decoy")

    margin_checks = analysis.duration_margin_checks(root)
    if margin_checks:
        durations = _durations(graph)
        for kind, payload in margin_checks:
            if kind == "pair":
                a, b = payload
                if a not in durations or b not in durations:
                    return reject("duration-margin")
                if abs(durations[a] - durations[b]) <= DURATION_MARGIN_SECONDS:
                    return reject("duration-margin")
            else:
                values = sorted(durations.values())
                if len(values) < 2:
                    return reject("duration-margin")
                extreme_gap = (
                    values[-1] - values[-2] if payload == "most" else values[1] - values[0]
                )
                if extreme_gap < DURATION_MARGIN_SECONDS:
                    return reject("duration-margin")

    for obj, rel in analysis.record_pairs(record):
        if stats.pair_count(obj, rel) < RARE_PAIR_MIN:
            return reject("rare-pair")

    if record.answer_type == "open" and _cat_key(record) in stats.single_answer_categories:
        return reject("single-global-answer")

    return None


# ---------------------------------------------------------------------------
# Corpus generation


@dataclass
class GenerationResult:
    records: list[QuestionRecord]
    rejections: list[Rejection]
    stats: CorpusStats
    manifest: dict


def config_hash(payload: dict) -> str:
    return hashlib.sha1(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]


def _video_candidates(args) -> tuple[list[QuestionRecord], list[Rejection], Counter]:
    graph, registry, ontology, seed, config = args
    candidates = enumerate_candidates(graph, registry, ontology, config, seed)
    return build_records(graph, candidates, registry, ontology, seed, config)


def generate_corpus(
    graphs: list[VideoGraph],
    registry: Registry,
    ontology: Ontology,
    seed: int = 0,
    config: GeneratorConfig | None = None,
    workers: int = 1,
) -> GenerationResult:
    config = config or GeneratorConfig()
    graphs = sorted(graphs, key=lambda g: g.video_id)
    by_video = {g.video_id: g for g in graphs}

    candidate_records: list[QuestionRecord] = []
    rejections: list[Rejection] = []
    drops: Counter = Counter()
    jobs = [(graph, registry, ontology, seed, config) for graph in graphs]
    if workers > 1 and len(graphs) > 1:
        import multiprocessing

        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_video_candidates, jobs)
    else:
        results = [_video_candidates(job) for job in jobs]
    for records, evaluation_rejections, video_drops in results:
        candidate_records.extend(records)
        rejections.extend(evaluation_rejections)
        drops.update(video_drops)

    stats = build_stats(graphs, candidate_records)

    kept: list[QuestionRecord] = []
    for record in candidate_records:
        verdict = quality_filter(record, stats, ontology, by_video[record.video_id])
        if verdict is None:
            kept.append(record)
        else:
            rejections.append(verdict)

    reason_counts = Counter(r.reason for r in rejections)
    manifest = {
        "seed": seed,
        "config": config.to_json(),
        "config_hash": config_hash({"seed": seed, **config.to_json()}),
        "videos": len(graphs),
        "candidates_built": len(candidate_records),
        "emitted": len(kept),
        "rejections": dict(sorted(reason_counts.items())),
        "dropped": dict(sorted(drops.items())),
        "by_template": dict(sorted(Counter(r.template_id for r in kept).items())),
        "by_structure": dict(sorted(Counter(r.structure for r in kept).items())),
        "by_answer_type": dict(sorted(Counter(r.answer_type for r in kept).items())),
    }
    return GenerationResult(kept, rejections, stats, manifest)
