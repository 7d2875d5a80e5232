"""Deterministic synthetic scene-graph generation for desk-scale pipeline runs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .graph import ActionSpan, FrameAnnotation, ObjectInstance, VideoGraph, validate
from .ontology import Ontology


class SynthError(ValueError):
    """Parameters cannot produce a valid graph."""


# Contact relationships plausible for each object, most likely first. Weights
# decay by position so corpus-wide pair counts concentrate on the head pairs
# and the rare-pair filter has both sides to work with.
PLAUSIBLE_CONTACT: dict[str, list[str]] = {
    "bag": ["carrying", "holding", "touching"],
    "bed": ["lying on", "sitting on", "touching"],
    "blanket": ["holding", "covered by", "carrying", "touching", "twisting"],
    "book": ["holding", "touching", "carrying"],
    "bottle": ["holding", "twisting", "drinking from", "touching", "carrying"],
    "box": ["carrying", "holding", "touching"],
    "broom": ["holding", "touching", "carrying"],
    "chair": ["sitting on", "leaning on", "touching", "standing on"],
    "closet": ["touching", "leaning on"],
    "clothes": ["holding", "wearing", "touching", "carrying"],
    "cup": ["holding", "drinking from", "touching"],
    "dish": ["holding", "wiping", "touching", "carrying"],
    "door": ["touching", "leaning on"],
    "doorknob": ["holding", "touching", "twisting"],
    "doorway": ["touching", "leaning on"],
    "floor": ["standing on", "sitting on", "lying on"],
    "food": ["eating", "holding", "touching"],
    "laptop": ["holding", "touching"],
    "light": ["touching"],
    "medicine": ["eating", "holding", "touching"],
    "mirror": ["touching", "wiping"],
    "paper": ["holding", "carrying", "touching", "writing on"],
    "phone": ["holding", "touching", "carrying"],
    "picture": ["holding", "touching", "carrying"],
    "refrigerator": ["touching"],
    "shelf": ["touching", "wiping"],
    "shoe": ["wearing", "holding", "touching"],
    "sofa": ["sitting on", "lying on", "leaning on", "touching"],
    "table": ["touching", "wiping", "leaning on"],
    "television": ["touching"],
    "vacuum": ["holding", "touching"],
    "window": ["touching", "wiping"],
}

HORIZONTAL_SPATIAL = ["in front of", "behind", "on the side of", "in"]


@dataclass
class SynthParams:
    ontology: Ontology
    frames: int = 6
    objects_per_frame: int = 3
    actions: int = 4
    duration: float = 30.0
    pool_size: int = 4
    co_occurrence: dict[str, list[str]] = field(default_factory=dict)
    attention_prob: float = 0.15
    spatial_prob: float = 0.75
    vertical_noise: float = 0.03
    overlap_prob: float = 0.35

    def contact_table(self) -> dict[str, list[str]]:
        if self.co_occurrence:
            return self.co_occurrence
        return {
            obj: rels
            for obj, rels in PLAUSIBLE_CONTACT.items()
            if obj in self.ontology.object_classes
        }


def _weighted_choice(rng: random.Random, options: list[str]) -> str:
    weights = [2.0 ** (len(options) - i) for i in range(len(options))]
    return rng.choices(options, weights=weights, k=1)[0]


def _dominant_vertical(obj: str) -> str:
    # Stable per-class convention so the consistency repair normally finds >95%.
    return "beneath" if (sum(map(ord, obj)) % 2 == 0) else "above"


def synth_graph(seed: int, params: SynthParams) -> VideoGraph:
    """Generate one validated graph; identical seeds give identical graphs."""
    ontology = params.ontology
    table = params.contact_table()
    if not table:
        raise SynthError("no object classes with plausible relationships")
    if params.frames < 1 or params.actions < 0 or params.duration <= 1.0:
        raise SynthError("frames >= 1, actions >= 0, duration > 1 required")

    rng = random.Random(seed)
    pool = sorted(rng.sample(sorted(table), min(params.pool_size, len(table))))

    timestamps = sorted(
        rng.uniform(0.5, params.duration - 0.5) for _ in range(params.frames)
    )
    for i in range(1, len(timestamps)):
        if timestamps[i] - timestamps[i - 1] < 1e-3:
            timestamps[i] = timestamps[i - 1] + 1e-3
    timestamps = [round(min(t, params.duration), 3) for t in timestamps]

    frame_objects: list[dict[str, set[str]]] = []
    for _ in timestamps:
        chosen = rng.sample(pool, rng.randint(1, min(params.objects_per_frame, len(pool))))
        instances: dict[str, set[str]] = {}
        for obj in sorted(chosen):
            rels = {_weighted_choice(rng, table[obj])}
            if rng.random() < 0.4:
                rels.add(_weighted_choice(rng, table[obj]))
            if rng.random() < params.spatial_prob:
                vertical = _dominant_vertical(obj)
                if rng.random() < params.vertical_noise:
                    vertical = "above" if vertical == "beneath" else "beneath"
                rels.add(vertical)
                if rng.random() < 0.5:
                    rels.add(rng.choice(HORIZONTAL_SPATIAL))
            if rng.random() < params.attention_prob:
                rels.add("looking at")
            instances[obj] = rels
        frame_objects.append(instances)

    # Actions anchored to frames so every span covers at least one annotation.
    spans: list[ActionSpan] = []
    families = [
        obj for obj in pool if f"holding a {obj}" in ontology.action_classes
    ]
    by_object: dict[str, list[str]] = {}
    for name, action in sorted(ontology.action_classes.items()):
        if action.object:
            by_object.setdefault(action.object, []).append(name)

    def clamp_span(name: str, start: float, end: float) -> ActionSpan | None:
        start = max(0.0, round(start, 3))
        end = min(params.duration, round(end, 3))
        if end - start < 0.4:
            return None
        return ActionSpan(name, start, end)

    remaining = params.actions
    if families and remaining >= 3 and rng.random() < 0.8:
        obj = rng.choice(families)
        anchor = rng.choice(timestamps)
        take_len = rng.uniform(1.0, 6.0)
        hold_len = rng.uniform(2.0, 14.0)
        put_len = rng.uniform(1.0, 6.0)
        take_start = max(0.0, anchor - take_len / 2)
        take_end = take_start + take_len
        hold_start = take_end - (rng.uniform(0.2, 1.5) if rng.random() < params.overlap_prob else -0.3)
        hold_end = hold_start + hold_len
        put_start = hold_end - (rng.uniform(0.2, 1.5) if rng.random() < params.overlap_prob else -0.3)
        put_end = put_start + put_len
        for name, s, e in (
            (f"taking a {obj} from somewhere", take_start, take_end),
            (f"holding a {obj}", hold_start, hold_end),
            (f"putting a {obj} somewhere", put_start, put_end),
        ):
            span = clamp_span(name, s, e)
            if span is not None:
                spans.append(span)
                remaining -= 1

    candidates = sorted(
        name
        for name, action in ontology.action_classes.items()
        if action.object is None or action.object in pool
    )
    while remaining > 0 and candidates:
        name = rng.choice(candidates)
        if any(s.action_class == name for s in spans):
            remaining -= 1
            continue
        anchor = rng.choice(timestamps)
        start = anchor - rng.uniform(0.3, 9.0)
        end = anchor + rng.uniform(0.3, 9.0)
        span = clamp_span(name, start, end)
        if span is not None:
            spans.append(span)
        remaining -= 1

    # Make sure each span covers a frame and its object is annotated there.
    covered_spans = []
    for span in spans:
        inside = [t for t in timestamps if span.start <= t <= span.end]
        if not inside:
            nearest = min(timestamps, key=lambda t: min(abs(t - span.start), abs(t - span.end)))
            start = min(span.start, nearest - 0.1)
            end = max(span.end, nearest + 0.1)
            adjusted = clamp_span(span.action_class, start, end)
            if adjusted is None:
                continue
            span = adjusted
            inside = [t for t in timestamps if span.start <= t <= span.end]
            if not inside:
                continue
        action = ontology.action_classes[span.action_class]
        if action.object and action.object in table:
            frame_index = timestamps.index(rng.choice(inside))
            frame_objects[frame_index].setdefault(
                action.object, {_weighted_choice(rng, table[action.object])}
            )
        covered_spans.append(span)

    frames = tuple(
        FrameAnnotation(
            timestamp=t,
            objects=tuple(
                ObjectInstance(obj, frozenset(rels))
                for obj, rels in sorted(frame_objects[i].items())
            ),
        )
        for i, t in enumerate(timestamps)
    )
    graph = VideoGraph(
        video_id=f"synth-{seed:06d}",
        duration=params.duration,
        frames=frames,
        actions=tuple(sorted(covered_spans, key=lambda s: (s.start, s.end, s.action_class))),
    )
    problems = validate(graph, ontology)
    if problems:
        raise SynthError(f"generator produced invalid graph: {problems}")
    return graph


def synth_corpus(count: int, seed: int, params: SynthParams) -> list[VideoGraph]:
    return [synth_graph(seed * 100_003 + i, params) for i in range(count)]
