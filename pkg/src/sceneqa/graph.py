"""Spatio-temporal scene graph data model, ingestion, and validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .ontology import Ontology


class SchemaError(ValueError):
    """A scene-graph document is missing a required field or has the wrong shape."""


class VocabularyError(ValueError):
    """A name survives merge mapping but is not in the ontology."""


class ValidationError(ValueError):
    """A parsed, vocabulary-valid graph violates a structural invariant."""


@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str

    def to_json(self) -> dict:
        return {"rule": self.rule, "detail": self.detail}


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class ObjectInstance:
    """One object in one frame; the relationship subject is always the person."""

    object_class: str
    relationships: frozenset[str] = frozenset()
    bbox: BBox | None = None

    def with_relationships(self, relationships: frozenset[str]) -> "ObjectInstance":
        return replace(self, relationships=relationships)


@dataclass(frozen=True)
class FrameAnnotation:
    timestamp: float
    objects: tuple[ObjectInstance, ...] = ()


@dataclass(frozen=True)
class ActionSpan:
    action_class: str
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class VideoGraph:
    video_id: str
    duration: float
    frames: tuple[FrameAnnotation, ...] = ()
    actions: tuple[ActionSpan, ...] = ()
    sparse_spatial: bool = False

    def object_classes(self) -> list[str]:
        """Distinct object classes, ordered by first appearance then name."""
        seen: dict[str, float] = {}
        for frame in self.frames:
            for inst in frame.objects:
                seen.setdefault(inst.object_class, frame.timestamp)
        return [name for name, _ in sorted(seen.items(), key=lambda kv: (kv[1], kv[0]))]

    def relationship_names(self) -> list[str]:
        seen: dict[str, float] = {}
        for frame in self.frames:
            for inst in frame.objects:
                for rel in inst.relationships:
                    seen.setdefault(rel, frame.timestamp)
        return [name for name, _ in sorted(seen.items(), key=lambda kv: (kv[1], kv[0]))]

    def action_names(self) -> list[str]:
        seen: dict[str, float] = {}
        for span in sorted(self.actions, key=lambda s: (s.start, s.action_class)):
            seen.setdefault(span.action_class, span.start)
        return list(seen)


def validate(graph: VideoGraph, ontology: Ontology | None = None) -> list[Violation]:
    """Check every structural invariant; violations are data, not exceptions."""
    violations: list[Violation] = []
    previous = None
    for index, frame in enumerate(graph.frames):
        if not 0.0 <= frame.timestamp <= graph.duration:
            violations.append(
                Violation(
                    "timestamp-out-of-range",
                    f"frame {index} at {frame.timestamp} outside [0, {graph.duration}]",
                )
            )
        if previous is not None and frame.timestamp <= previous:
            violations.append(
                Violation(
                    "frames-not-sorted",
                    f"frame {index} at {frame.timestamp} not after {previous}",
                )
            )
        previous = frame.timestamp
        seen_classes = set()
        for inst in frame.objects:
            if inst.object_class in seen_classes:
                violations.append(
                    Violation(
                        "duplicate-object",
                        f"frame {index} has {inst.object_class!r} more than once",
                    )
                )
            seen_classes.add(inst.object_class)
            if inst.bbox is not None:
                box = inst.bbox
                inside = 0.0 <= box.x <= 1.0 and 0.0 <= box.y <= 1.0
                if not inside or box.w <= 0 or box.h <= 0 or box.x + box.w > 1.0 or box.y + box.h > 1.0:
                    violations.append(
                        Violation(
                            "bbox-out-of-range",
                            f"frame {index} object {inst.object_class!r} bbox {box}",
                        )
                    )
            if ontology is not None:
                if not ontology.knows_object(inst.object_class):
                    violations.append(
                        Violation("unknown-object", f"{inst.object_class!r} in frame {index}")
                    )
                for rel in inst.relationships:
                    if not ontology.knows_relationship(rel):
                        violations.append(
                            Violation("unknown-relationship", f"{rel!r} in frame {index}")
                        )
    for span in graph.actions:
        if not (0.0 <= span.start < span.end <= graph.duration):
            violations.append(
                Violation(
                    "action-interval-invalid",
                    f"{span.action_class!r} spans [{span.start}, {span.end}]",
                )
            )
        if ontology is not None and not ontology.knows_action(span.action_class):
            violations.append(Violation("unknown-action", f"{span.action_class!r}"))
    return violations


def _canonicalize(graph: VideoGraph, ontology: Ontology) -> VideoGraph:
    """Apply the merge map everywhere, collapsing duplicate instances it creates."""
    frames = []
    for frame in graph.frames:
        merged: dict[str, ObjectInstance] = {}
        for inst in frame.objects:
            name = ontology.canonical(inst.object_class)
            rels = frozenset(ontology.canonical(r) for r in inst.relationships)
            if name in merged:
                merged[name] = merged[name].with_relationships(
                    merged[name].relationships | rels
                )
            else:
                merged[name] = ObjectInstance(name, rels, inst.bbox)
        frames.append(FrameAnnotation(frame.timestamp, tuple(merged.values())))
    actions = tuple(
        ActionSpan(ontology.canonical(span.action_class), span.start, span.end)
        for span in graph.actions
    )
    return replace(graph, frames=tuple(frames), actions=actions)


def _check_vocabulary(graph: VideoGraph, ontology: Ontology) -> None:
    for frame in graph.frames:
        for inst in frame.objects:
            if not ontology.knows_object(inst.object_class):
                raise VocabularyError(
                    f"{graph.video_id}: unknown object {inst.object_class!r}"
                )
            for rel in inst.relationships:
                if not ontology.knows_relationship(rel):
                    raise VocabularyError(f"{graph.video_id}: unknown relationship {rel!r}")
    for span in graph.actions:
        if not ontology.knows_action(span.action_class):
            raise VocabularyError(f"{graph.video_id}: unknown action {span.action_class!r}")


def graph_from_json(payload: dict, ontology: Ontology) -> VideoGraph:
    """Parse one scene-graph document, canonicalize names, and validate."""
    try:
        video_id = payload["video_id"]
        duration = float(payload["duration"])
        frames = tuple(
            FrameAnnotation(
                timestamp=float(frame["timestamp"]),
                objects=tuple(
                    ObjectInstance(
                        object_class=obj["class"],
                        relationships=frozenset(obj.get("relationships", [])),
                        bbox=BBox(*obj["bbox"]) if obj.get("bbox") else None,
                    )
                    for obj in frame.get("objects", [])
                ),
            )
            for frame in payload.get("frames", [])
        )
        actions = tuple(
            ActionSpan(
                action_class=action["class"],
                start=float(action["start"]),
                end=float(action["end"]),
            )
            for action in payload.get("actions", [])
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed scene-graph document: {exc}") from exc
    graph = VideoGraph(
        video_id=video_id,
        duration=duration,
        frames=frames,
        actions=actions,
        sparse_spatial=bool(payload.get("sparse_spatial", False)),
    )
    graph = _canonicalize(graph, ontology)
    _check_vocabulary(graph, ontology)
    violations = validate(graph)
    if violations:
        raise ValidationError(
            f"{video_id}: invalid graph: "
            + "; ".join(f"{v.rule} ({v.detail})" for v in violations)
        )
    return graph


def graph_to_json(graph: VideoGraph) -> dict:
    return {
        "video_id": graph.video_id,
        "duration": graph.duration,
        "frames": [
            {
                "timestamp": frame.timestamp,
                "objects": [
                    {
                        "class": inst.object_class,
                        **(
                            {"bbox": [inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h]}
                            if inst.bbox
                            else {}
                        ),
                        "relationships": sorted(inst.relationships),
                    }
                    for inst in sorted(frame.objects, key=lambda i: i.object_class)
                ],
            }
            for frame in graph.frames
        ],
        "actions": [
            {"class": span.action_class, "start": span.start, "end": span.end}
            for span in sorted(graph.actions, key=lambda s: (s.start, s.end, s.action_class))
        ],
        "sparse_spatial": graph.sparse_spatial,
    }


def load_corpus(path: str | Path, ontology: Ontology) -> list[VideoGraph]:
    """Load every scene-graph JSON under `path` (a file or a directory of files)."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
    else:
        files = [path]
    graphs = []
    for file in files:
        with open(file, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        documents = payload if isinstance(payload, list) else [payload]
        for document in documents:
            graphs.append(graph_from_json(document, ontology))
    graphs.sort(key=lambda g: g.video_id)
    return graphs


def save_corpus(graphs: list[VideoGraph], directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for graph in graphs:
        out = directory / f"{graph.video_id}.json"
        with open(out, "w", encoding="utf-8") as handle:
            json.dump(graph_to_json(graph), handle, indent=1, sort_keys=True)
            handle.write("\n")
