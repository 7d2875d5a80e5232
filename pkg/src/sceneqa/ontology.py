"""Vocabulary, entailment rules, and merge maps shared by every pipeline stage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


RELATIONSHIP_CATEGORIES = ("spatial", "contact", "verb")


class OntologyError(ValueError):
    """Raised when an ontology file violates its own invariants."""


@dataclass(frozen=True)
class ActionClass:
    """One action vocabulary entry: canonical phrases plus its verb/object decomposition."""

    name: str  # canonical -ing phrase, e.g. "taking a phone from somewhere"
    base: str  # infinitive phrase, e.g. "take a phone from somewhere"
    verb: str
    object: str | None = None


@dataclass(frozen=True)
class EntailmentRule:
    antecedent_kind: str  # "relationship" | "action"
    antecedent: str
    consequents: tuple[str, ...]


@dataclass(frozen=True)
class SequenceRule:
    """Verb families that must occur in order when they share an object."""

    earlier_verb: str
    later_verb: str
    insert_missing_earlier: bool = False


@dataclass
class Ontology:
    object_classes: frozenset[str]
    relationship_classes: dict[str, str]  # name -> category
    action_classes: dict[str, ActionClass]  # keyed by canonical name
    entailment_rules: list[EntailmentRule]
    merge_map: dict[str, str]
    blacklist_pairs: frozenset[tuple[str, str]]  # (object, relationship)
    attention_relationships: frozenset[str]
    confusing_relationships: frozenset[str] = frozenset()
    similar_objects: frozenset[frozenset[str]] = frozenset()
    sequence_rules: list[SequenceRule] = field(default_factory=list)
    verb_forms: dict[str, dict[str, str]] = field(default_factory=dict)
    mass_nouns: frozenset[str] = frozenset()

    def canonical(self, name: str) -> str:
        return self.merge_map.get(name, name)

    def knows_object(self, name: str) -> bool:
        return name in self.object_classes

    def knows_relationship(self, name: str) -> bool:
        return name in self.relationship_classes or name in self.attention_relationships

    def knows_action(self, name: str) -> bool:
        return name in self.action_classes

    def relationship_category(self, name: str) -> str | None:
        return self.relationship_classes.get(name)

    def spatial_relationships(self) -> list[str]:
        return sorted(n for n, c in self.relationship_classes.items() if c == "spatial")

    def contact_relationships(self) -> list[str]:
        return sorted(n for n, c in self.relationship_classes.items() if c == "contact")

    def verb_relationships(self) -> list[str]:
        return sorted(n for n, c in self.relationship_classes.items() if c == "verb")

    def askable_relationships(self) -> list[str]:
        """Relationships usable in questions: categorized and not confusing."""
        return sorted(
            n for n in self.relationship_classes if n not in self.confusing_relationships
        )

    def are_similar(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.similar_objects

    def is_blacklisted(self, obj: str, rel: str) -> bool:
        return (obj, rel) in self.blacklist_pairs

    def check(self) -> None:
        """Verify internal invariants, raising OntologyError on the first failure."""
        for rule in self.entailment_rules:
            for consequent in rule.consequents:
                if consequent not in self.relationship_classes:
                    raise OntologyError(
                        f"entailment consequent {consequent!r} is not a relationship"
                    )
            if rule.antecedent_kind == "relationship":
                if rule.antecedent not in self.relationship_classes:
                    raise OntologyError(
                        f"entailment antecedent {rule.antecedent!r} is not a relationship"
                    )
            elif rule.antecedent_kind == "action":
                if rule.antecedent not in self.action_classes:
                    raise OntologyError(
                        f"entailment antecedent {rule.antecedent!r} is not an action"
                    )
            else:
                raise OntologyError(f"bad antecedent kind {rule.antecedent_kind!r}")
        for raw, canonical in self.merge_map.items():
            if canonical in self.merge_map:
                raise OntologyError(f"merge target {canonical!r} is itself merged")
            known = (
                canonical in self.object_classes
                or self.knows_relationship(canonical)
                or canonical in self.action_classes
            )
            if not known:
                raise OntologyError(f"merge target {canonical!r} not in any vocabulary")
            if raw == canonical:
                raise OntologyError(f"merge entry {raw!r} maps to itself")
        for name, category in self.relationship_classes.items():
            if category not in RELATIONSHIP_CATEGORIES:
                raise OntologyError(f"relationship {name!r} has bad category {category!r}")
        for obj, rel in self.blacklist_pairs:
            if obj not in self.object_classes or rel not in self.relationship_classes:
                raise OntologyError(f"blacklist pair ({obj!r}, {rel!r}) uses unknown names")


def _parse(payload: dict) -> Ontology:
    actions = {}
    for entry in payload["actions"]:
        action = ActionClass(
            name=entry["name"],
            base=entry["base"],
            verb=entry["verb"],
            object=entry.get("object"),
        )
        actions[action.name] = action

    rules = [
        EntailmentRule(
            antecedent_kind=entry["if"]["kind"],
            antecedent=entry["if"]["name"],
            consequents=tuple(entry["then"]),
        )
        for entry in payload.get("entailments", [])
    ]

    sequence_rules = [
        SequenceRule(
            earlier_verb=entry["earlier"],
            later_verb=entry["later"],
            insert_missing_earlier=entry.get("insert_missing_earlier", False),
        )
        for entry in payload.get("sequence_rules", [])
    ]

    ontology = Ontology(
        object_classes=frozenset(payload["objects"]),
        relationship_classes=dict(payload["relationships"]),
        action_classes=actions,
        entailment_rules=rules,
        merge_map=dict(payload.get("merge", {})),
        blacklist_pairs=frozenset(tuple(p) for p in payload.get("blacklist", [])),
        attention_relationships=frozenset(payload.get("attention_relationships", [])),
        confusing_relationships=frozenset(payload.get("confusing_relationships", [])),
        similar_objects=frozenset(
            frozenset(pair) for pair in payload.get("similar_objects", [])
        ),
        sequence_rules=sequence_rules,
        verb_forms=dict(payload.get("verb_forms", {})),
        mass_nouns=frozenset(payload.get("mass_nouns", [])),
    )
    ontology.check()
    return ontology


def load_ontology(path: str | Path) -> Ontology:
    with open(path, "r", encoding="utf-8") as handle:
        return _parse(json.load(handle))


def default_ontology() -> Ontology:
    """The ontology bundled with the package."""
    text = resources.files("sceneqa.data").joinpath("ontology.json").read_text("utf-8")
    return _parse(json.loads(text))
