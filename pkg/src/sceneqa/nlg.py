"""Surface realization: articles, verb forms, and slot substitution."""

from __future__ import annotations

import re

from .ontology import Ontology

_TOKEN = re.compile(r"<([a-z]+[0-9]?)(?::([a-z]+))?>")

VOWELS = "aeiou"
# Words whose article cannot be read off the first letter.
ARTICLE_EXCEPTIONS: dict[str, str] = {"hour": "an", "one": "a"}


class GrammarError(ValueError):
    """No grammatical realization exists for the requested binding."""


def article_for(noun: str, ontology: Ontology) -> str:
    if noun in ontology.mass_nouns:
        return ""
    head = noun.split()[0]
    if head in ARTICLE_EXCEPTIONS:
        return ARTICLE_EXCEPTIONS[head]
    return "an" if head[0].lower() in VOWELS else "a"


def object_surface(name: str, ontology: Ontology, form: str = "art") -> str:
    if form == "bare":
        return name
    article = article_for(name, ontology)
    return f"{article} {name}" if article else name


def relationship_surface(name: str, ontology: Ontology, form: str = "ing") -> str:
    if form == "ing":
        return name
    forms = ontology.verb_forms.get(name)
    if forms is None or form not in forms:
        raise GrammarError(f"relationship {name!r} has no {form!r} form")
    return forms[form]


def action_surface(name: str, ontology: Ontology, form: str = "ing") -> str:
    action = ontology.action_classes.get(name)
    if action is None:
        raise GrammarError(f"unknown action {name!r}")
    if form == "ing":
        return action.name
    if form == "base":
        return action.base
    raise GrammarError(f"action {name!r} has no {form!r} form")


def is_verbal(relationship: str, ontology: Ontology) -> bool:
    return relationship in ontology.verb_forms


def pattern_slots(pattern: str) -> list[tuple[str, str | None]]:
    return [(m.group(1), m.group(2)) for m in _TOKEN.finditer(pattern)]


def frame_compatible(pattern: str, slot_kinds: dict[str, str], bindings: dict[str, str],
                     ontology: Ontology) -> bool:
    """A frame fits when every inflection it asks for exists for the binding."""
    for slot, form in pattern_slots(pattern):
        if slot == "loc":
            continue
        kind = slot_kinds.get(slot)
        value = bindings.get(slot)
        if kind is None or value is None:
            return False
        if kind == "relationship" and form in ("base", "past") and not is_verbal(value, ontology):
            return False
    return True


def realize(
    pattern: str,
    slot_kinds: dict[str, str],
    bindings: dict[str, str],
    ontology: Ontology,
    loc_phrase: str = "",
    overrides: dict[str, str] | None = None,
) -> str:
    """Fill a frame pattern; `overrides` swap a slot's surface for a full phrase."""

    def substitute(match: re.Match) -> str:
        slot, form = match.group(1), match.group(2)
        if slot == "loc":
            return loc_phrase
        if overrides and slot in overrides:
            return overrides[slot]
        kind = slot_kinds.get(slot)
        value = bindings.get(slot)
        if kind is None or value is None:
            raise GrammarError(f"unbound slot {slot!r} in {pattern!r}")
        if kind == "object":
            return object_surface(value, ontology, form or "art")
        if kind == "relationship":
            return relationship_surface(value, ontology, form or "ing")
        if kind == "action":
            return action_surface(value, ontology, form or "ing")
        raise GrammarError(f"slot {slot!r} has unknown kind {kind!r}")

    text = _TOKEN.sub(substitute, pattern)
    text = re.sub(r"\s+", " ", text).strip()
    text = text.replace(" ?", "?").replace(" ,", ",")
    if text and text[0].islower():
        text = text[0].upper() + text[1:]
    return text


def localization_phrase(time_word: str, anchor: str, ontology: Ontology) -> str:
    return f" {time_word} {action_surface(anchor, ontology, 'ing')}"
