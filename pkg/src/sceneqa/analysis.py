"""Static inspection of question programs: mentioned names, asserted pairs, margins."""

from __future__ import annotations

from .dsl import Node
from .templates import QuestionRecord


def _walk(node: Node):
    yield node
    for arg in node.args:
        if isinstance(arg, Node):
            yield from _walk(arg)


def _unwrap_localize(root: Node) -> Node:
    while root.op == "localize":
        root = root.args[1]
    return root


def _source_kind(node: Node) -> str | None:
    """The base collection an item expression draws from (leftmost source)."""
    probe = node
    while isinstance(probe, Node):
        if probe.op in ("objects", "relationships", "actions", "frames"):
            return probe.op
        children = [a for a in probe.args if isinstance(a, Node)]
        if not children:
            return None
        probe = children[0]
    return None


def _filter_relationships(expr: Node) -> set[str]:
    """Relationships that filter or qualify object streams inside `expr`."""
    rels = set()
    for node in _walk(expr):
        if node.op == "hasRelation":
            rels.add(node.args[0])
        elif node.op == "objectWith":
            rels.add(node.args[1])
    return rels


def program_objects(root: Node) -> set[str]:
    names = set()
    for node in _walk(root):
        if node.op == "const" and node.args[0] == "object":
            names.add(node.args[1])
        elif node.op == "objectWith":
            names.add(node.args[0])
        elif node.op == "onObject":
            names.add(node.args[0])
        elif node.op == "iterate":
            pred = node.args[1]
            if (
                isinstance(pred, Node)
                and pred.op == "named"
                and _source_kind(node.args[0]) == "objects"
            ):
                names.add(pred.args[0])
    return names


def program_relationships(root: Node) -> set[str]:
    names = set()
    for node in _walk(root):
        if node.op == "const" and node.args[0] == "relationship":
            names.add(node.args[1])
        elif node.op == "hasRelation":
            names.add(node.args[0])
        elif node.op == "objectWith":
            names.add(node.args[1])
        elif node.op == "iterate":
            pred = node.args[1]
            if (
                isinstance(pred, Node)
                and pred.op == "named"
                and _source_kind(node.args[0]) == "relationships"
            ):
                names.add(pred.args[0])
    return names


def program_actions(root: Node) -> set[str]:
    names = set()
    for node in _walk(root):
        if node.op == "const" and node.args[0] == "action":
            names.add(node.args[1])
        elif node.op == "actions" and len(node.args) == 2:
            names.add(node.args[1])
        elif node.op == "iterate":
            pred = node.args[1]
            if (
                isinstance(pred, Node)
                and pred.op == "named"
                and _source_kind(node.args[0]) == "actions"
            ):
                names.add(pred.args[0])
    return names


def _resolved_object(child: Node, record: QuestionRecord) -> set[str]:
    """Object names an item expression denotes; indirect subtrees resolve to
    the direct binding they replaced."""
    if child.op == "const" and child.args[0] == "object":
        return {child.args[1]}
    if child.op == "objectWith":
        return {child.args[0]}
    if record.indirect_kind == "object" and record.bindings.get("object"):
        return {record.bindings["object"]}
    return set()


def record_pairs(record: QuestionRecord) -> set[tuple[str, str]]:
    """Every (object, relationship) pair the question asserts, directly or
    inside an indirect reference, plus the answer pair for open object queries."""
    pairs: set[tuple[str, str]] = set()
    root = record.program.root
    bindings = record.bindings

    for node in _walk(root):
        if node.op == "objectWith":
            pairs.add((node.args[0], node.args[1]))

        elif node.op == "objectRelation":
            obj_child, rel_child = node.args[1], node.args[2]
            objs = _resolved_object(obj_child, record)
            if rel_child.op == "const":
                rels = {rel_child.args[1]}
            else:
                rels = (
                    {bindings["relationship"]} if bindings.get("relationship") else set()
                )
            pairs.update((o, r) for o in objs for r in rels)
            # Pairs asserted inside an indirect object reference.
            if obj_child.op not in ("const", "objectWith"):
                for o in objs:
                    pairs.update((o, r) for r in _filter_relationships(obj_child))

        elif node.op in ("equals", "chooseOne", "exists"):
            stream_rels: set[str] = set()
            option_objects: set[str] = set()
            for child in node.args:
                if not isinstance(child, Node):
                    continue
                if child.op == "const" and child.args[0] == "object":
                    option_objects.add(child.args[1])
                elif child.op in ("superlative", "iterate", "comparative"):
                    if _source_kind(child) == "objects":
                        stream_rels.update(_filter_relationships(child))
                    if node.op in ("equals", "exists") and child is not node.args[0]:
                        option_objects.update(_resolved_object(child, record))
            pairs.update((o, r) for o in option_objects for r in stream_rels)

    # Relationship references assert the pair (their object, the resolved rel).
    if record.indirect_kind == "relationship" and bindings.get("relationship"):
        for node in _walk(root):
            if node.op == "onObject":
                pairs.add((node.args[0], bindings["relationship"]))

    # Open object answers pair with the relationship that filtered them.
    body = _unwrap_localize(root)
    if record.answer_type == "open" and record.answer:
        is_object_query = (
            body.op == "query" and body.args[1] == "object"
        ) or (body.op in ("superlative",) and _source_kind(body) == "objects")
        if is_object_query:
            pairs.update((record.answer, rel) for rel in _filter_relationships(body))

    return pairs


def duration_margin_checks(root: Node) -> list[tuple[str, object]]:
    """Margin obligations arising from duration reasoning.

    ("pair", (a, b)) for duration comparatives over two named actions;
    ("global", extremum) for duration superlatives over the action list.
    """
    checks: list[tuple[str, object]] = []
    for node in _walk(root):
        if node.op == "comparative" and node.args[2] == "duration":
            names = []
            for child in node.args[:2]:
                if isinstance(child, Node):
                    found = program_actions(child)
                    if len(found) == 1:
                        names.append(next(iter(found)))
            if len(names) == 2:
                checks.append(("pair", (names[0], names[1])))
        elif node.op == "superlative" and node.args[1] == "duration":
            if _source_kind(node.args[0]) == "actions":
                checks.append(("global", node.args[2]))
    return checks


def mentioned_objects(record: QuestionRecord) -> set[str]:
    names = program_objects(record.program.root)
    names.update(
        value for slot, value in record.bindings.items() if slot in ("object", "object2")
    )
    return names
