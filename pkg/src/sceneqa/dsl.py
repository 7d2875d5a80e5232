"""Typed reasoning-step AST and the interpreter that answers programs on a graph.

Programs serialize to JSON S-expressions, e.g.::

    ["verify", ["exists", ["objects"], ["const", "object", "bottle"]]]

Sixteen step operators do the reasoning work. Leaf forms (sources, constants,
iterate predicates) read the graph and cost nothing; the ``localize`` wrapper
scopes every source inside it to a frame window and is how temporal phrases
compose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .graph import VideoGraph

Atom = Union[str, int]

STEP_COSTS = {
    "query": 1,
    "getFrames": 1,
    "exists": 1,
    "objectRelation": 1,
    "chooseOne": 1,
    "iterate": 1,
    "verify": 0,
    "and": 1,
    "xor": 1,
    "equals": 1,
    "comparative": 2,
    "superlative": 1,
    "difference": 1,
    "overlap": 1,
    "containedIn": 1,
    "sort": 1,
}
SOURCE_OPS = {"objects", "relationships", "actions", "frames", "const", "objectWith"}
PREDICATE_OPS = {"hasRelation", "named", "onObject"}
ATTRIBUTES = {"start", "end", "duration"}
DIRECTIONS = {"before", "after", "while"}


@dataclass(frozen=True)
class Node:
    op: str
    args: tuple = ()

    def to_sexpr(self):
        return [self.op] + [a.to_sexpr() if isinstance(a, Node) else a for a in self.args]


def parse_sexpr(expr) -> Node:
    if not isinstance(expr, list) or not expr or not isinstance(expr[0], str):
        raise ValueError(f"not a program expression: {expr!r}")
    op = expr[0]
    args = tuple(parse_sexpr(a) if isinstance(a, list) else a for a in expr[1:])
    return Node(op, args)


def count_steps(node: Node | "Program") -> int:
    """Compositional step count: sum of per-operator costs over the tree."""
    if isinstance(node, Program):
        node = node.root
    total = STEP_COSTS.get(node.op, 0)
    for arg in node.args:
        if isinstance(arg, Node):
            total += count_steps(arg)
    return total


def render_tree(node: Node, indent: int = 0) -> str:
    pad = "  " * indent
    if not any(isinstance(a, Node) for a in node.args):
        flat = " ".join(str(a) for a in node.args)
        return f"{pad}({node.op}{' ' + flat if flat else ''})"
    lines = [f"{pad}({node.op}"]
    for arg in node.args:
        if isinstance(arg, Node):
            lines.append(render_tree(arg, indent + 1))
        else:
            lines.append("  " * (indent + 1) + str(arg))
    lines[-1] += ")"
    return "\n".join(lines)


@dataclass(frozen=True)
class Program:
    root: Node
    template_id: str = ""
    step_count: int = 0

    def to_sexpr(self):
        return self.root.to_sexpr()


# ---------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class Item:
    kind: str  # object | relationship | action | frame
    name: str
    times: tuple[float, ...] = ()
    span: tuple[float, float] | None = None
    frame_index: int | None = None

    @property
    def key(self):
        return (self.kind, self.name, self.span, self.frame_index)

    def attribute(self, attr: str) -> float | None:
        if self.kind == "action" and self.span is not None:
            start, end = self.span
            return {"start": start, "end": end, "duration": end - start}[attr]
        if self.times:
            values = {
                "start": min(self.times),
                "end": max(self.times),
                "duration": max(self.times) - min(self.times),
            }
            return values[attr]
        return None


@dataclass(frozen=True)
class Answer:
    value: object

    def normalized(self):
        return ("answer", _normalize_value(self.value))


@dataclass(frozen=True)
class Undefined:
    reason: str

    def normalized(self):
        return ("undefined",)


@dataclass(frozen=True)
class Ambiguous:
    candidates: tuple[str, ...]

    def normalized(self):
        return ("ambiguous", tuple(sorted(set(self.candidates))))


EvalResult = Union[Answer, Undefined, Ambiguous]


def _normalize_value(value):
    if isinstance(value, Item):
        return (value.kind, value.name)
    if isinstance(value, tuple):
        return tuple(_normalize_value(v) for v in value)
    if isinstance(value, float):
        return round(value, 9)
    return value


class _Undef(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class _Ambig(Exception):
    def __init__(self, candidates):
        self.candidates = tuple(candidates)


# ---------------------------------------------------------------------------
# Type checking


@dataclass(frozen=True)
class TypeError_:
    path: str
    message: str


_ITEM = "item"
_ITEMS = "items"


def _is_items(kind) -> bool:
    return isinstance(kind, tuple) and kind[0] == _ITEMS


def _is_item(kind) -> bool:
    return isinstance(kind, tuple) and kind[0] == _ITEM


def _member(kind):
    return kind[1]


def _kinds_compatible(a, b) -> bool:
    return a is None or b is None or a == b


def typecheck(program: Program | Node) -> list[TypeError_]:
    root = program.root if isinstance(program, Program) else program
    errors: list[TypeError_] = []
    _infer(root, "root", errors)
    return errors


def _infer(node: Node, path: str, errors: list[TypeError_]):
    def fail(message, at=None):
        errors.append(TypeError_(at or path, message))
        return None

    def child(i):
        arg = node.args[i]
        if isinstance(arg, Node):
            return _infer(arg, f"{path}.{i}", errors)
        return fail(f"expected expression, got {arg!r}", f"{path}.{i}")

    def atom(i):
        arg = node.args[i]
        if isinstance(arg, Node):
            return fail(f"expected keyword, got expression", f"{path}.{i}")
        return arg

    op = node.op
    n = len(node.args)

    if op == "const":
        if n != 2 or atom(0) not in ("object", "relationship", "action", "frame"):
            return fail("const needs (kind, name)")
        return (_ITEM, node.args[0])
    if op == "objects":
        return (_ITEMS, "object")
    if op == "relationships":
        return (_ITEMS, "relationship")
    if op == "frames":
        return (_ITEMS, "frame")
    if op == "actions":
        if n not in (0, 2):
            return fail("actions takes no args or (before|after, name)")
        if n == 2 and atom(0) not in ("before", "after"):
            return fail("actions qualifier must be before or after")
        return (_ITEMS, "action")
    if op == "objectWith":
        if n != 2 or not all(isinstance(a, str) for a in node.args):
            return fail("objectWith needs (object, relationship)")
        return (_ITEM, "object")

    if op == "localize":
        if n != 2:
            return fail("localize needs (frames, body)")
        frames_kind = child(0)
        if frames_kind is not None and not (
            _is_items(frames_kind) and _member(frames_kind) == "frame"
        ):
            fail("localize window must be frames", f"{path}.0")
        return child(1)

    if op == "query":
        if n != 2:
            return fail("query needs (item(s), kind)")
        source = child(0)
        kind = atom(1)
        if kind not in ("object", "relationship", "action") and kind not in ATTRIBUTES:
            return fail(f"cannot query for {kind!r}", f"{path}.1")
        if source is not None and not (_is_item(source) or _is_items(source)):
            return fail("query input must be an item or item list", f"{path}.0")
        if kind in ATTRIBUTES:
            return "scalar"
        if source is not None and not _kinds_compatible(_member(source), kind):
            fail(f"query for {kind!r} over {_member(source)!r} items", f"{path}.0")
        return "text"

    if op == "getFrames":
        if n != 2:
            return fail("getFrames needs (anchor, direction)")
        anchor = child(0)
        if anchor is not None and not (
            (_is_item(anchor) or _is_items(anchor))
            and _kinds_compatible(_member(anchor), "action")
        ):
            fail("getFrames anchor must be an action", f"{path}.0")
        if atom(1) not in DIRECTIONS:
            fail("direction must be before, after, or while", f"{path}.1")
        return (_ITEMS, "frame")

    if op == "exists":
        if n != 2:
            return fail("exists needs (items, query item)")
        items, probe = child(0), child(1)
        if items is not None and not _is_items(items):
            fail("exists scans an item list", f"{path}.0")
        if probe is not None and not (_is_item(probe) or _is_items(probe)):
            fail("exists probes with a single item", f"{path}.1")
        if (
            items is not None
            and probe is not None
            and _is_items(items)
            and (_is_item(probe) or _is_items(probe))
            and not _kinds_compatible(_member(items), _member(probe))
        ):
            fail("query item kind differs from list kind", f"{path}.1")
        return "boolean"

    if op == "objectRelation":
        if n != 3:
            return fail("objectRelation needs (frames, object, relationship)")
        frames, obj, rel = child(0), child(1), child(2)
        if frames is not None and not (
            (_is_items(frames) or _is_item(frames))
            and _kinds_compatible(_member(frames), "frame")
        ):
            fail("first input must be frame(s)", f"{path}.0")
        if obj is not None and not (
            (_is_item(obj) or _is_items(obj)) and _kinds_compatible(_member(obj), "object")
        ):
            fail("second input must be an object", f"{path}.1")
        if rel is not None and not (
            (_is_item(rel) or _is_items(rel))
            and _kinds_compatible(_member(rel), "relationship")
        ):
            fail("third input must be a relationship", f"{path}.2")
        return "boolean"

    if op == "chooseOne":
        if n != 3:
            return fail("chooseOne needs (items, option, option)")
        items = child(0)
        member = None
        if items is not None and _is_items(items):
            member = _member(items)
        elif items is not None:
            fail("chooseOne scans an item list", f"{path}.0")
        for i in (1, 2):
            option = child(i)
            if option is not None and not (
                (_is_item(option) or _is_items(option))
                and _kinds_compatible(_member(option), member)
            ):
                fail("option kind differs from list kind", f"{path}.{i}")
        return (_ITEM, member)

    if op == "iterate":
        if n != 3:
            return fail("iterate needs (items, predicate, count)")
        items = child(0)
        member = _member(items) if items is not None and _is_items(items) else None
        if items is not None and not _is_items(items):
            fail("iterate scans an item list", f"{path}.0")
        pred = node.args[1]
        if not (isinstance(pred, Node) and pred.op in PREDICATE_OPS):
            fail("predicate must be hasRelation, named, or onObject", f"{path}.1")
        else:
            if pred.op == "hasRelation" and not _kinds_compatible(member, "object"):
                fail("hasRelation filters object items", f"{path}.1")
            if pred.op == "onObject" and not _kinds_compatible(member, "relationship"):
                fail("onObject filters relationship items", f"{path}.1")
        limit = node.args[2]
        if not (limit == "all" or isinstance(limit, int)):
            fail("count must be an integer or 'all'", f"{path}.2")
        return (_ITEMS, member)

    if op == "verify":
        if n != 1:
            return fail("verify needs one boolean")
        if child(0) not in (None, "boolean"):
            fail("kind-mismatch at child 0: boolean required", f"{path}.0")
        return "text"

    if op == "and":
        if n < 2:
            return fail("and needs at least two booleans")
        for i in range(n):
            if child(i) not in (None, "boolean"):
                fail(f"kind-mismatch at child {i}: boolean required", f"{path}.{i}")
        return "boolean"

    if op == "xor":
        if n != 2:
            return fail("xor needs two booleans")
        for i in range(2):
            if child(i) not in (None, "boolean"):
                fail(f"kind-mismatch at child {i}: boolean required", f"{path}.{i}")
        return "boolean"

    if op == "equals":
        if n != 2:
            return fail("equals needs two inputs")
        a, b = child(0), child(1)
        for side, i in ((a, 0), (b, 1)):
            if side is not None and not (_is_item(side) or _is_items(side) or side in ("text", "scalar")):
                fail("equals compares items, text, or scalars", f"{path}.{i}")
        return "boolean"

    if op == "comparative":
        if n != 4:
            return fail("comparative needs (a, b, attribute, more|less)")
        a, b = child(0), child(1)
        for side, i in ((a, 0), (b, 1)):
            if side is not None and not (_is_item(side) or _is_items(side)):
                fail("comparative takes items", f"{path}.{i}")
        if atom(2) not in ATTRIBUTES:
            fail("unknown attribute", f"{path}.2")
        if atom(3) not in ("more", "less"):
            fail("direction must be more or less", f"{path}.3")
        members = {(_member(s) if s else None) for s in (a, b)} - {None}
        member = members.pop() if len(members) == 1 else None
        return (_ITEM, member)

    if op == "superlative":
        if n != 3:
            return fail("superlative needs (items, attribute, most|least)")
        items = child(0)
        if items is not None and not _is_items(items):
            fail("superlative scans an item list", f"{path}.0")
        if atom(1) not in ATTRIBUTES:
            fail("unknown attribute", f"{path}.1")
        if atom(2) not in ("most", "least"):
            fail("extremum must be most or least", f"{path}.2")
        return (_ITEM, _member(items) if items is not None and _is_items(items) else None)

    if op == "difference":
        if n != 2:
            return fail("difference needs two scalars")
        for i in range(2):
            if child(i) not in (None, "scalar"):
                fail(f"kind-mismatch at child {i}: scalar required", f"{path}.{i}")
        return "scalar"

    if op in ("overlap", "containedIn"):
        if n != 2:
            return fail(f"{op} needs two item lists")
        a, b = child(0), child(1)
        for side, i in ((a, 0), (b, 1)):
            if side is not None and not _is_items(side):
                fail(f"{op} takes item lists", f"{path}.{i}")
        if (
            a is not None
            and b is not None
            and _is_items(a)
            and _is_items(b)
            and not _kinds_compatible(_member(a), _member(b))
        ):
            fail("item lists have different kinds", f"{path}.1")
        return "boolean"

    if op == "sort":
        if n != 2:
            return fail("sort needs (items, attribute)")
        items = child(0)
        if items is not None and not _is_items(items):
            fail("sort scans an item list", f"{path}.0")
        if atom(1) not in ATTRIBUTES:
            fail("unknown attribute", f"{path}.1")
        return items if items is not None and _is_items(items) else (_ITEMS, None)

    return fail(f"unknown operator {op!r}")


# ---------------------------------------------------------------------------
# Interpreter


class _Context:
    """Evaluation scope: the graph plus the active frame window (all if None)."""

    def __init__(self, graph: VideoGraph, window: frozenset[int] | None = None):
        self.graph = graph
        self.window = window

    def frame_indices(self) -> list[int]:
        if self.window is None:
            return list(range(len(self.graph.frames)))
        return sorted(self.window)

    def narrowed(self, indices) -> "_Context":
        return _Context(self.graph, frozenset(indices))


def _sorted_items(items: list[Item]) -> list[Item]:
    def key(item: Item):
        start = item.attribute("start")
        return (start if start is not None else float("inf"), item.name)

    return sorted(items, key=key)


def _dedup(items: list[Item]) -> list[Item]:
    seen = set()
    kept = []
    for item in items:
        if item.key not in seen:
            seen.add(item.key)
            kept.append(item)
    return kept


class Evaluator:
    """Evaluates a typechecked program against an augmented graph."""

    def __init__(self, graph: VideoGraph):
        self.graph = graph

    # -- sources -----------------------------------------------------------

    def _objects(self, ctx: _Context) -> list[Item]:
        times: dict[str, list[float]] = {}
        for i in ctx.frame_indices():
            frame = ctx.graph.frames[i]
            for inst in frame.objects:
                times.setdefault(inst.object_class, []).append(frame.timestamp)
        return _sorted_items(
            [Item("object", name, tuple(sorted(ts))) for name, ts in times.items()]
        )

    def _relationships(self, ctx: _Context) -> list[Item]:
        times: dict[str, list[float]] = {}
        for i in ctx.frame_indices():
            frame = ctx.graph.frames[i]
            for inst in frame.objects:
                for rel in inst.relationships:
                    times.setdefault(rel, []).append(frame.timestamp)
        return _sorted_items(
            [Item("relationship", name, tuple(sorted(ts))) for name, ts in times.items()]
        )

    def _frames(self, ctx: _Context) -> list[Item]:
        return [
            Item(
                "frame",
                str(i),
                (ctx.graph.frames[i].timestamp,),
                frame_index=i,
            )
            for i in ctx.frame_indices()
        ]

    def _action_items(self, ctx: _Context) -> list[Item]:
        spans = sorted(ctx.graph.actions, key=lambda s: (s.start, s.end, s.action_class))
        return [Item("action", s.action_class, span=(s.start, s.end)) for s in spans]

    def _resolve_action(self, ctx: _Context, name: str) -> Item:
        matches = [i for i in self._action_items(ctx) if i.name == name]
        if not matches:
            raise _Undef(f"action {name!r} absent")
        if len(matches) > 1:
            raise _Ambig([m.name for m in matches] )
        return matches[0]

    def _object_with(self, ctx: _Context, obj: str, rel: str) -> Item:
        times = []
        for i in ctx.frame_indices():
            frame = ctx.graph.frames[i]
            for inst in frame.objects:
                if inst.object_class == obj and rel in inst.relationships:
                    times.append(frame.timestamp)
        if not times:
            raise _Undef(f"{obj!r} never has {rel!r}")
        return Item("object", obj, tuple(sorted(times)))

    # -- predicate matching -------------------------------------------------

    def _match(self, ctx: _Context, pred: Node, item: Item) -> Item | None:
        if pred.op == "named":
            return item if item.name == pred.args[0] else None
        if pred.op == "hasRelation":
            rel = pred.args[0]
            times = []
            for i in ctx.frame_indices():
                frame = ctx.graph.frames[i]
                for inst in frame.objects:
                    if inst.object_class == item.name and rel in inst.relationships:
                        times.append(frame.timestamp)
            return Item("object", item.name, tuple(sorted(times))) if times else None
        if pred.op == "onObject":
            obj = pred.args[0]
            times = []
            for i in ctx.frame_indices():
                frame = ctx.graph.frames[i]
                for inst in frame.objects:
                    if inst.object_class == obj and item.name in inst.relationships:
                        times.append(frame.timestamp)
            return (
                Item("relationship", item.name, tuple(sorted(times))) if times else None
            )
        raise _Undef(f"unknown predicate {pred.op!r}")

    # -- helpers -------------------------------------------------------------

    def _as_item(self, value) -> Item:
        if isinstance(value, Item):
            return value
        if isinstance(value, tuple):
            if len(value) == 0:
                raise _Undef("no satisfying element")
            if len(value) > 1:
                raise _Ambig([item.name for item in value])
            return value[0]
        raise _Undef(f"expected an item, got {type(value).__name__}")

    def _attribute(self, item: Item, attr: str) -> float:
        value = item.attribute(attr)
        if value is None:
            raise _Undef(f"{item.name!r} has no {attr}")
        return value

    def _pick(self, candidates: list[tuple[float, Item]], maximize: bool) -> Item:
        # Deterministic even on equal attribute values: earliest start, then name.
        def tie(entry):
            value, item = entry
            start = item.attribute("start")
            return (
                -value if maximize else value,
                start if start is not None else float("inf"),
                item.name,
            )

        return min(candidates, key=tie)[1]

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, program: Program | Node) -> EvalResult:
        root = program.root if isinstance(program, Program) else program
        try:
            value = self._eval(root, _Context(self.graph))
        except _Undef as undef:
            return Undefined(undef.reason)
        except _Ambig as ambig:
            if len(set(ambig.candidates)) < 2:
                return Undefined("duplicate element")
            return Ambiguous(tuple(sorted(set(ambig.candidates))))
        if isinstance(value, list):
            value = tuple(value)
        return Answer(value)

    def _eval(self, node: Node, ctx: _Context):
        op = node.op
        args = node.args

        if op == "const":
            return Item(args[0], args[1])
        if op == "objects":
            return tuple(self._objects(ctx))
        if op == "relationships":
            return tuple(self._relationships(ctx))
        if op == "frames":
            return tuple(self._frames(ctx))
        if op == "actions":
            if not args:
                return tuple(self._action_items(ctx))
            direction, name = args
            anchor = self._resolve_action(ctx, name)
            start, end = anchor.span
            spans = self._action_items(ctx)
            if direction == "after":
                return tuple(s for s in spans if s.span[0] >= end and s.key != anchor.key)
            return tuple(s for s in spans if s.span[1] <= start and s.key != anchor.key)
        if op == "objectWith":
            return self._object_with(ctx, args[0], args[1])

        if op == "localize":
            frames = self._eval(args[0], ctx)
            indices = [f.frame_index for f in frames]
            return self._eval(args[1], ctx.narrowed(indices))

        if op == "query":
            item = self._as_item(self._eval(args[0], ctx))
            if args[1] in ATTRIBUTES:
                return self._attribute(item, args[1])
            if item.kind != args[1]:
                raise _Undef(f"queried {args[1]!r} but found {item.kind!r}")
            return item.name

        if op == "getFrames":
            anchor = self._as_item(self._eval(args[0], ctx))
            if anchor.span is None:
                raise _Undef("anchor has no time span")
            start, end = anchor.span
            direction = args[1]
            kept = []
            for frame in self._frames(ctx):
                ts = frame.times[0]
                if direction == "before" and ts < start:
                    kept.append(frame)
                elif direction == "after" and ts > end:
                    kept.append(frame)
                elif direction == "while" and start <= ts <= end:
                    kept.append(frame)
            return tuple(kept)

        if op == "exists":
            items = self._eval(args[0], ctx)
            probe = self._as_item(self._eval(args[1], ctx))
            return any(i.kind == probe.kind and i.name == probe.name for i in items)

        if op == "objectRelation":
            frames = self._eval(args[0], ctx)
            if isinstance(frames, Item):
                frames = (frames,)
            obj = self._as_item(self._eval(args[1], ctx))
            rel = self._as_item(self._eval(args[2], ctx))
            for frame in frames:
                annotation = ctx.graph.frames[frame.frame_index]
                for inst in annotation.objects:
                    if inst.object_class == obj.name and rel.name in inst.relationships:
                        return True
            return False

        if op == "chooseOne":
            items = self._eval(args[0], ctx)
            first = self._as_item(self._eval(args[1], ctx))
            second = self._as_item(self._eval(args[2], ctx))
            hits_first = [i for i in items if i.name == first.name]
            hits_second = [i for i in items if i.name == second.name]
            if hits_first and hits_second:
                raise _Ambig([first.name, second.name])
            if hits_first:
                return hits_first[0]
            if hits_second:
                return hits_second[0]
            raise _Undef(f"neither {first.name!r} nor {second.name!r} present")

        if op == "iterate":
            items = self._eval(args[0], ctx)
            limit = args[2]
            kept = []
            for item in items:
                refined = self._match(ctx, args[1], item)
                if refined is not None:
                    kept.append(refined)
                    if limit != "all" and len(kept) >= limit:
                        break
            return tuple(_dedup(kept))

        if op == "verify":
            return "yes" if self._eval(args[0], ctx) else "no"

        if op == "and":
            # Strict: every operand is evaluated so Undefined/Ambiguous in any
            # child surfaces regardless of the others' truth values.
            values = [bool(self._eval(a, ctx)) for a in args]
            return all(values)

        if op == "xor":
            return bool(self._eval(args[0], ctx)) != bool(self._eval(args[1], ctx))

        if op == "equals":
            left = self._eval(args[0], ctx)
            right = self._eval(args[1], ctx)
            if isinstance(left, (Item, tuple)) or isinstance(right, (Item, tuple)):
                left, right = self._as_item(left), self._as_item(right)
                return left.kind == right.kind and left.name == right.name
            return left == right

        if op == "comparative":
            first = self._as_item(self._eval(args[0], ctx))
            second = self._as_item(self._eval(args[1], ctx))
            attr, direction = args[2], args[3]
            pairs = [
                (self._attribute(first, attr), first),
                (self._attribute(second, attr), second),
            ]
            return self._pick(pairs, maximize=(direction == "more"))

        if op == "superlative":
            items = self._eval(args[0], ctx)
            attr, extremum = args[1], args[2]
            if not items:
                raise _Undef("no elements to rank")
            pairs = [(self._attribute(i, attr), i) for i in items]
            return self._pick(pairs, maximize=(extremum == "most"))

        if op == "difference":
            left = self._eval(args[0], ctx)
            right = self._eval(args[1], ctx)
            return float(left) - float(right)

        if op == "overlap":
            left = self._eval(args[0], ctx)
            right = self._eval(args[1], ctx)
            names = {(i.kind, i.name) for i in right}
            return any((i.kind, i.name) in names for i in left)

        if op == "containedIn":
            left = self._eval(args[0], ctx)
            right = self._eval(args[1], ctx)
            names = {(i.kind, i.name) for i in right}
            return all((i.kind, i.name) in names for i in left)

        if op == "sort":
            items = self._eval(args[0], ctx)
            attr = args[1]
            decorated = [(self._attribute(i, attr), i) for i in items]
            decorated.sort(key=lambda pair: (pair[0], pair[1].name))
            return tuple(i for _, i in decorated)

        raise _Undef(f"unknown operator {op!r}")


def evaluate(program: Program | Node, graph: VideoGraph) -> EvalResult:
    return Evaluator(graph).evaluate(program)
