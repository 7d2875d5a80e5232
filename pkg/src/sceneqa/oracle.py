"""Reference interpreter: exhaustive enumeration, no indexing, no short-circuits.

This is the independent check on the main interpreter. Every source is
recomputed from a flat (frame, timestamp, object, relationship) tuple sweep,
lists are ordered by repeated selection instead of keyed sorts, and boolean
operators always evaluate every operand. Semantics must match
:func:`sceneqa.dsl.evaluate` exactly; implementation strategy must not.
"""

from __future__ import annotations

from .dsl import Ambiguous, Answer, EvalResult, Item, Node, Program, Undefined
from .graph import VideoGraph

MAX_FRAMES = 50


class OracleSizeError(ValueError):
    pass


class _Stop(Exception):
    def __init__(self, result: EvalResult):
        self.result = result


def _tuples(graph: VideoGraph) -> list[tuple[int, float, str, str | None]]:
    """Every (frame, timestamp, object, relationship) occurrence, relationship
    None for instances with an empty relationship set."""
    rows = []
    for index, frame in enumerate(graph.frames):
        for inst in frame.objects:
            if inst.relationships:
                for rel in sorted(inst.relationships):
                    rows.append((index, frame.timestamp, inst.object_class, rel))
            else:
                rows.append((index, frame.timestamp, inst.object_class, None))
    return rows


def _attribute_of(item: Item, attr: str):
    return item.attribute(attr)


def _ordered(items: list[Item]) -> list[Item]:
    """Selection-order items by (first time, name) without a keyed sort."""
    remaining = list(items)
    out = []
    while remaining:
        best = remaining[0]
        for candidate in remaining[1:]:
            b_start = _attribute_of(best, "start")
            c_start = _attribute_of(candidate, "start")
            b_key = (b_start if b_start is not None else float("inf"), best.name)
            c_key = (c_start if c_start is not None else float("inf"), candidate.name)
            if c_key < b_key:
                best = candidate
        out.append(best)
        remaining.remove(best)
    return out


class _BruteForce:
    def __init__(self, graph: VideoGraph):
        if len(graph.frames) > MAX_FRAMES:
            raise OracleSizeError(
                f"{len(graph.frames)} frames exceed the oracle's {MAX_FRAMES}-frame guard"
            )
        self.graph = graph
        self.rows = _tuples(graph)

    def undefined(self, reason: str):
        raise _Stop(Undefined(reason))

    def ambiguous(self, names):
        distinct = sorted(set(names))
        if len(distinct) < 2:
            raise _Stop(Undefined("duplicate element"))
        raise _Stop(Ambiguous(tuple(distinct)))

    # -- exhaustive sources -------------------------------------------------

    def object_items(self, window: list[int]) -> list[Item]:
        names = []
        for index, _, obj, _rel in self.rows:
            if index in window and obj not in names:
                names.append(obj)
        built = []
        for name in names:
            times = []
            for index, ts, obj, _rel in self.rows:
                if index in window and obj == name and ts not in times:
                    times.append(ts)
            built.append(Item("object", name, tuple(sorted(times))))
        return _ordered(built)

    def relationship_items(self, window: list[int]) -> list[Item]:
        names = []
        for index, _, _obj, rel in self.rows:
            if index in window and rel is not None and rel not in names:
                names.append(rel)
        built = []
        for name in names:
            times = []
            for index, ts, _obj, rel in self.rows:
                if index in window and rel == name and ts not in times:
                    times.append(ts)
            built.append(Item("relationship", name, tuple(sorted(times))))
        return _ordered(built)

    def frame_items(self, window: list[int]) -> list[Item]:
        items = []
        for index in sorted(window):
            items.append(
                Item("frame", str(index), (self.graph.frames[index].timestamp,), frame_index=index)
            )
        return items

    def action_items(self) -> list[Item]:
        spans = list(self.graph.actions)
        ordered = []
        while spans:
            best = spans[0]
            for candidate in spans[1:]:
                if (candidate.start, candidate.end, candidate.action_class) < (
                    best.start,
                    best.end,
                    best.action_class,
                ):
                    best = candidate
            ordered.append(Item("action", best.action_class, span=(best.start, best.end)))
            spans.remove(best)
        return ordered

    def pair_times(self, window: list[int], obj: str, rel: str) -> list[float]:
        times = []
        for index, ts, row_obj, row_rel in self.rows:
            if index in window and row_obj == obj and row_rel == rel and ts not in times:
                times.append(ts)
        return sorted(times)

    def match(self, pred: Node, item: Item, window: list[int]) -> Item | None:
        if pred.op == "named":
            return item if item.name == pred.args[0] else None
        if pred.op == "hasRelation":
            times = self.pair_times(window, item.name, pred.args[0])
            if times:
                return Item("object", item.name, tuple(times))
            return None
        if pred.op == "onObject":
            times = []
            for index, ts, row_obj, row_rel in self.rows:
                if (
                    index in window
                    and row_obj == pred.args[0]
                    and row_rel == item.name
                    and ts not in times
                ):
                    times.append(ts)
            if times:
                return Item("relationship", item.name, tuple(sorted(times)))
            return None
        self.undefined(f"unknown predicate {pred.op!r}")

    # -- helpers --------------------------------------------------------------

    def one(self, value) -> Item:
        if isinstance(value, Item):
            return value
        if isinstance(value, tuple):
            if len(value) == 0:
                self.undefined("no satisfying element")
            if len(value) > 1:
                self.ambiguous([item.name for item in value])
            return value[0]
        self.undefined(f"expected an item, got {type(value).__name__}")

    def attribute(self, item: Item, attr: str) -> float:
        value = _attribute_of(item, attr)
        if value is None:
            self.undefined(f"{item.name!r} has no {attr}")
        return value

    def extreme(self, scored: list[tuple[float, Item]], maximize: bool) -> Item:
        best = scored[0]
        for candidate in scored[1:]:
            b_value, b_item = best
            c_value, c_item = candidate
            b_start = _attribute_of(b_item, "start")
            c_start = _attribute_of(c_item, "start")
            b_key = (
                -b_value if maximize else b_value,
                b_start if b_start is not None else float("inf"),
                b_item.name,
            )
            c_key = (
                -c_value if maximize else c_value,
                c_start if c_start is not None else float("inf"),
                c_item.name,
            )
            if c_key < b_key:
                best = candidate
        return best[1]

    # -- evaluation -------------------------------------------------------------

    def run(self, node: Node, window: list[int]):
        op = node.op
        args = node.args

        if op == "const":
            return Item(args[0], args[1])
        if op == "objects":
            return tuple(self.object_items(window))
        if op == "relationships":
            return tuple(self.relationship_items(window))
        if op == "frames":
            return tuple(self.frame_items(window))
        if op == "actions":
            every = self.action_items()
            if not args:
                return tuple(every)
            direction, name = args
            matches = [item for item in every if item.name == name]
            if len(matches) == 0:
                self.undefined(f"action {name!r} absent")
            if len(matches) > 1:
                self.ambiguous([m.name for m in matches])
            anchor = matches[0]
            kept = []
            for item in every:
                if item.key == anchor.key:
                    continue
                if direction == "after" and item.span[0] >= anchor.span[1]:
                    kept.append(item)
                if direction == "before" and item.span[1] <= anchor.span[0]:
                    kept.append(item)
            return tuple(kept)
        if op == "objectWith":
            times = self.pair_times(window, args[0], args[1])
            if not times:
                self.undefined(f"{args[0]!r} never has {args[1]!r}")
            return Item("object", args[0], tuple(times))

        if op == "localize":
            frames = self.run(args[0], window)
            return self.run(args[1], [f.frame_index for f in frames])

        if op == "query":
            item = self.one(self.run(args[0], window))
            if args[1] in ("start", "end", "duration"):
                return self.attribute(item, args[1])
            if item.kind != args[1]:
                self.undefined(f"queried {args[1]!r} but found {item.kind!r}")
            return item.name

        if op == "getFrames":
            anchor = self.one(self.run(args[0], window))
            if anchor.span is None:
                self.undefined("anchor has no time span")
            start, end = anchor.span
            kept = []
            for frame in self.frame_items(window):
                ts = frame.times[0]
                take = {
                    "before": ts < start,
                    "after": ts > end,
                    "while": start <= ts <= end,
                }[args[1]]
                if take:
                    kept.append(frame)
            return tuple(kept)

        if op == "exists":
            items = self.run(args[0], window)
            probe = self.one(self.run(args[1], window))
            hits = [1 for i in items if i.kind == probe.kind and i.name == probe.name]
            return len(hits) > 0

        if op == "objectRelation":
            frames = self.run(args[0], window)
            if isinstance(frames, Item):
                frames = (frames,)
            obj = self.one(self.run(args[1], window))
            rel = self.one(self.run(args[2], window))
            allowed = [f.frame_index for f in frames]
            hits = [
                1
                for index, _, row_obj, row_rel in self.rows
                if index in allowed and row_obj == obj.name and row_rel == rel.name
            ]
            return len(hits) > 0

        if op == "chooseOne":
            items = self.run(args[0], window)
            first = self.one(self.run(args[1], window))
            second = self.one(self.run(args[2], window))
            first_hits = [i for i in items if i.name == first.name]
            second_hits = [i for i in items if i.name == second.name]
            if first_hits and second_hits:
                self.ambiguous([first.name, second.name])
            if not first_hits and not second_hits:
                self.undefined(f"neither {first.name!r} nor {second.name!r} present")
            return (first_hits + second_hits)[0]

        if op == "iterate":
            items = self.run(args[0], window)
            matched = []
            for item in items:  # evaluate the predicate on every element
                refined = self.match(args[1], item, window)
                matched.append(refined)
            kept = [m for m in matched if m is not None]
            deduped = []
            for item in kept:
                if all(existing.key != item.key for existing in deduped):
                    deduped.append(item)
            if args[2] == "all":
                return tuple(deduped)
            return tuple(deduped[: args[2]])

        if op == "verify":
            return "yes" if self.run(args[0], window) else "no"

        if op == "and":
            values = [bool(self.run(a, window)) for a in args]
            return sum(values) == len(values)

        if op == "xor":
            values = [bool(self.run(a, window)) for a in args]
            return sum(values) == 1

        if op == "equals":
            left = self.run(args[0], window)
            right = self.run(args[1], window)
            if isinstance(left, (Item, tuple)) or isinstance(right, (Item, tuple)):
                left, right = self.one(left), self.one(right)
                return (left.kind, left.name) == (right.kind, right.name)
            return left == right

        if op == "comparative":
            first = self.one(self.run(args[0], window))
            second = self.one(self.run(args[1], window))
            scored = [
                (self.attribute(first, args[2]), first),
                (self.attribute(second, args[2]), second),
            ]
            return self.extreme(scored, maximize=(args[3] == "more"))

        if op == "superlative":
            items = self.run(args[0], window)
            if len(items) == 0:
                self.undefined("no elements to rank")
            scored = [(self.attribute(i, args[1]), i) for i in items]
            return self.extreme(scored, maximize=(args[2] == "most"))

        if op == "difference":
            return float(self.run(args[0], window)) - float(self.run(args[1], window))

        if op == "overlap":
            left = self.run(args[0], window)
            right = self.run(args[1], window)
            hits = [
                1
                for a in left
                for b in right
                if (a.kind, a.name) == (b.kind, b.name)
            ]
            return len(hits) > 0

        if op == "containedIn":
            left = self.run(args[0], window)
            right = self.run(args[1], window)
            misses = [
                1
                for a in left
                if len([1 for b in right if (a.kind, a.name) == (b.kind, b.name)]) == 0
            ]
            return len(misses) == 0

        if op == "sort":
            items = list(self.run(args[0], window))
            scored = [(self.attribute(i, args[1]), i) for i in items]
            ordered = []
            while scored:
                best = scored[0]
                for candidate in scored[1:]:
                    if (candidate[0], candidate[1].name) < (best[0], best[1].name):
                        best = candidate
                ordered.append(best[1])
                scored.remove(best)
            return tuple(ordered)

        self.undefined(f"unknown operator {op!r}")


def brute_force_oracle(program: Program | Node, graph: VideoGraph) -> EvalResult:
    root = program.root if isinstance(program, Program) else program
    engine = _BruteForce(graph)
    window = list(range(len(graph.frames)))
    try:
        value = engine.run(root, window)
    except _Stop as stop:
        return stop.result
    if isinstance(value, list):
        value = tuple(value)
    return Answer(value)
