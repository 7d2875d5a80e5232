"""Two-stage rejection-sampling bias reduction.

Stage one smooths answer distributions (binary categories equalized, open
categories flattened until the head condition holds), first per reasoning
type and then per content category. Stage two deletes toward the target
structural mix, spreading deletions evenly over templates and categories
while preserving each category's answer distribution shape.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .templates import QuestionRecord

REASONING_ORDER = (
    "obj-rel",
    "rel-action",
    "obj-act",
    "superlative",
    "sequencing",
    "exists",
    "duration-comparison",
    "activity-recognition",
    "other",
)
STRUCTURE_ORDER = ("query", "compare", "choose", "verify", "logic")


@dataclass
class BalanceConfig:
    b_start: float = 0.70
    b_decrement: float = 0.05
    b_floor: float = 0.10
    head_share: float = 0.20
    mass_cap: float = 0.30
    tail_ignore: float = 0.05
    structural_targets: dict[str, float] = field(
        default_factory=lambda: {
            "query": 0.50,
            "compare": 0.15,
            "choose": 0.15,
            "verify": 0.15,
            "logic": 0.05,
        }
    )
    share_tolerance: float = 0.03
    logic_tolerance: float = 0.02
    seed: int = 0
    # Open question in the source method: the head/tail ratio can be measured
    # in question mass (default) or in answer-type counts.
    head_measure: str = "mass"

    def to_json(self) -> dict:
        return {
            "b_start": self.b_start,
            "b_decrement": self.b_decrement,
            "b_floor": self.b_floor,
            "head_share": self.head_share,
            "mass_cap": self.mass_cap,
            "tail_ignore": self.tail_ignore,
            "structural_targets": dict(self.structural_targets),
            "share_tolerance": self.share_tolerance,
            "logic_tolerance": self.logic_tolerance,
            "seed": self.seed,
            "head_measure": self.head_measure,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "BalanceConfig":
        config = cls()
        for key, value in payload.items():
            if hasattr(config, key):
                setattr(config, key, value)
        return config


@dataclass
class BalancePlan:
    deletions: dict[str, str] = field(default_factory=dict)  # qid -> stage
    quota_ledger: list[dict] = field(default_factory=list)
    flagged: list[str] = field(default_factory=list)

    def delete(self, qid: str, stage: str) -> None:
        self.deletions[qid] = stage

    def log(self, **entry) -> None:
        self.quota_ledger.append(entry)


def _rng(seed: int, stage: str, key: str) -> random.Random:
    digest = hashlib.sha1(f"{seed}|{stage}|{key}".encode()).hexdigest()
    return random.Random(int(digest[:16], 16))


def content_key(record: QuestionRecord) -> str:
    parts = [record.primary_reasoning(), record.template_id]
    parts.extend(sorted(record.bindings.values()))
    return "/".join(parts)


def check_condition(counts: dict[str, int], head_share: float = 0.20,
                    mass_cap: float = 0.30) -> bool:
    """True iff the most frequent ceil(head_share * |answers|) answers hold at
    most mass_cap of the question mass."""
    total = sum(counts.values())
    if total == 0 or len(counts) <= 1:
        return len(counts) <= 1
    k = math.ceil(head_share * len(counts))
    head = sorted(counts.values(), reverse=True)[:k]
    return sum(head) <= mass_cap * total


def smooth_binary(records: list[QuestionRecord], rng: random.Random) -> list[str]:
    """Qids to delete so both answers survive in equal counts; a one-answer
    category is deleted outright."""
    by_answer: dict[str, list[str]] = defaultdict(list)
    for record in records:
        by_answer[record.answer].append(record.qid)
    if len(by_answer) == 1:
        return [r.qid for r in records]
    if len(by_answer) != 2:
        raise ValueError(f"binary smoothing needs 2 answers, got {len(by_answer)}")
    (a1, q1), (a2, q2) = sorted(by_answer.items())
    target = min(len(q1), len(q2))
    deletions = []
    for qids in (q1, q2):
        excess = len(qids) - target
        if excess > 0:
            deletions.extend(rng.sample(sorted(qids), excess))
    return deletions


def smooth_open(
    records: list[QuestionRecord], config: BalanceConfig, rng: random.Random
) -> tuple[list[str], bool]:
    """Head/tail flattening; returns (deleted qids, flagged).

    The splitting index walks down the frequency order deleting from the head
    until head/tail <= b or a deletion would invert the frequency order; if the
    condition still fails at the end of the walk, b is lowered and the walk
    repeats. Flagged means the floor was reached without meeting the condition.
    """
    by_answer: dict[str, list[str]] = defaultdict(list)
    for record in records:
        by_answer[record.answer].append(record.qid)
    if len(by_answer) <= 1:
        return [r.qid for r in records], False

    order = sorted(by_answer, key=lambda a: (-len(by_answer[a]), a))
    counts = {a: len(by_answer[a]) for a in order}
    total = sum(counts.values())

    # Ignore the tail answers that cumulatively hold at most tail_ignore mass.
    ignored: set[str] = set()
    cumulative = 0
    for answer in reversed(order):
        cumulative += counts[answer]
        if cumulative <= config.tail_ignore * total:
            ignored.add(answer)
        else:
            break
    active = [a for a in order if a not in ignored]

    def measure(answers: list[str]) -> float:
        if config.head_measure == "count":
            return float(len(answers))
        return float(sum(counts[a] for a in answers))

    def deletable(index: int) -> bool:
        answer = order[index]
        if counts[answer] <= 0:
            return False
        if index + 1 < len(order):
            return counts[answer] - 1 >= counts[order[index + 1]]
        return counts[answer] > 1

    b = config.b_start
    flagged = False
    while True:
        for split in range(1, max(len(active), 1)):
            head = active[:split]
            tail = active[split:]
            tail_mass = measure(tail)
            if tail_mass <= 0:
                break
            while measure(head) > b * tail_mass:
                candidates = [
                    a for a in head if deletable(order.index(a))
                ]
                if not candidates:
                    break
                weights = [counts[a] for a in candidates]
                chosen = rng.choices(candidates, weights=weights, k=1)[0]
                counts[chosen] -= 1
        if check_condition(counts, config.head_share, config.mass_cap):
            break
        b = round(b - config.b_decrement, 10)
        if b < config.b_floor - 1e-9:
            flagged = not check_condition(counts, config.head_share, config.mass_cap)
            break

    deletions = []
    for answer in order:
        keep = counts[answer]
        qids = sorted(by_answer[answer])
        excess = len(qids) - keep
        if excess > 0:
            deletions.extend(rng.sample(qids, excess))
    return deletions, flagged


def _is_binary_category(records: list[QuestionRecord]) -> bool:
    return all(r.answer_type == "binary" for r in records)


def balance_answers(
    records: list[QuestionRecord], config: BalanceConfig
) -> tuple[list[QuestionRecord], BalancePlan]:
    """Algorithm-one pass: localization split, reasoning level, content level."""
    plan = BalancePlan()
    alive: dict[str, QuestionRecord] = {r.qid: r for r in records}

    # Localization sub-balance inside each content category: the number of
    # answer-changed localized questions is brought within one of unchanged.
    by_content: dict[str, list[QuestionRecord]] = defaultdict(list)
    for record in records:
        by_content[content_key(record)].append(record)
    for key in sorted(by_content):
        changed = sorted(
            r.qid for r in by_content[key] if r.localization == "answer-changed"
        )
        unchanged = sorted(
            r.qid for r in by_content[key] if r.localization == "answer-unchanged"
        )
        larger, smaller = (changed, unchanged) if len(changed) >= len(unchanged) else (unchanged, changed)
        excess = len(larger) - len(smaller) - 1
        if excess > 0:
            rng = _rng(config.seed, "localization", key)
            for qid in rng.sample(larger, excess):
                plan.delete(qid, "localization")
                alive.pop(qid, None)
        if excess > 0:
            plan.log(stage="localization", category=key, deleted=excess)

    # Reasoning-type level.
    for reasoning in REASONING_ORDER:
        for answer_type in ("binary", "open"):
            group = [
                r
                for r in alive.values()
                if answer_type == r.answer_type
                and (reasoning in r.reasoning or (reasoning == "other" and not r.reasoning))
            ]
            group.sort(key=lambda r: r.qid)
            if not group:
                continue
            key = f"{reasoning}/{answer_type}"
            rng = _rng(config.seed, "answer-reasoning", key)
            answers = {r.answer for r in group}
            if answer_type == "binary":
                if len(answers) > 2:
                    continue  # aggregated choose options; content level equalizes
                deletions = smooth_binary(group, rng)
                for qid in deletions:
                    plan.delete(qid, "answer")
                    alive.pop(qid, None)
                if deletions:
                    plan.log(stage="answer", level="reasoning", category=key,
                             deleted=len(deletions))
            else:
                deletions, flagged = smooth_open(group, config, rng)
                for qid in deletions:
                    plan.delete(qid, "answer")
                    alive.pop(qid, None)
                if flagged:
                    plan.flagged.append(key)
                if deletions:
                    plan.log(stage="answer", level="reasoning", category=key,
                             deleted=len(deletions), flagged=flagged)

    # Content-category level.
    by_content = defaultdict(list)
    for record in alive.values():
        by_content[content_key(record)].append(record)
    for key in sorted(by_content):
        group = sorted(by_content[key], key=lambda r: r.qid)
        rng = _rng(config.seed, "answer-content", key)
        if _is_binary_category(group):
            answers = {r.answer for r in group}
            if len(answers) > 2:
                plan.flagged.append(key)
                continue
            deletions = smooth_binary(group, rng)
            flagged = False
        else:
            deletions, flagged = smooth_open(group, config, rng)
        for qid in deletions:
            plan.delete(qid, "answer")
            alive.pop(qid, None)
        if flagged:
            plan.flagged.append(key)
        if deletions:
            plan.log(stage="answer", level="content", category=key,
                     deleted=len(deletions), flagged=flagged)

    survivors = sorted(alive.values(), key=lambda r: r.qid)
    return survivors, plan


def _largest_remainder(targets: dict[str, float]) -> dict[str, int]:
    floors = {k: int(math.floor(v)) for k, v in targets.items()}
    remainder = int(round(sum(targets.values()))) - sum(floors.values())
    order = sorted(targets, key=lambda k: (-(targets[k] - floors[k]), k))
    for key in order[:remainder]:
        floors[key] += 1
    return floors


def _waterline(counts: dict[str, int], total_keep: int) -> dict[str, int]:
    """Keep total_keep items spread as evenly as possible, clamped per key."""
    if not counts:
        return {}
    total_keep = min(total_keep, sum(counts.values()))
    keys = sorted(counts)
    low, high = 0, max(counts.values())
    while low < high:
        mid = (low + high + 1) // 2
        if sum(min(counts[k], mid) for k in keys) <= total_keep:
            low = mid
        else:
            high = mid - 1
    keep = {k: min(counts[k], low) for k in keys}
    shortfall = total_keep - sum(keep.values())
    for key in sorted(keys, key=lambda k: (-(counts[k] - keep[k]), k)):
        if shortfall <= 0:
            break
        if keep[key] < counts[key]:
            keep[key] += 1
            shortfall -= 1
    return keep


def balance_structures(
    records: list[QuestionRecord], config: BalanceConfig
) -> tuple[list[QuestionRecord], BalancePlan]:
    """Algorithm-two pass: delete toward the target structural shares."""
    plan = BalancePlan()
    alive: dict[str, QuestionRecord] = {r.qid: r for r in records}
    targets = config.structural_targets
    struct_counts = Counter(r.structure for r in records)

    present = {s: struct_counts[s] for s in STRUCTURE_ORDER if struct_counts[s] > 0}
    missing = [s for s in STRUCTURE_ORDER if struct_counts[s] == 0 and targets.get(s, 0) > 0]
    for s in missing:
        plan.flagged.append(f"structure-missing/{s}")
    if not present:
        return records, plan

    final_total = min(
        int(math.floor(struct_counts[s] / targets[s]))
        for s in present
        if targets.get(s, 0) > 0
    )
    keep_by_struct = _largest_remainder(
        {s: targets[s] * final_total for s in present}
    )
    for s in keep_by_struct:
        keep_by_struct[s] = min(keep_by_struct[s], struct_counts[s])

    for structure in STRUCTURE_ORDER:
        if structure not in present:
            continue
        struct_records = [r for r in alive.values() if r.structure == structure]
        keep_total = keep_by_struct[structure]
        delete_total = len(struct_records) - keep_total
        plan.log(stage="structural", structure=structure,
                 count=len(struct_records), keep=keep_total, delete=delete_total)
        if delete_total <= 0:
            continue

        by_template: dict[str, list[QuestionRecord]] = defaultdict(list)
        for record in struct_records:
            by_template[record.template_id].append(record)
        template_keep = _waterline(
            {t: len(v) for t, v in by_template.items()}, keep_total
        )

        for template_id in sorted(by_template):
            t_records = by_template[template_id]
            t_keep = template_keep[template_id]
            by_category: dict[str, list[QuestionRecord]] = defaultdict(list)
            for record in t_records:
                by_category[content_key(record)].append(record)
            category_keep = _waterline(
                {c: len(v) for c, v in by_category.items()}, t_keep
            )
            for category in sorted(by_category):
                c_records = by_category[category]
                c_keep = category_keep[category]
                if c_keep >= len(c_records):
                    continue
                # Split the quota across answers proportionally so the
                # category's answer distribution shape survives.
                by_answer: dict[str, list[QuestionRecord]] = defaultdict(list)
                for record in c_records:
                    by_answer[record.answer].append(record)
                answer_keep = _largest_remainder(
                    {
                        a: len(v) * c_keep / len(c_records)
                        for a, v in by_answer.items()
                    }
                )
                rng = _rng(config.seed, "structural", f"{template_id}/{category}")
                for answer in sorted(by_answer):
                    qids = sorted(r.qid for r in by_answer[answer])
                    keep_n = min(answer_keep.get(answer, 0), len(qids))
                    for qid in rng.sample(qids, len(qids) - keep_n):
                        plan.delete(qid, "structural")
                        alive.pop(qid, None)

    survivors = sorted(alive.values(), key=lambda r: r.qid)
    final = Counter(r.structure for r in survivors)
    total = len(survivors)
    if total:
        if final["query"] / total < targets.get("query", 0.5) - 1e-9:
            plan.flagged.append("structural-infeasible/query")
        for structure in STRUCTURE_ORDER:
            if structure == "query" or structure not in present:
                continue
            tolerance = (
                config.logic_tolerance if structure == "logic" else config.share_tolerance
            )
            share = final[structure] / total
            if abs(share - targets.get(structure, 0)) > tolerance:
                plan.flagged.append(f"structural-off-target/{structure}")
    return survivors, plan


def balance_corpus(
    records: list[QuestionRecord], config: BalanceConfig
) -> tuple[list[QuestionRecord], BalancePlan]:
    """Both passes; the merged plan records every deletion with its stage."""
    answered, plan_a = balance_answers(records, config)
    structured, plan_b = balance_structures(answered, config)
    merged = BalancePlan(
        deletions={**plan_a.deletions, **plan_b.deletions},
        quota_ledger=plan_a.quota_ledger + plan_b.quota_ledger,
        flagged=plan_a.flagged + plan_b.flagged,
    )
    return structured, merged


# ---------------------------------------------------------------------------
# Audits (used by the acceptance suite and the stats command)


def audit_binary_categories(records: list[QuestionRecord]) -> dict[str, int]:
    """Max |count(a1) - count(a2)| per binary content category."""
    gaps = {}
    by_content: dict[str, list[QuestionRecord]] = defaultdict(list)
    for record in records:
        by_content[content_key(record)].append(record)
    for key, group in by_content.items():
        if not _is_binary_category(group):
            continue
        counts = Counter(r.answer for r in group)
        if len(counts) == 2:
            values = sorted(counts.values())
            gaps[key] = values[1] - values[0]
        elif len(counts) == 1:
            gaps[key] = len(group)
    return gaps


def audit_open_categories(
    records: list[QuestionRecord], config: BalanceConfig, flagged: list[str]
) -> dict[str, bool]:
    """Condition pass/fail per unflagged open category (content level)."""
    results = {}
    by_content: dict[str, list[QuestionRecord]] = defaultdict(list)
    for record in records:
        if record.answer_type == "open":
            by_content[content_key(record)].append(record)
    for key, group in by_content.items():
        if key in flagged:
            continue
        counts = Counter(r.answer for r in group)
        results[key] = check_condition(dict(counts), config.head_share, config.mass_cap)
    return results


def structure_shares(records: list[QuestionRecord]) -> dict[str, float]:
    counts = Counter(r.structure for r in records)
    total = len(records)
    return {s: counts[s] / total for s in STRUCTURE_ORDER if total}
