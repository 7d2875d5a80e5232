"""Figure rendering for the stats and evaluate commands."""

from __future__ import annotations

from collections import Counter, defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .balancer import STRUCTURE_ORDER, content_key
from .metrics import EvalReport
from .templates import QuestionRecord

FIG_DPI = 150


def _new_axes(width: float = 6.4, height: float = 4.0):
    fig, ax = plt.subplots(figsize=(width, height))
    ax.grid(True, alpha=0.3, linewidth=0.5)
    ax.set_axisbelow(True)
    return fig, ax


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return path


def structure_share_figure(records: list[QuestionRecord], path: str | Path) -> Path:
    counts = Counter(r.structure for r in records)
    total = max(len(records), 1)
    shares = [counts[s] / total for s in STRUCTURE_ORDER]
    fig, ax = _new_axes()
    bars = ax.bar(STRUCTURE_ORDER, shares, color="#4878a8")
    for bar, share in zip(bars, shares):
        ax.text(bar.get_x() + bar.get_width() / 2, share + 0.01, f"{share:.1%}",
                ha="center", fontsize=8)
    ax.set_ylabel("share of questions")
    ax.set_title(f"Question structure distribution (n={len(records)})")
    ax.set_ylim(0, max(shares + [0.55]) * 1.15)
    return _save(fig, path)


def answer_head_figure(records: list[QuestionRecord], path: str | Path,
                       top: int = 10) -> Path:
    """Share of the most frequent answers in every open category, a view of how
    flat the answer distributions are after balancing."""
    by_category: dict[str, Counter] = defaultdict(Counter)
    for record in records:
        if record.answer_type == "open":
            by_category[content_key(record)][record.answer] += 1
    ranks = defaultdict(float)
    for counts in by_category.values():
        total = sum(counts.values())
        for rank, (_, count) in enumerate(
            sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top], start=1
        ):
            ranks[rank] += count / total / max(len(by_category), 1)
    fig, ax = _new_axes()
    xs = sorted(ranks)
    ax.bar([str(x) for x in xs], [ranks[x] for x in xs], color="#a85448")
    ax.set_xlabel("answer frequency rank")
    ax.set_ylabel("mean share of category mass")
    ax.set_title(f"Open-answer head mass over {len(by_category)} categories")
    return _save(fig, path)


def steps_histogram_figure(records: list[QuestionRecord], path: str | Path) -> Path:
    counts = Counter(r.steps for r in records)
    xs = sorted(counts)
    fig, ax = _new_axes()
    ax.bar([str(x) for x in xs], [counts[x] for x in xs], color="#6a9a58")
    ax.set_xlabel("compositional steps")
    ax.set_ylabel("questions")
    ax.set_title("Compositional step distribution")
    return _save(fig, path)


def steps_accuracy_figure(report: EvalReport, path: str | Path) -> Path:
    """Per-step accuracy scatter, dot area proportional to question count, with
    the fitted regression line when defined."""
    table = report.regression.get("per_step", {})
    steps = sorted(table)
    if not steps:
        fig, ax = _new_axes()
        ax.set_title("No steps to plot")
        return _save(fig, path)
    accuracies = [table[s]["accuracy"] for s in steps]
    counts = [table[s]["count"] for s in steps]
    max_count = max(counts)
    sizes = [40 + 360 * c / max_count for c in counts]
    fig, ax = _new_axes()
    ax.scatter(steps, accuracies, s=sizes, alpha=0.6, color="#4878a8",
               edgecolor="white", zorder=3)
    slope = report.regression.get("slope")
    if slope is not None:
        intercept = report.regression["intercept"]
        xs = [min(steps), max(steps)]
        ax.plot(xs, [intercept + slope * x for x in xs], color="#a85448",
                linewidth=1.5, zorder=2,
                label=f"fit: slope={slope:.3f}, R²={report.regression['r_squared']:.2f}")
        ax.legend(fontsize=8)
    ax.set_xlabel("compositional steps")
    ax.set_ylabel("accuracy")
    ax.set_ylim(-0.02, 1.05)
    ax.set_title("Accuracy vs. compositional steps")
    return _save(fig, path)


def category_accuracy_figure(report: EvalReport, path: str | Path) -> Path:
    labels, accuracies, baselines = [], [], []
    for section, rows in (
        ("reasoning", report.reasoning),
        ("semantic", report.semantic),
        ("structure", report.structure),
    ):
        for name, cells in rows.items():
            cell = cells.get("all")
            if cell is None or not cell.count:
                continue
            labels.append(f"{section[:4]}:{name}")
            accuracies.append(cell.accuracy)
            baselines.append(cell.most_likely)
    if not labels:
        fig, ax = _new_axes()
        ax.set_title("No categories to plot")
        return _save(fig, path)
    fig, ax = _new_axes(max(6.4, 0.5 * len(labels)), 4.2)
    xs = range(len(labels))
    ax.bar([x - 0.2 for x in xs], accuracies, width=0.4, label="model", color="#4878a8")
    ax.bar([x + 0.2 for x in xs], baselines, width=0.4, label="most likely",
           color="#c8b458")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    ax.set_title("Accuracy by category")
    return _save(fig, path)


def stats_figures(records: list[QuestionRecord], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    return [
        structure_share_figure(records, directory / "structure_shares.png"),
        answer_head_figure(records, directory / "answer_heads.png"),
        steps_histogram_figure(records, directory / "steps_histogram.png"),
    ]


def evaluation_figures(report: EvalReport, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    return [
        steps_accuracy_figure(report, directory / "accuracy_by_steps.png"),
        category_accuracy_figure(report, directory / "accuracy_by_category.png"),
    ]
