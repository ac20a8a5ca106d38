"""Report emitters: delimited tables with matplotlib figures alongside.

Every report writes a CSV and a PNG of the same data into the report
directory, so results can be consumed by scripts and eyeballed directly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import ContextStats, KFoldResult
from .extraction import ExtractionReport, MatchRates, classify_balanced
from .loop import LoopState


def _ensure_dir(out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def write_f1_history(state: LoopState, out_dir: str | Path) -> dict[str, Path]:
    """Per-round F1 of the labeled-set phase: f1_history.csv + .png."""
    out_dir = _ensure_dir(out_dir)
    csv_path = out_dir / "f1_history.csv"
    png_path = out_dir / "f1_history.png"
    with csv_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["round", "f1"])
        for round_no, f1 in state.f1_history:
            writer.writerow([round_no, f"{f1:.6f}"])

    rounds = [r for r, _ in state.f1_history]
    scores = [f for _, f in state.f1_history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rounds, scores, marker="o")
    ax.set_xlabel("training round")
    ax.set_ylabel("F1 on test set")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("Labeled-set phase: F1 per round")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}


def write_kfold_report(result: KFoldResult, out_dir: str | Path, name: str = "kfold") -> dict[str, Path]:
    """Per-fold precision/recall/F1 table plus the fold-average row."""
    out_dir = _ensure_dir(out_dir)
    csv_path = out_dir / f"{name}.csv"
    png_path = out_dir / f"{name}.png"
    with csv_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["fold", "precision", "recall", "f1"])
        for fold in result.folds:
            writer.writerow(
                [fold.fold + 1, f"{fold.precision * 100:.1f}", f"{fold.recall * 100:.1f}", f"{fold.f1 * 100:.1f}"]
            )
        writer.writerow(["average", "", "", f"{result.mean_f1 * 100:.1f}"])

    fig, ax = plt.subplots(figsize=(6, 4))
    folds = [f.fold + 1 for f in result.folds]
    ax.bar(folds, [f.f1 for f in result.folds], color="tab:blue", label="fold F1")
    ax.axhline(result.mean_f1, color="tab:red", linestyle="--", label=f"average {result.mean_f1:.3f}")
    ax.set_xlabel("fold")
    ax.set_ylabel("F1")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("K-fold cross validation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}


def write_context_report(
    stats_list: Sequence[ContextStats], out_dir: str | Path, top_n: int = 10, name: str = "context_tokens"
) -> dict[str, Path]:
    """Most-frequent context tokens per window size, as table and chart."""
    out_dir = _ensure_dir(out_dir)
    csv_path = out_dir / f"{name}.csv"
    png_path = out_dir / f"{name}.png"
    with csv_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["window", "scope", "rank", "token", "count"])
        for stats in stats_list:
            for rank, (token, count) in enumerate(stats.top(top_n), start=1):
                writer.writerow([stats.window, stats.scope.value, rank, token, count])

    fig, axes = plt.subplots(1, max(1, len(stats_list)), figsize=(4.5 * max(1, len(stats_list)), 4.5))
    if len(stats_list) == 1:
        axes = [axes]
    for ax, stats in zip(axes, stats_list):
        top = stats.top(top_n)
        tokens = [t for t, _ in top][::-1]
        counts = [c for _, c in top][::-1]
        ax.barh(tokens, counts, color="tab:green")
        ax.set_title(f"window={stats.window} ({stats.scope.value})")
        ax.set_xlabel("count")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}


def write_extraction_report(report: ExtractionReport, out_dir: str | Path) -> dict[str, Path]:
    """Ranked entity table plus a per-model detection-count scatter."""
    from .extraction import write_report_csv

    out_dir = _ensure_dir(out_dir)
    csv_path = out_dir / "entities.csv"
    png_path = out_dir / "detection_counts.png"
    write_report_csv(report, csv_path)

    balanced = [t for t in report.tallies if classify_balanced(t).value == "balanced"]
    imbalanced = [t for t in report.tallies if classify_balanced(t).value == "imbalanced"]
    fig, ax = plt.subplots(figsize=(5.5, 5))
    for group, color, label in (
        (balanced, "tab:blue", "balanced"),
        (imbalanced, "tab:orange", "imbalanced"),
    ):
        if group:
            ax.scatter(
                [t.count_a + 0.5 for t in group],
                [t.count_b + 0.5 for t in group],
                s=12,
                alpha=0.6,
                color=color,
                label=label,
            )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("model A detections")
    ax.set_ylabel("model B detections")
    ax.set_title("Cross-model detection counts")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}


def write_match_report(rates: Sequence[MatchRates], out_dir: str | Path) -> dict[str, Path]:
    """Reference match rates per pool: match_rates.csv + grouped bars."""
    out_dir = _ensure_dir(out_dir)
    csv_path = out_dir / "match_rates.csv"
    png_path = out_dir / "match_rates.png"
    with csv_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["pool", "top_k", "exact", "exact_plus_partial"])
        for r in rates:
            writer.writerow([r.pool, r.top_k, f"{r.exact:.4f}", f"{r.exact_plus_partial:.4f}"])

    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.35
    xs = range(len(rates))
    ax.bar([x - width / 2 for x in xs], [r.exact for r in rates], width, label="exact")
    ax.bar(
        [x + width / 2 for x in xs],
        [r.exact_plus_partial for r in rates],
        width,
        label="exact + partial",
    )
    ax.set_xticks(list(xs))
    ax.set_xticklabels([f"{r.pool}\n(top {r.top_k})" for r in rates])
    ax.set_ylabel("match rate")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("Reference-list match rates")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "png": png_path}
