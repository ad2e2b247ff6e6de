"""Figures written next to the CSV output. Uses the non-interactive Agg backend."""

from __future__ import annotations

import math
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from adaptive_levels.level import Level  # noqa: E402

if TYPE_CHECKING:
    from adaptive_levels.experiment import ResultsTable

MATERIAL_COLOURS = {"wood": "#b5835a", "ice": "#9fd3e6", "stone": "#8c8c8c"}


def plot_fitness(table: "ResultsTable", path: str | Path, title: str = "") -> Path:
    """Average fitness per generation with a one-std band and faint per-run curves."""
    path = Path(path)
    means = table.means()
    gens = range(table.generations)
    agg = means.mean(axis=0)
    spread = means.std(axis=0)
    fig, ax = plt.subplots(figsize=(6, 4))
    for run in means:
        ax.plot(gens, run, color="0.8", linewidth=0.7)
    ax.fill_between(gens, agg - spread, agg + spread, alpha=0.25)
    ax.plot(gens, agg, linewidth=2, label=f"mean of {len(means)} runs")
    ax.set_xlabel("generation")
    ax.set_ylabel("average fitness")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def draw_level(ax, level: Level) -> None:
    x0, y0, x1, y1 = level.bounds
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_aspect("equal")
    for p in level.platforms:
        ax.add_patch(Rectangle((p.x, p.y), p.width, p.height, color="#444444"))
    for b in level.blocks:
        ax.add_patch(
            Rectangle((b.x, b.y), b.width, b.height, facecolor=MATERIAL_COLOURS[b.material], edgecolor="black", linewidth=0.3)
        )
    for t in level.tnt:
        r = t.rect
        ax.add_patch(Rectangle((r.x, r.y), r.width, r.height, color="#d62728"))
    for p in level.pigs:
        r = p.rect
        ax.add_patch(Rectangle((r.x, r.y), r.width, r.height, color="#2ca02c"))
    sx, sy = level.slingshot
    ax.plot([sx], [sy], marker="^", color="black")
    ax.set_xticks([])
    ax.set_yticks([])


def plot_levels(levels: Sequence[Level], path: str | Path, labels: Sequence[str] | None = None) -> Path:
    path = Path(path)
    n = max(len(levels), 1)
    cols = min(n, 3)
    rows = math.ceil(n / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 2.2 * rows), squeeze=False)
    for k, ax in enumerate(axes.flat):
        if k < len(levels):
            draw_level(ax, levels[k])
            title = levels[k].level_id
            if labels is not None:
                title = f"{labels[k]}: {title}"
            ax.set_title(title, fontsize=8)
        else:
            ax.axis("off")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
