"""Figures written next to the CSV/JSON outputs of the command-line tools."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dataio import ClassHistogram  # noqa: E402

# fixed metadata keeps PNG bytes reproducible across runs
_PNG_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=_PNG_META)
    plt.close(fig)
    return path


def class_histogram(original: ClassHistogram, train: ClassHistogram, path: str | Path, title: str = "") -> Path:
    """Grey bars for the full dataset, blue for the train split, black line at the balancing target."""
    classes = sorted(set(original.counts) | set(train.counts))
    x = np.arange(len(classes))
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.bar(x, [original.counts.get(c, 0) for c in classes], color="0.75", label="original")
    ax.bar(x, [train.counts.get(c, 0) for c in classes], width=0.55, color="tab:blue", label="train split")
    ax.axhline(train.counts[train.predominant], color="black", lw=1)
    ax.set_xticks(x, [str(c) for c in classes])
    ax.set_xlabel("class")
    ax.set_ylabel("rows")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def loss_curves(g_loss: Sequence[float], d_loss: Sequence[float], path: str | Path, smooth: int = 50) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    it = np.arange(len(g_loss))
    for values, label in ((g_loss, "G_loss"), (d_loss, "D_loss")):
        values = np.asarray(values, dtype=float)
        ax.plot(it, values, lw=0.5, alpha=0.3)
        if len(values) >= smooth > 1:
            kernel = np.ones(smooth) / smooth
            ax.plot(it[smooth - 1 :], np.convolve(values, kernel, mode="valid"), lw=1.2, label=label)
        else:
            ax.plot(it, values, lw=1.2, label=label)
    ax.set_xlabel("generator iteration")
    ax.set_ylabel("loss")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def metric_bars(reports, path: str | Path) -> Path:
    """One panel per metric, one bar per augmenter (baseline first)."""
    names = [r.augmenter for r in reports]
    metrics = [("variability", "Variability"), ("diversity", "Diversity"), ("efficacy", "F1-micro")]
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
    for ax, (key, title) in zip(axes, metrics):
        vals = [getattr(r, key) for r in reports]
        errs = [getattr(r, f"{key}_std") or 0.0 for r in reports]
        heights = [np.nan if v is None else v for v in vals]
        colors = ["0.6" if n == "baseline" else "tab:blue" for n in names]
        ax.bar(np.arange(len(names)), heights, yerr=errs, color=colors, capsize=2)
        ax.set_xticks(np.arange(len(names)), names, rotation=30, ha="right", fontsize=8)
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    return _save(fig, path)
