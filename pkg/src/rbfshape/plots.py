"""Render report figures to files next to the CSV output. Headless only."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_MARKERS = ("o", "s", "^", "v", "D", "x", "*", "+")


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def convergence_figure(rows, path, title: str = "") -> Path:
    """log-log error vs number of centers, one line per strategy/series."""
    series: dict[str, list] = {}
    for row in rows:
        name = row.strategy
        if not math.isinf(row.log10_theta):
            name = f"{row.strategy}(theta={row.log10_theta:g})"
        if row.function:
            name = f"{row.function}:{name}"
        series.setdefault(name, []).append((row.centers, row.l2_error))

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, (name, pts) in enumerate(sorted(series.items())):
        pts = sorted(pts)
        ax.loglog(
            [p[0] for p in pts], [p[1] for p in pts],
            marker=_MARKERS[i % len(_MARKERS)], label=name,
        )
    ax.set_xlabel("number of centers")
    ax.set_ylabel("L2 error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def timing_figure(rows, path, title: str = "") -> Path:
    series: dict[str, list] = {}
    for row in rows:
        series.setdefault(row.strategy, []).append((row.centers, row.seconds_total))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, (name, pts) in enumerate(sorted(series.items())):
        pts = sorted(pts)
        ax.loglog(
            [p[0] for p in pts], [p[1] for p in pts],
            marker=_MARKERS[i % len(_MARKERS)], label=name,
        )
    ax.set_xlabel("number of centers")
    ax.set_ylabel("selection time [s]")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def loss_figure(history, path, title: str = "training") -> Path:
    epochs = [h["epoch"] for h in history]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8), sharex=True)
    axes[0].semilogy(epochs, [h["train_loss"] for h in history])
    axes[0].set_title("train loss")
    axes[1].semilogy(epochs, [h["val_mse"] for h in history])
    axes[1].set_title("validation MSE")
    for ax in axes:
        ax.set_xlabel("epoch")
        ax.grid(True, alpha=0.3)
    fig.suptitle(title)
    return _finish(fig, path)


def distance_histogram_figure(report, path, title: str = "") -> Path:
    """Corrected-cloud vs training-set mean pairwise distance distributions."""
    fig, ax = plt.subplots(figsize=(6, 4))
    centers = (report.bin_edges[:-1] + report.bin_edges[1:]) / 2.0
    width = (report.bin_edges[1] - report.bin_edges[0]) * 0.45

    def normalize(counts):
        total = counts.sum()
        return counts / total if total else counts

    ax.bar(centers - width / 2, normalize(report.training_counts), width=width, label="training")
    ax.bar(centers + width / 2, normalize(report.corrected_counts), width=width, label="corrected")
    ax.set_xlabel("mean pairwise distance")
    ax.set_ylabel("fraction")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)
