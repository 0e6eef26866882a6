"""Figures for sweep and bound reports, written straight to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_sweep(rows, path: str | Path, threshold: float = 6.0, title: str | None = None) -> None:
    """Bar chart of mean Z (with std error bars) per attack and strength."""
    plt = _pyplot()
    labels = [r.attack if r.strength is None else f"{r.attack}@{r.strength:g}" for r in rows]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.55 * len(rows) + 2), 4.0))
    ax.bar(range(len(rows)), [r.mean_z for r in rows], yerr=[r.std_z for r in rows],
           color="tab:blue", alpha=0.8, capsize=3)
    ax.axhline(threshold, color="tab:red", linestyle="--", label=f"threshold {threshold:g}")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel("mean Z")
    ax.set_title(title or "Detection Z under attacks")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bounds(sigmas: Sequence[float], values: Sequence[float], path: str | Path,
                ylabel: str = "lower bound on E[Z]", title: str | None = None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(sigmas, values, marker="o")
    ax.set_xlabel("noise sigma")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
