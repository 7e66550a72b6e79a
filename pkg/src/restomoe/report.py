"""Matplotlib figure rendering for the CLI report paths.

Figures are written next to the delimited text outputs; the Agg backend
keeps everything headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_loss_curves(metrics: list[str], path: str | Path) -> None:
    """Plot per-step loss components from metrics-log lines."""
    rows = np.array([[float(v) for v in line.split()] for line in metrics])
    steps = rows[:, 0]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    for ax, col, name in zip(
        axes.ravel(), (1, 2, 3, 4), ("charbonnier", "balance", "spectral", "total")
    ):
        ax.plot(steps, rows[:, col], lw=1)
        ax.set_title(name)
        ax.set_xlabel("step")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_eval_figure(records, path: str | Path) -> None:
    """Per-image PSNR bars with an SSIM overlay."""
    names = [Path(r.path).stem.replace("_degraded", "") for r in records]
    psnrs = [r.psnr for r in records]
    ssims = [r.ssim for r in records]
    fig, ax1 = plt.subplots(figsize=(max(6, 0.6 * len(names)), 4))
    xs = np.arange(len(names))
    ax1.bar(xs, psnrs, color="#4878cf", label="PSNR (dB)")
    ax1.set_ylabel("PSNR (dB)")
    ax1.set_xticks(xs)
    ax1.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax2 = ax1.twinx()
    ax2.plot(xs, ssims, "o-", color="#d65f5f", label="SSIM")
    ax2.set_ylabel("SSIM")
    ax2.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_expert_load(stats, path: str | Path) -> None:
    """Grouped bars of per-expert confidence totals and selection counts."""
    fig, axes = plt.subplots(1, max(1, len(stats)), figsize=(4 * max(1, len(stats)), 3.5))
    if len(stats) == 1:
        axes = [axes]
    for i, (ax, s) in enumerate(zip(axes, stats)):
        w = s.weight_totals().data.astype(np.float64)
        counts = s.selection_totals()
        n = len(counts)
        xs = np.arange(n)
        ax.bar(xs - 0.2, w / max(w.sum(), 1e-9), width=0.4, label="confidence share")
        ax.bar(xs + 0.2, counts / max(counts.sum(), 1e-9), width=0.4, label="selection share")
        ax.set_title(f"refiner {i}")
        ax.set_xticks(xs)
        ax.set_xlabel("expert")
        if i == 0:
            ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_gate_grid(gates: list[tuple[str, np.ndarray]], path: str | Path) -> None:
    """Montage of gate maps, one panel per encoder block."""
    n = len(gates)
    cols = min(4, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    for ax, (name, gm) in zip(axes.ravel(), gates):
        im = ax.imshow(gm, cmap="viridis", vmin=0, vmax=1)
        ax.set_title(name, fontsize=9)
        ax.axis("off")
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
