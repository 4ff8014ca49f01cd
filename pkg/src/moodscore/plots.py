"""Figure rendering for the report paths.  Every plot goes straight to a file
next to its delimited/JSON counterpart; nothing is ever shown interactively."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .world.arcs import AffectTrajectory


def plot_loss_curve(history: list[float], path: Path | str, title: str = "training loss"):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(1, len(history) + 1), history, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trajectory(
    traj: AffectTrajectory,
    path: Path | str,
    decoded: tuple[np.ndarray, np.ndarray, int] | None = None,
    title: str = "affect trajectory",
):
    """VA curves over time; optionally overlay per-window oracle estimates
    given as (valence, arousal, window_s)."""
    fig, axes = plt.subplots(2, 1, figsize=(8, 4.5), sharex=True)
    t = np.arange(len(traj))
    for ax, series, label in zip(axes, (traj.valence, traj.arousal), ("valence", "arousal")):
        ax.plot(t, series, lw=1.2, label=label)
        ax.set_ylim(-1.1, 1.1)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    if decoded is not None:
        dec_v, dec_a, window_s = decoded
        centers = (np.arange(len(dec_v)) + 0.5) * window_s
        axes[0].plot(centers, dec_v, "o--", ms=3, lw=0.8, label="decoded")
        axes[1].plot(centers, dec_a, "o--", ms=3, lw=0.8, label="decoded")
        axes[0].legend(loc="upper right", fontsize=8)
    axes[1].set_xlabel("time (s)")
    axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_alignment(per_clip: list[dict], path: Path | str):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    idx = [row["clip"] for row in per_clip]
    width = 0.4
    ax.bar([i - width / 2 for i in idx], [row["valence"] for row in per_clip], width,
           label="valence")
    ax.bar([i + width / 2 for i in idx], [row["arousal"] for row in per_clip], width,
           label="arousal")
    ax.axhline(0, color="k", lw=0.6)
    ax.set_xlabel("clip")
    ax.set_ylabel("alignment (Pearson r)")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_embedding_stats(gen_emb: np.ndarray, ref_emb: np.ndarray, path: Path | str):
    """Histograms of the first two embedding statistics, generated vs reference."""
    names = ("switch rate", "major-pool fraction")
    fig, axes = plt.subplots(1, 2, figsize=(8, 3))
    for col, (ax, name) in enumerate(zip(axes, names)):
        for emb, label in ((gen_emb, "generated"), (ref_emb, "reference")):
            ax.hist(emb[:, col::4].reshape(-1), bins=24, alpha=0.6, label=label)
        ax.set_title(name, fontsize=9)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_seams(scores: np.ndarray, seam_seconds: tuple[int, ...], path: Path | str):
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar([str(s) for s in seam_seconds], scores)
    ax.set_xlabel("seam (s)")
    ax.set_ylabel("discontinuity")
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ablation(rows: list[dict], path: Path | str):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ratios = [row["injection_ratio"] for row in rows]
    x = np.arange(len(ratios))
    ax.bar(x - 0.2, [row["alignment_valence"] for row in rows], 0.4, label="valence")
    ax.bar(x + 0.2, [row["alignment_arousal"] for row in rows], 0.4, label="arousal")
    ax.set_xticks(x, [f"{r:.2f}" for r in ratios])
    ax.set_xlabel("injection ratio")
    ax.set_ylabel("alignment")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
