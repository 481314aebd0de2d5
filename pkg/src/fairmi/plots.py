"""Figure rendering for the report path.

Each report CSV gets a PNG companion so runs are inspectable at a glance.
The delimited files remain the canonical outputs; nothing downstream reads
the figures.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_training_curves(epoch_rows: list[list], path: str | Path) -> Path:
    """Loss curves plus validation accuracy from per-epoch rows."""
    epochs = [r[0] for r in epoch_rows]
    primary = [r[1] for r in epoch_rows]
    proxy = [r[2] for r in epoch_rows]
    combined = [r[3] for r in epoch_rows]
    val_acc = [r[4] for r in epoch_rows]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(epochs, primary, label="primary")
    if any(p > 0 for p in proxy):
        ax1.plot(epochs, proxy, label="proxy")
        ax1.plot(epochs, combined, label="combined", linestyle="--")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend(fontsize=8)
    ax2.plot(epochs, val_acc, color="tab:green")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation accuracy")
    ax2.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_sweep_curves(rows: list[dict], path: str | Path) -> Path:
    """Accuracy and gap trade-off curves over the regularization weight."""
    ok = [r for r in rows if r.get("status", "ok") == "ok"]
    alphas = [r["alpha"] for r in ok]
    fig, axes = plt.subplots(1, 4, figsize=(13, 3.2), sharex=True)
    for ax, key, label in zip(
        axes,
        ("accuracy", "eo_tpr_gap", "eo_fpr_gap", "dp_gap"),
        ("accuracy", "TPR gap", "FPR gap", "DP gap"),
    ):
        ax.plot(alphas, [r[key] for r in ok], marker="o")
        ax.set_xlabel("alpha")
        ax.set_title(label, fontsize=9)
        ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_heatmap(matrix: np.ndarray, names: list[str], title: str, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(0.5 * len(names) + 2.2, 0.5 * len(names) + 1.8))
    im = ax.imshow(matrix, cmap="viridis")
    ax.set_xticks(range(len(names)), names, rotation=60, ha="right", fontsize=7)
    ax.set_yticks(range(len(names)), names, fontsize=7)
    ax.set_title(title, fontsize=9)
    fig.colorbar(im, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_subgroup_rates(rows: list[dict], path: str | Path) -> Path:
    """Bar chart of per-subgroup TPR / FPR / positive-prediction rate."""
    labels = [r["label"] for r in rows]
    x = np.arange(len(labels))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6.0, 0.8 * len(labels)), 3.4))
    for offset, key, name in (
        (-width, "tpr", "TPR"),
        (0.0, "fpr", "FPR"),
        (width, "positive_rate", "pos. rate"),
    ):
        vals = [r[key] if r[key] is not None else 0.0 for r in rows]
        ax.bar(x + offset, vals, width, label=name)
    ax.set_xticks(x, labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_mi_bars(rows: list[dict], path: str | Path) -> Path:
    """Grouped bars of original vs augmented mutual information per subset."""
    labels = [f"{r['split']}:{r['subset']}" for r in rows]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(max(6.0, 0.7 * len(labels)), 3.4))
    ax.bar(x - 0.2, [r["mi_original"] for r in rows], 0.4, label="original")
    if any(r.get("mi_augmented") is not None for r in rows):
        ax.bar(
            x + 0.2,
            [r["mi_augmented"] or 0.0 for r in rows],
            0.4,
            label="augmented",
        )
    ax.set_xticks(x, labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("mutual information (nats)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
