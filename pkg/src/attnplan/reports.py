"""Matplotlib renderings of plan heatmaps and similarity reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap

from .metrics import SimilarityMatrix
from .sharing import Strategy

_STRATEGIES = [s.value for s in Strategy]
_COLORS = ["#d9d9d9", "#1b9e77", "#7570b3", "#d95f02", "#e7298a"]


def render_plan_heatmap(plan, cfg, path) -> None:
    """Strategy-per-(layer, step) grid, mirroring the heatmap CSV."""
    grid = np.array([
        [_STRATEGIES.index(token) for token in row]
        for row in plan.heatmap_rows(cfg)
    ])
    fig, ax = plt.subplots(
        figsize=(max(4.0, 0.35 * cfg.num_steps), max(2.5, 0.35 * cfg.num_layers))
    )
    im = ax.imshow(grid, cmap=ListedColormap(_COLORS), vmin=-0.5, vmax=4.5,
                   aspect="auto", interpolation="nearest")
    ax.set_xlabel("step")
    ax.set_ylabel("layer")
    cbar = fig.colorbar(im, ax=ax, ticks=range(len(_STRATEGIES)))
    cbar.ax.set_yticklabels(_STRATEGIES)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_step_similarity(matrix: SimilarityMatrix, layer: int, path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    im = ax.imshow(matrix.values, vmin=-1.0, vmax=1.0, cmap="viridis",
                   interpolation="nearest")
    ax.set_title(f"layer {layer}: step-wise attention-output cosine")
    ax.set_xlabel("step")
    ax.set_ylabel("step")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_cfg_similarity(report: dict, path) -> None:
    """One line per layer: conditional vs unconditional cosine over steps."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for layer in sorted(report):
        matrix = report[layer]
        ax.plot(matrix.steps, matrix.values, marker="o", markersize=3,
                label=f"layer {layer}")
    ax.set_xlabel("step")
    ax.set_ylabel("cond/uncond cosine")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
