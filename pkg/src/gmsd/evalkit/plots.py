"""Figures rendered to files (PNG by default) with the non-interactive backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

ARM_COLOURS = {"mixed": "tab:blue", "separate": "tab:red", "widened": "tab:green"}
# fixed metadata keeps PNG bytes identical across runs
_SAVE_KW = {"metadata": {"Software": None}, "dpi": 100}


def plot_loss_curves(result, path) -> Path:
    """Validation loss against iteration, one thin line per seed and a bold median per arm."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for arm in result.arms:
        curves = np.array([[row.val_loss for row in result.run(arm, s).history] for s in result.seeds])
        iters = [row.iteration for row in result.run(arm, result.seeds[0]).history]
        colour = ARM_COLOURS.get(arm)
        for c in curves:
            ax.plot(iters, c, color=colour, alpha=0.25, linewidth=0.8)
        ax.plot(iters, np.median(curves, axis=0), color=colour, linewidth=2, label=f"{arm} (median)")
    ax.set_xlabel("iteration")
    ax.set_ylabel("validation loss")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_rd_curves(curves, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    for c in curves:
        ax.plot(c.bpp, c.quality, marker="o", label=c.label)
    ax.set_xlabel("bpp")
    ax.set_ylabel(curves[0].metric if curves else "quality")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_degeneracy_map(dmap: np.ndarray, K: int, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(dmap, vmin=0.0, vmax=1.0 / K, cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="mean min weight")
    if title:
        ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_eval_points(report, path) -> Path:
    """Per-image PSNR and MS-SSIM against bpp, corpus mean marked."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
    bpp = [r.bpp for r in report.rows]
    for ax, key, label in ((axes[0], "psnr", "PSNR (dB)"), (axes[1], "ms_ssim", "MS-SSIM")):
        ax.scatter(bpp, [getattr(r, key) for r in report.rows], s=12, alpha=0.6)
        ax.scatter([report.mean("bpp")], [report.mean(key)], color="black", marker="x", s=40, label="mean")
        ax.set_xlabel("bpp")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path
