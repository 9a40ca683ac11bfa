"""Figure rendering for benchmark reports.

Curves are drawn straight from benchmark rows and written next to the CSV;
the CSV stays the canonical machine-readable output.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_METRIC_ORDER = ("mse", "psnr", "ssim")
_METRIC_LABEL = {"mse": "MSE", "psnr": "PSNR [dB]", "ssim": "SSIM"}


def _series(rows, metric: str):
    """(pattern -> sorted (fraction, mean, std) triples) for one metric."""
    out: dict[str, list[tuple[float, float, float]]] = {}
    for r in rows:
        if r.metric == metric:
            out.setdefault(r.pattern, []).append((r.fraction, r.mean, r.std))
    for pts in out.values():
        pts.sort()
    return out


def render_curves(rows, path: str | Path) -> Path:
    """One figure, three panels: each metric against the k-space fraction,
    one line per sampling pattern, error bars at +/- one sigma."""
    path = Path(path)
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    for ax, metric in zip(axes, _METRIC_ORDER):
        for pattern, pts in sorted(_series(rows, metric).items()):
            finite = [(f, m, s) for f, m, s in pts if math.isfinite(m)]
            if not finite:
                continue
            fr, mean, std = zip(*finite)
            ax.errorbar(fr, mean, yerr=std, marker="o", capsize=3, label=pattern)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("fraction of k-space")
        ax.set_ylabel(_METRIC_LABEL[metric])
        ax.grid(True, alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_normalization_comparison(rows_by_method: dict[str, list], path: str | Path) -> Path:
    """SSIM against fraction, one panel per sampling pattern, one line per
    normalization method."""
    path = Path(path)
    patterns = sorted({r.pattern for rows in rows_by_method.values() for r in rows})
    fig, axes = plt.subplots(1, max(len(patterns), 1), figsize=(4.5 * max(len(patterns), 1), 4), squeeze=False)
    for ax, pattern in zip(axes[0], patterns):
        for method, rows in sorted(rows_by_method.items()):
            pts = sorted(
                (r.fraction, r.mean, r.std)
                for r in rows
                if r.metric == "ssim" and r.pattern == pattern
            )
            if not pts:
                continue
            fr, mean, std = zip(*pts)
            ax.errorbar(fr, mean, yerr=std, marker="o", capsize=3, label=method)
        ax.set_xscale("log", base=2)
        ax.set_title(pattern)
        ax.set_xlabel("fraction of k-space")
        ax.set_ylabel("SSIM")
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
