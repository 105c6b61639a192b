"""Figures written next to the delimited report."""

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import FAMILY_ORDER, order  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "svg.hashsalt": "xlirony",
}
# no creation date, so re-rendering the same results gives the same file
METADATA = {"png": {"Software": None}, "svg": {"Date": None}}


def _save(fig, path: Path, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    fig.savefig(path, format=fmt, bbox_inches="tight", metadata=METADATA.get(fmt))
    plt.close(fig)
    return path


def macro_f1_bars(results: Sequence, path, fmt: str = "png", chance: float = 50.0) -> Path:
    """Grouped bars of macro F1, one group per configuration and one bar per family."""
    ordered = order(results)
    labels = list(dict.fromkeys(r[0].label for r in ordered))
    fams = [f for f in FAMILY_ORDER if any(r[0].family == f for r in ordered)]
    score = {(r[0].label, r[0].family): r[1].macro_f1 for r in ordered}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(labels) + 1.5), 3.2))
        x = np.arange(len(labels))
        width = 0.8 / len(fams)
        for i, fam in enumerate(fams):
            vals = [score.get((l, fam), np.nan) for l in labels]
            bars = ax.bar(x + (i - (len(fams) - 1) / 2) * width, vals, width, label=fam)
            for b, v in zip(bars, vals):
                if not np.isnan(v):
                    ax.annotate(f"{v:.1f}", (b.get_x() + b.get_width() / 2, v), ha="center",
                                va="bottom", fontsize=6, xytext=(0, 1), textcoords="offset points")
        ax.axhline(chance, color="0.4", lw=0.8, ls="--")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylim(0, 100)
        ax.set_ylabel("macro F1 (%)")
        ax.legend(frameon=False, ncol=len(fams), loc="upper left")
        return _save(fig, Path(path), fmt)


def confusion_grid(results: Sequence, path, fmt: str = "png") -> Path:
    """One 2x2 confusion matrix per experiment (rows: gold, columns: predicted)."""
    ordered = [r for r in order(results) if len(r) > 2]
    n = len(ordered)
    cols = min(4, n)
    rows = int(np.ceil(n / cols))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, cols, figsize=(2.2 * cols, 2.2 * rows), squeeze=False)
        for ax in axes.flat[n:]:
            ax.axis("off")
        for ax, (spec, _, cm) in zip(axes.flat, ordered):
            mat = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]])
            ax.imshow(mat, cmap="Blues", vmin=0, vmax=max(1, mat.max()))
            for (i, j), v in np.ndenumerate(mat):
                ax.text(j, i, str(v), ha="center", va="center",
                        color="white" if v > mat.max() / 2 else "black", fontsize=8)
            ax.set_xticks([0, 1])
            ax.set_yticks([0, 1])
            ax.set_xticklabels(["NI", "I"])
            ax.set_yticklabels(["NI", "I"])
            ax.set_title(f"{spec.label}\n{spec.family}", fontsize=7)
        return _save(fig, Path(path), fmt)


def render(results: Sequence, fig_dir, fmt: str = "png") -> list:
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    return [macro_f1_bars(results, fig_dir / "macro_f1", fmt),
            confusion_grid(results, fig_dir / "confusion", fmt)]
