"""Matplotlib figures for accuracy / efficiency trajectories."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import best_by_generation  # noqa: E402

MODE_COLORS = {"asexual": "tab:red", "sexual": "tab:blue"}
PANELS = (
    ("accuracy", "Test accuracy"),
    ("synaptic_efficiency", "Synaptic efficiency (x)"),
    ("cluster_efficiency", "Cluster efficiency (x)"),
)

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}


def plot_trajectories(runs: dict, out_dir, markers: dict | None = None, fmt="png") -> list[Path]:
    """One figure per metric; ``runs`` maps a label to its record list.

    Labels ``asexual``/``sexual`` (or containing them) get red/blue.  ``markers``
    maps label -> generation to highlight (e.g. an accuracy-drop crossing).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    markers = markers or {}
    written = []
    with plt.rc_context(STYLE):
        for metric, ylabel in PANELS:
            fig, ax = plt.subplots(figsize=(4.5, 3.0))
            for label, records in runs.items():
                best = best_by_generation(records)
                xs = [r.generation for r in best]
                ys = [getattr(r, metric) for r in best]
                color = next((c for k, c in MODE_COLORS.items() if k in label), None)
                ax.plot(xs, ys, marker="o", ms=3, lw=1.2, color=color, label=label)
                mark = markers.get(label)
                if mark in xs:
                    ax.plot([mark], [ys[xs.index(mark)]], marker="*", ms=10, color=color or "k", ls="none")
            if metric != "accuracy":
                ax.set_yscale("log")
            ax.set_xlabel("Generation")
            ax.set_ylabel(ylabel)
            if len(runs) > 1:
                ax.legend(frameon=False)
            fig.tight_layout()
            path = out_dir / f"{metric}.{fmt}"
            fig.savefig(path)
            plt.close(fig)
            written.append(path)
    return written
