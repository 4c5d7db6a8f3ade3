"""Bandwidth figures rendered next to the delimited reports."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import to_mib  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}

PHASES = ("populate", "write", "read")
MARKERS = {"synchronous": "s", "global_timing": "o"}


def plot_series(points, path: Path, xlabel: str = "x", title: str | None = None) -> Path:
    """One panel per phase; one line per (mode, metric) with min/max band.

    y is MiB/s (1024-based).
    """
    panels = defaultdict(lambda: defaultdict(list))
    for p in points:
        panels[p.phase][(p.pattern, p.mode, p.metric)].append(p)
    phases = [ph for ph in PHASES if ph in panels] + sorted(set(panels) - set(PHASES))

    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(phases), figsize=(3.2 * len(phases), 2.8), squeeze=False)
        for ax, phase in zip(axes[0], phases):
            for (pattern, mode, metric), pts in sorted(panels[phase].items()):
                pts = sorted(pts, key=lambda p: p.x)
                xs = [p.x for p in pts]
                ax.plot(xs, [to_mib(p.agg.mean) for p in pts], marker=MARKERS.get(metric, "x"),
                        label=f"{pattern}/{mode}/{metric}")
                ax.fill_between(xs, [to_mib(p.agg.min) for p in pts], [to_mib(p.agg.max) for p in pts],
                                alpha=0.2)
            ax.set_title(phase)
            ax.set_xlabel(xlabel)
            ax.set_ylabel("bandwidth (MiB/s)")
            ax.set_ylim(bottom=0)
        axes[0][0].legend(loc="best", frameon=False)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path)
        plt.close(fig)
    return path
