"""Figure output for experiment reports.

Figures are written with fixed metadata and hash salt so that repeated runs
produce byte-identical SVG files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "svg.hashsalt": "symsep",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    meta = {"Date": None} if path.suffix.lower() == ".svg" else None
    fig.savefig(path, metadata=meta)
    plt.close(fig)
    return path


def histogram_figure(stats, fit=None, path="histogram.svg", title: str = ""):
    """Bar histogram of NE values with the fitted chi density overlaid."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        edges = np.asarray(stats.bin_edges)
        widths = np.diff(edges)
        total = max(int(np.sum(stats.counts)), 1)
        density = np.asarray(stats.counts) / (total * np.where(widths > 0, widths, 1.0))
        ax.bar(edges[:-1], density, width=widths, align="edge", color="0.75", edgecolor="0.35", linewidth=0.4)
        if fit is not None:
            x = np.linspace(max(edges[0], 0.0), edges[-1], 400)[1:]
            ax.plot(x, fit.pdf(x), color="C3", lw=1.2, label=f"chi k={fit.k:.3g}")
            ax.legend(frameon=False)
        ax.set_xlabel("NE (bits)")
        ax.set_ylabel("density")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def sweep_figure(rows: Sequence, fits: Sequence | None = None, path="sweep.svg", title: str = ""):
    """Overlaid NE distributions for a dimension sweep."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for i, (dims, stats) in enumerate(rows):
            edges = np.asarray(stats.bin_edges)
            ax.stairs(stats.counts / max(int(np.sum(stats.counts)), 1) / np.diff(edges), edges,
                      color=f"C{i % 10}", label="x".join(map(str, dims)))
            if fits is not None and fits[i] is not None:
                x = np.linspace(max(edges[0], 0.0), edges[-1], 300)[1:]
                ax.plot(x, fits[i].pdf(x), color=f"C{i % 10}", lw=0.8, ls="--")
        if all(np.asarray(st.bin_edges)[0] > 0 for _, st in rows):
            ax.set_xscale("log")
        ax.set_xlabel("NE (bits)")
        ax.set_ylabel("density")
        ax.legend(frameon=False, fontsize=7)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)
