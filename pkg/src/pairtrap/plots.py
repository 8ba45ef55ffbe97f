"""Deterministic SVG figures from computed series."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "pairtrap", "svg.fonttype": "none", "path.simplify": False}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def line_plot(path, x, series: dict, xlabel: str, ylabel: str, twin: dict | None = None, twin_label: str = ""):
    """Line plot of ``series`` (label -> y) with an optional right-axis group."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for label, y in series.items():
            ax.plot(x, y, label=label, lw=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        handles, labels = ax.get_legend_handles_labels()
        if twin:
            ax2 = ax.twinx()
            for label, y in twin.items():
                ax2.plot(x, y, label=label, lw=1.0, ls="--", color="tab:orange")
            ax2.set_ylabel(twin_label)
            h2, l2 = ax2.get_legend_handles_labels()
            handles, labels = handles + h2, labels + l2
        ax.legend(handles, labels, loc="best", fontsize=8)
        fig.tight_layout()
        _save(fig, path)
