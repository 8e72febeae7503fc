"""Deterministic SVG line charts (log-log axes)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def line_chart(path, lines, xlabel: str, ylabel: str, title: str = "") -> None:
    """``lines`` is a list of (label, x, y); nonpositive values are dropped from the log axes."""
    with plt.rc_context({"svg.hashsalt": "sgdreg", "svg.fonttype": "none", "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, x, y in lines:
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            keep = (x > 0) & (y > 0) & np.isfinite(y)
            ax.loglog(x[keep], y[keep], label=label, linewidth=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
