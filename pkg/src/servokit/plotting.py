"""SVG charts of a servo trace: feature paths in the image and error norms over time."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "servokit"
    import matplotlib.pyplot as plt
    return plt


def plot_feature_paths(trace, path: str | Path, K=None) -> None:
    """Feature trajectories from the start quadrilateral (black) to the goal (red)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    px = trace.pixels
    for i in range(px.shape[1]):
        ax.plot(px[:, i, 0], px[:, i, 1], lw=1.2, label=f"feature {i + 1}")
    start = np.vstack([px[0], px[0][:1]])
    goal = np.vstack([trace.desired, trace.desired[:1]])
    ax.plot(start[:, 0], start[:, 1], "k-", lw=1.0)
    ax.plot(goal[:, 0], goal[:, 1], "r-", lw=1.0)
    if K is not None:
        ax.set_xlim(0, K.width - 1)
        ax.set_ylim(K.height - 1, 0)
    else:
        ax.invert_yaxis()
    ax.set_xlabel("u (px)")
    ax.set_ylabel("v (px)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_error_norms(trace, path: str | Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for i in range(trace.feature_error.shape[1]):
        ax.plot(trace.t, trace.feature_error[:, i], lw=1.2, label=f"feature {i + 1}")
    ax.plot(trace.t, trace.total_error, "k--", lw=1.0, label="stacked")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("pixel error norm")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
