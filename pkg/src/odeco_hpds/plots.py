"""Figure rendering for the CLI report paths.

Trajectory tables stay the primary machine-readable output; these helpers
render the same data to an image file next to the CSV when asked.  The
Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def render_trajectory(path, times, states, labels=None, overlay=None,
                      overlay_suffix="rk4", title=None):
    """Line plot of state components against time, saved to `path`.

    `overlay`, when given, is a second state table (same shape prefix)
    drawn dashed for visual comparison, e.g. the integrator check of a
    closed form.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    n = states.shape[1]
    if labels is None:
        labels = [f"x_{i + 1}" for i in range(n)]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i in range(n):
        ax.plot(times, states[:, i], color=colors[i % len(colors)],
                label=labels[i])
    if overlay is not None:
        overlay = np.asarray(overlay, dtype=float)
        m = min(len(times), overlay.shape[0])
        for i in range(n):
            ax.plot(times[:m], overlay[:m, i], "--",
                    color=colors[i % len(colors)], alpha=0.7,
                    label=f"{labels[i]} ({overlay_suffix})")
    ax.set_xlabel("t")
    ax.set_ylabel("state")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
