"""Static figures for experiment reports (matplotlib, SVG by default)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_ratio = (math.sqrt(5) - 1.0) / 2.0

STYLE = {
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 8,
    "font.family": "DejaVu Sans",
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.major.width": 0.6,
    "ytick.major.width": 0.6,
    # byte-stable SVG output
    "svg.hashsalt": "ccadrive",
    "svg.fonttype": "path",
    "path.simplify": False,
}

METHOD_COLORS = {
    "GMR": "#9ecae1",
    "CCA+GMR": "#2171b5",
    "GPR": "#fdae6b",
    "CCA+GPR": "#d94801",
}
CHANNEL_COLORS = {"longitudinal": "#4d4d4d", "lateral": "#b2182b"}


def new_figure(width=7.0, height=None, nrows=1, ncols=1):
    if height is None:
        height = width * golden_ratio
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(nrows, ncols, figsize=(width, height), squeeze=False)
    return fig, axes


def save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".") or "svg"
    metadata = {"Date": None} if fmt == "svg" else None
    with plt.rc_context(STYLE):
        fig.savefig(path, format=fmt, metadata=metadata)
    plt.close(fig)
    return path


def _bar_gid(*parts) -> str:
    return "bar-" + "-".join(str(p).replace("+", "").replace(".", "p").lower() for p in parts)


def rmse_figure(cells, scenarios, channels, methods, thresholds):
    """Grouped bars: one panel per channel, one group per scenario.

    ``cells`` maps ``(scenario, channel, method, threshold)`` to an RMSE
    (nan for failed cells, drawn hatched at zero height). Every bar gets an
    SVG ``gid`` starting with ``bar-``.
    """
    with plt.rc_context(STYLE):
        fig, axes = new_figure(7.0, 2.6 * len(channels), nrows=len(channels))
        n_bars = len(methods) * len(thresholds)
        width = 0.8 / n_bars
        for ax, channel in zip(axes[:, 0], channels):
            for si, scenario in enumerate(scenarios):
                for mi, method in enumerate(methods):
                    for ti, thr in enumerate(thresholds):
                        key = (scenario, channel, method, thr)
                        if key not in cells:
                            continue
                        value = cells[key]
                        x = si - 0.4 + (mi * len(thresholds) + ti + 0.5) * width
                        failed = not np.isfinite(value)
                        (bar,) = ax.bar(
                            x, 0.0 if failed else value, width,
                            color=METHOD_COLORS.get(method, "0.5"),
                            alpha=1.0 - 0.15 * ti, hatch="//" if failed else None,
                            edgecolor="none", label=method if (si == 0 and ti == 0) else None,
                        )
                        bar.set_gid(_bar_gid(scenario, channel, method, thr))
            ax.set_xticks(range(len(scenarios)))
            ax.set_xticklabels(scenarios)
            ax.set_ylabel(f"RMSE ({channel})")
            ax.legend(ncol=len(methods), loc="upper right")
        axes[-1, 0].set_xlabel("scenario (bars within a method: thresholds " +
                               ", ".join(f"{t:.2f}" for t in thresholds) + ")")
        fig.tight_layout()
    return fig


def correlation_figure(rows, channels):
    """First canonical correlation per traffic participant, one panel per channel.

    ``rows`` is an iterable of ``(channel, participant, rho1)``.
    """
    rows = list(rows)
    with plt.rc_context(STYLE):
        fig, axes = new_figure(3.2 * len(channels), 2.6, ncols=len(channels))
        for ax, channel in zip(axes[0], channels):
            sel = [(p, r) for c, p, r in rows if c == channel]
            for i, (participant, rho) in enumerate(sel):
                (bar,) = ax.bar(i, rho if np.isfinite(rho) else 0.0, 0.6,
                                color=CHANNEL_COLORS.get(channel, "0.4"), edgecolor="none")
                bar.set_gid(_bar_gid("rho", channel, participant))
            ax.set_xticks(range(len(sel)))
            ax.set_xticklabels([p for p, _ in sel])
            ax.set_ylim(0, 1.05)
            ax.set_title(f"{channel} behavior")
            ax.set_ylabel("canonical correlation")
            ax.set_xlabel("traffic participant")
        fig.tight_layout()
    return fig
