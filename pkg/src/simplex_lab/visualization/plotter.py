# src/simplex_lab/visualization/plotter.py
"""Static SVG figures for experiment sweeps"""

import os
from typing import Sequence

import matplotlib.pyplot as plt
import numpy as np

COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


def create_sweep_plot(
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    output_path: str = "sweep.svg",
    title: str = "Experiment sweep",
    xlabel: str = "x",
    ylabel: str = "value",
    fits: dict[str, dict] | None = None,
    logy: bool = False,
) -> dict:
    """
    Plot one polyline per series, optionally with fitted straight lines.

    Args:
        series: Label -> (x values, y values)
        output_path: Where to save the figure; the format follows the suffix
        title: Figure title
        xlabel: Label of the horizontal axis
        ylabel: Label of the vertical axis
        fits: Label -> linear_fit result drawn as a dashed line over that series
        logy: Use a logarithmic vertical axis

    Returns:
        Dict with output_path and the plotted series names, or an ``error`` entry
    """
    if not series:
        return {"error": "No series to plot"}

    plt.rcParams["svg.hashsalt"] = "simplex-lab"
    fig, ax = plt.subplots(figsize=(10, 6))
    fig.suptitle(title, fontsize=14, fontweight="bold")

    plotted = []
    for i, (label, (x, y)) in enumerate(series.items()):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if not keep.any():
            continue
        color = COLORS[i % len(COLORS)]
        ax.plot(x[keep], y[keep], "o-", label=label, linewidth=1.8, color=color)
        plotted.append(label)

        fit = (fits or {}).get(label)
        if fit and np.isfinite(fit.get("slope", np.nan)):
            line = fit["slope"] * x[keep] + fit["intercept"]
            ax.plot(
                x[keep],
                line,
                "--",
                color=color,
                alpha=0.7,
                label=f"{label} fit: slope {fit['slope']:.3g}, R² {fit['r_squared']:.3f}",
            )

    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel, fontsize=11, fontweight="bold")
    ax.set_ylabel(ylabel, fontsize=11, fontweight="bold")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    plt.tight_layout()

    # Ensure output directory exists
    os.makedirs(
        os.path.dirname(output_path) if os.path.dirname(output_path) else ".", exist_ok=True
    )

    plt.savefig(output_path, dpi=150, bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)

    return {"output_path": output_path, "series_plotted": plotted, "num_series": len(plotted)}
