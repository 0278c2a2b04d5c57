# src/simplex_lab/tools/statistics.py
"""Ensemble summaries and log-scale fits shared by the experiments"""

import math
import statistics
from typing import Sequence

import numpy as np


def ensemble_summary(values: Sequence[float], label: str = "value") -> dict:
    """
    Summarize one ensemble of trial results.

    Non-finite trials are counted but left out of the statistics.

    Args:
        values: One number per trial
        label: Name of the measured quantity, echoed in the result

    Returns:
        Dict with count, mean, median, std, min, max and quartiles, or an
        ``error`` entry when no finite value is available
    """
    finite = [float(v) for v in values if math.isfinite(v)]
    if not finite:
        return {"error": f"No finite values for {label}", "label": label, "count": len(values)}

    summary = {
        "label": label,
        "count": len(values),
        "finite": len(finite),
        "mean": statistics.mean(finite),
        "median": statistics.median(finite),
        "std": statistics.stdev(finite) if len(finite) > 1 else 0.0,
        "min": min(finite),
        "max": max(finite),
    }
    if len(finite) > 1:
        quartiles = statistics.quantiles(finite, n=4)
        summary["percentile_25"] = quartiles[0]
        summary["percentile_75"] = quartiles[2]
    else:
        summary["percentile_25"] = summary["percentile_75"] = finite[0]
    return summary


def linear_fit(x: Sequence[float], y: Sequence[float]) -> dict:
    """
    Least-squares line y = slope * x + intercept.

    Points whose y is not finite (for example log2 of an exact zero) are
    dropped. With fewer than two usable points the slope is reported as
    -inf when every y was -inf, and NaN otherwise.

    Returns:
        Dict with slope, intercept, r_squared and the number of points used
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        return {"error": f"Shapes differ: {x.shape} vs {y.shape}"}

    keep = np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2:
        degenerate = y.size > 0 and bool(np.all(np.isneginf(y)))
        slope = -math.inf if degenerate else math.nan
        return {
            "slope": slope,
            "intercept": math.nan,
            "r_squared": math.nan,
            "points": int(keep.sum()),
        }

    xs, ys = x[keep], y[keep]
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = ys - (slope * xs + intercept)
    total = float(np.sum((ys - ys.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(residual**2)) / total if total > 0 else 1.0
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "r_squared": r_squared,
        "points": int(keep.sum()),
    }


def relative_change(before: float, after: float) -> float:
    """|after - before| / |before|; infinite when only ``before`` vanishes."""
    if before == 0:
        return 0.0 if after == 0 else math.inf
    return abs(after - before) / abs(before)


def spread_ratio(values: Sequence[float]) -> float:
    """max/min of positive values, the flatness measure of a sweep."""
    positive = [v for v in values if v > 0 and math.isfinite(v)]
    if not positive:
        return math.inf
    return max(positive) / min(positive)
