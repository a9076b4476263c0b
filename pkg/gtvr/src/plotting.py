import logging
import os
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from gtvr.src.engine import MetricsTrace  # noqa: E402
from gtvr.src.exceptions import PlotError  # noqa: E402

logger = logging.getLogger("GTVR")

# Metric column -> y-axis scale
METRIC_SCALES: Dict[str, str] = {
    "gap": "log",
    "consensus_err": "log",
    "tracking_err": "log",
    "msd": "log",
    "test_acc": "linear",
}

METRIC_LABELS = {
    "gap": "optimality gap",
    "consensus_err": "consensus error",
    "tracking_err": "tracking error",
    "msd": "mean-square distance",
    "test_acc": "test accuracy",
}

X_AXES = ("epoch", "iter")


def plottable(trace: MetricsTrace, metric: str, x_axis: str = "epoch"):
    """Points of ``metric`` that can be drawn: finite, and positive on log axes."""
    x = trace.column(x_axis)
    y = trace.column(metric)
    keep = np.isfinite(y)
    if METRIC_SCALES[metric] == "log":
        keep &= y > 0
    return x[keep], y[keep]


def final_slope(x: np.ndarray, y: np.ndarray, tail: float = 0.25) -> float:
    """Least-squares slope of ``log10(y)`` against ``x`` over the last ``tail`` share of points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(y) & (y > 0)
    x, y = x[keep], y[keep]
    start = int(len(x) * (1.0 - tail))
    x, y = x[start:], y[start:]
    if len(x) < 2:
        raise PlotError("Need at least two positive points to fit a slope")
    slope, _ = np.polyfit(x, np.log10(y), 1)
    return float(slope)


def _label(trace: MetricsTrace, idx: int) -> str:
    return trace.provenance.get("label") or f"trace {idx}"


def plot_traces(
    traces: Sequence[MetricsTrace],
    out_dir: str,
    x_axis: str = "epoch",
    style: str = "default",
    labels: Optional[Sequence[str]] = None,
) -> List[str]:
    """
    Write one SVG per metric, one curve per trace.

    Curves carry the SVG id ``curve-<idx>`` so they can be located in the output. Metrics
    with nothing to draw in any trace are skipped.

    Returns:
        List[str]: Paths of the written files.
    """
    if not traces:
        raise PlotError("No traces to plot")
    if x_axis not in X_AXES:
        raise PlotError(f"Unknown x axis '{x_axis}'. Use one of: {X_AXES}.")
    for idx, trace in enumerate(traces):
        if len(trace) == 0:
            raise PlotError(f"Trace {idx} is empty")
    os.makedirs(out_dir, exist_ok=True)
    labels = list(labels) if labels is not None else [_label(t, i) for i, t in enumerate(traces)]

    written = []
    with plt.style.context(style), matplotlib.rc_context(
        {"svg.hashsalt": "gtvr", "path.simplify": False, "svg.fonttype": "none"}
    ):
        for metric, scale in METRIC_SCALES.items():
            points = [plottable(t, metric, x_axis) for t in traces]
            if not any(len(x) for x, _ in points):
                continue
            fig, ax = plt.subplots(figsize=(6, 4))
            for idx, ((x, y), label) in enumerate(zip(points, labels)):
                if len(x) == 0:
                    continue
                (line,) = ax.plot(x, y, label=label, linewidth=1.5)
                line.set_gid(f"curve-{idx}")
            ax.set_yscale(scale)
            ax.set_xlabel("epochs" if x_axis == "epoch" else "iterations")
            ax.set_ylabel(METRIC_LABELS[metric])
            ax.grid(True, which="major", alpha=0.3)
            ax.legend(loc="best", fontsize="small")
            path = os.path.join(out_dir, f"{metric}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    logger.info(f"📈 Wrote {len(written)} figures to {out_dir}")
    return written


def plot_csvs(paths: Sequence[str], out_dir: str, x_axis: str = "epoch", style: str = "default"):
    """Plot trace CSVs; legends come from the provenance JSON next to each CSV."""
    traces = []
    for path in paths:
        if not os.path.exists(path):
            raise PlotError(f"Trace file not found: {path}")
        traces.append(MetricsTrace.from_csv(path))
    labels = [
        t.provenance.get("label") or os.path.splitext(os.path.basename(p))[0]
        for t, p in zip(traces, paths)
    ]
    return plot_traces(traces, out_dir, x_axis=x_axis, style=style, labels=labels)
