"""Figure rendering for CLI reports. All output goes to files (Agg backend)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .mechanism import Mechanism

_COLORS = {Mechanism.EFFICIENT: "tab:blue", Mechanism.DOT_PRODUCT: "tab:orange"}
_NAMES = {Mechanism.EFFICIENT: "efficient", Mechanism.DOT_PRODUCT: "dot-product"}


def _grouped_bars(ax, labels, series, ylabel):
    """series: {mechanism: list of values aligned with labels}. Log y."""
    x = np.arange(len(labels))
    width = 0.8 / max(len(series), 1)
    for i, (mech, values) in enumerate(series.items()):
        offset = (i - (len(series) - 1) / 2) * width
        ax.bar(x + offset, values, width, label=_NAMES[mech], color=_COLORS[mech])
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="major", axis="y", alpha=0.4)
    ax.legend()


def save_cost_chart(rows, path):
    """Two-panel log-scale chart (memory bytes, MACC) from sweep rows."""
    labels = []
    for row in rows:
        if row.label not in labels:
            labels.append(row.label)
    series_mem = {}
    series_macc = {}
    for row in rows:
        series_mem.setdefault(row.mechanism, [0.0] * len(labels))
        series_macc.setdefault(row.mechanism, [0.0] * len(labels))
        idx = labels.index(row.label)
        series_mem[row.mechanism][idx] = row.estimate.memory_bytes
        series_macc[row.mechanism][idx] = row.estimate.macc
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4.2))
    _grouped_bars(ax0, labels, series_mem, "memory (bytes)")
    _grouped_bars(ax1, labels, series_macc, "computation (MACC)")
    fig.suptitle("Analytical resource requirements")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_chart(records, path):
    """Measured peak floats and wall time per grid point; OOM rows flagged."""
    labels = []
    for record in records:
        label = f"n={record.n}"
        if label not in labels:
            labels.append(label)
    peak = {}
    wall = {}
    for record in records:
        peak.setdefault(record.mechanism, [np.nan] * len(labels))
        wall.setdefault(record.mechanism, [np.nan] * len(labels))
        idx = labels.index(f"n={record.n}")
        if record.status == "ok":
            peak[record.mechanism][idx] = record.measured_peak_floats
            wall[record.mechanism][idx] = record.wall_time_ns / 1e6
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4.2))
    _grouped_bars(ax0, labels, {m: np.nan_to_num(v, nan=0.1) for m, v in peak.items()},
                  "measured peak (floats)")
    _grouped_bars(ax1, labels, {m: np.nan_to_num(v, nan=0.1) for m, v in wall.items()},
                  "median wall time (ms)")
    oom = sorted({f"n={r.n}" for r in records if r.status == "OOM"})
    if oom:
        fig.suptitle(f"Measured resource usage (OOM under budget: {', '.join(oom)})")
    else:
        fig.suptitle("Measured resource usage")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_map_image(map2d, path, title=None):
    """Render one attention map (2D array) as a heatmap PNG."""
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(np.asarray(map2d), cmap="viridis")
    fig.colorbar(im, ax=ax, fraction=0.046)
    if title:
        ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
