"""Render convergence figures from experiment result rows.

One PNG per available metric, named ``<stem>_<metric>.png``, with the
reduction dimension on the x axis and one line per method. Divergences and
errors are drawn on a log scale (floored at 1e-17 so exact zeros remain
visible); the entropy is linear.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_result_figures"]

_METRIC_LABELS = {
    "j0": "posterior KL divergence (nats)",
    "j1": "expected KL divergence (nats)",
    "mi_rel_err": "relative mutual-information error",
    "entropy": "posterior entropy (nats)",
    "eps": "relative MAP error",
    "eps_h": "relative Hessian error",
}

_LOG_FLOOR = 1e-17


def render_result_figures(rows, stem) -> list[Path]:
    """Write one figure per metric that has data; returns the paths."""
    stem = Path(stem)
    methods = []
    for row in rows:
        if row.method not in methods:
            methods.append(row.method)
    written = []
    for metric, label in _METRIC_LABELS.items():
        series = {}
        for method in methods:
            points = [
                (row.r, getattr(row, metric))
                for row in rows
                if row.method == method and getattr(row, metric) is not None
            ]
            if points:
                series[method] = sorted(points)
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for method, points in series.items():
            rs = [p[0] for p in points]
            if metric == "entropy":
                values = [p[1] for p in points]
            else:
                values = [max(p[1], _LOG_FLOOR) for p in points]
            ax.plot(rs, values, marker="o", label=method)
        if metric != "entropy":
            ax.set_yscale("log")
        ax.set_xlabel("reduced dimension r")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = stem.parent / f"{stem.name}_{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
