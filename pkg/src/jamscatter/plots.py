"""Figure rendering for harness output.

Sweep runs become metric-vs-parameter panels (throughput and packet
loss, seed-averaged tail values). Runs without a sweep become
windowed-throughput convergence curves, one panel per capacity
variant. The PNG lands next to the CSV so a report directory stays
self-contained.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import MetricsRow, group_rows, tail_packet_loss, tail_throughput

__all__ = ["render_report", "figure_path_for"]

_STYLE = {
    "tabular": dict(color="tab:gray", marker="s"),
    "deep_q": dict(color="tab:orange", marker="^"),
    "dueling": dict(color="tab:blue", marker="o"),
    "htt": dict(color="tab:green", marker="v"),
    "wtj": dict(color="tab:red", marker="d"),
    "fixed_ra": dict(color="tab:purple", marker="x"),
}


def figure_path_for(csv_path: str) -> str:
    if csv_path.endswith(".csv"):
        return csv_path[:-4] + ".png"
    return csv_path + ".png"


def _agent_order(rows: list[MetricsRow]) -> list[str]:
    seen = []
    for r in rows:
        if r.agent not in seen:
            seen.append(r.agent)
    return seen


def _windowed_curve(cell_rows: list[MetricsRow]) -> tuple[np.ndarray, np.ndarray]:
    iters = np.array([r.iteration for r in cell_rows], dtype=float)
    cum = np.array([r.throughput for r in cell_rows], dtype=float)
    totals = cum * iters
    wins = np.diff(totals, prepend=0.0) / np.diff(iters, prepend=0.0)
    return iters, wins


def _sweep_panels(rows: list[MetricsRow], title: str | None):
    groups = group_rows(rows)
    values = sorted({r.sweep_value for r in rows})
    param = rows[0].sweep_param
    fig, (ax_t, ax_l) = plt.subplots(1, 2, figsize=(9.6, 3.8))
    for agent in _agent_order(rows):
        thr, loss = [], []
        for v in values:
            cells = [g for (a, sv, _), g in groups.items() if a == agent and sv == v]
            thr.append(np.mean([tail_throughput(c) for c in cells]))
            loss.append(np.mean([tail_packet_loss(c) for c in cells]))
        style = _STYLE.get(agent, {})
        ax_t.plot(values, thr, label=agent, **style)
        ax_l.plot(values, loss, label=agent, **style)
    ax_t.set_xlabel(param)
    ax_t.set_ylabel("throughput (packets/slot)")
    ax_l.set_xlabel(param)
    ax_l.set_ylabel("packet loss (packets/slot)")
    ax_t.legend(fontsize=8)
    ax_t.grid(alpha=0.3)
    ax_l.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    return fig


def _convergence_panels(rows: list[MetricsRow], title: str | None):
    groups = group_rows(rows)
    variants = sorted({r.sweep_value for r in rows}, key=lambda v: (v is not None, v))
    labeled = rows[0].sweep_param
    fig, axes = plt.subplots(1, len(variants), figsize=(4.8 * len(variants), 3.8), squeeze=False)
    marks = [r.iteration for r in rows]
    wide_span = max(marks) > 50 * min(marks)
    for ax, variant in zip(axes[0], variants):
        for agent in _agent_order(rows):
            cells = [g for (a, sv, _), g in groups.items() if a == agent and sv == variant]
            if not cells:
                continue
            curves = [_windowed_curve(c) for c in cells]
            iters = curves[0][0]
            mean = np.mean([w for _, w in curves], axis=0)
            ax.plot(iters, mean, label=agent, color=_STYLE.get(agent, {}).get("color"))
        ax.set_xlabel("slot")
        ax.set_ylabel("windowed throughput")
        if wide_span:
            ax.set_xscale("log")
        if variant is not None:
            ax.set_title(f"{labeled}={variant:g}")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    return fig


def render_report(rows: list[MetricsRow], png_path: str, title: str | None = None) -> str:
    """Render the figure matching the shape of `rows`; returns png_path."""
    if not rows:
        raise ValueError("no rows to plot")
    if rows[0].sweep_param and rows[0].sweep_param != "env.D=E":
        fig = _sweep_panels(rows, title)
    else:
        fig = _convergence_panels(rows, title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=130)
    plt.close(fig)
    return png_path
