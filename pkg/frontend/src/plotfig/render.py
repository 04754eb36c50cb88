"""Rendering sweep tables as figures: one marker-and-line series per
strategy with +/- one standard error bars."""
from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .reader import read_sweep  # noqa: E402

MARKERS = "osd^v<>phX"


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    out_path: str
    x_name: str        # swept parameter the CSV must hold
    x_label: str
    y_label: str = "Ergodic sum rate [bits/s/Hz]"
    title: str = ""
    log_x: bool = False
    group_column: str = "strategy"


def figure_spec(kind: str, csv_path: str, out_path: str) -> FigureSpec:
    """The three standard figures keyed by sweep kind."""
    kinds = {
        "rho": ("rho1_db", "Feedback SNR of TX 1 [dB]",
                "Ergodic rate vs CSI quality at TX 1"),
        "power": ("power_dbw", "Per-TX power budget [dBW]",
                  "Ergodic rate vs transmit power"),
        "feedback": ("feedback_fraction", "Feedback power fraction P_fb/P_1",
                     "Ergodic rate vs feedback power split"),
    }
    if kind not in kinds:
        raise ValueError(f"unknown figure kind {kind!r}; "
                         f"choose from {sorted(kinds)}")
    x_name, x_label, title = kinds[kind]
    return FigureSpec(csv_path=csv_path, out_path=out_path,
                      x_name=x_name, x_label=x_label, title=title)


def render(spec: FigureSpec) -> str:
    """Draw the figure and write it to spec.out_path; returns the path."""
    table = read_sweep(spec.csv_path, spec.x_name)
    series = table.series()
    with plt.rc_context({"svg.hashsalt": "plotfig"}):
        fig, ax = plt.subplots(figsize=(7.0, 4.5))
        for i, (name, (xs, ys, es)) in enumerate(series.items()):
            order = sorted(range(len(xs)), key=xs.__getitem__)
            ax.errorbar([xs[j] for j in order], [ys[j] for j in order],
                        yerr=[es[j] for j in order],
                        marker=MARKERS[i % len(MARKERS)], markersize=4,
                        capsize=2, linewidth=1.2, label=name)
        if spec.log_x:
            ax.set_xscale("log")
        ax.set_xlabel(spec.x_label)
        ax.set_ylabel(spec.y_label)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, alpha=0.4)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(spec.out_path, metadata=_deterministic_metadata(
            spec.out_path))
        plt.close(fig)
    return spec.out_path


def _deterministic_metadata(out_path: str) -> dict:
    # strip the embedded timestamp so identical inputs give identical bytes
    if out_path.endswith(".svg"):
        return {"Date": None}
    if out_path.endswith(".png"):
        return {"Software": None}
    return {}
