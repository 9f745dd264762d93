"""SVG figure rendering for bench reports and influence curves.

Uses matplotlib's SVG backend with the creation date suppressed so
identical inputs produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
# Fixed hash salt: element ids in the SVG otherwise derive from object ids,
# which differ between runs on identical input.
matplotlib.rcParams["svg.hashsalt"] = "mtmusic"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench import BenchReport  # noqa: E402
from .influence import IfCurve  # noqa: E402

METRICS = ("rmse", "order_error")


class EmptyReportError(ValueError):
    """Nothing to plot."""


def _save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_plot(report: BenchReport, metric: str, path) -> None:
    """Line chart of one report metric, one series per estimator.

    The x axis is GSNR when the report sweeps it, otherwise the snapshot
    count. RMSE plots use a log y scale.

    Raises:
        EmptyReportError: report has no rows.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")
    if not report.rows:
        raise EmptyReportError("report has no rows")
    gsnrs = sorted({row.gsnr_db for row in report.rows})
    against_gsnr = len(gsnrs) > 1
    estimators = list(dict.fromkeys(row.estimator for row in report.rows))

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    plotted = []
    for est in estimators:
        points = sorted(
            (
                (row.gsnr_db if against_gsnr else row.n_snapshots, row)
                for row in report.rows
                if row.estimator == est
            ),
            key=lambda item: item[0],
        )
        xs = [x for x, _ in points]
        ys = [
            row.avg_rmse_deg if metric == "rmse" else row.order_error_rate
            for _, row in points
        ]
        plotted.extend(ys)
        ax.plot(xs, ys, marker="o", label=est)
    if metric == "rmse":
        # A grid-exact estimate yields RMSE 0, which a log axis cannot show.
        if all(v > 0 for v in plotted if np.isfinite(v)):
            ax.set_yscale("log")
        ax.set_ylabel("average RMSE (deg)")
    else:
        ax.set_ylabel("order error rate")
        ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("GSNR (dB)" if against_gsnr else "snapshots N")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, path)


def render_influence_plot(curve: IfCurve, path) -> None:
    """Influence Frobenius norm vs contamination norm, log y scale."""
    if not curve.if_fro:
        raise EmptyReportError("influence curve has no series")
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, values in curve.if_fro.items():
        ax.plot(curve.norms, values, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("contamination norm ||y||")
    ax.set_ylabel("influence Frobenius norm")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, path)
