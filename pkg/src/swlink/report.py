"""Figure rendering for batch reports.

Every function takes computed results and writes one PNG; nothing here is
interactive.  Figures accompany the delimited tables the CLI emits, they
never replace them.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ensemble import LinkReport, MeasurementStats
from .errors import EmptyEnsembleError
from .modes import FarFieldPattern
from .optimize import OptimalExcitation

__all__ = [
    "pose_curve_figure",
    "pattern_cut_figure",
    "lambda_bar_figure",
    "measurement_box_figure",
]

_GAIN_FLOOR_DBI = -40.0


def pose_curve_figure(report: LinkReport, path: str) -> None:
    """Averaged |S21| versus pose, one line per receiver location."""
    if not report.cells:
        raise EmptyEnsembleError("report has no cells to plot")
    poses: list[str] = []
    rxs: list[str] = []
    for c in report.cells:
        if c.pose not in poses:
            poses.append(c.pose)
        if c.rx not in rxs:
            rxs.append(c.rx)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    x = np.arange(len(poses))
    for rx in rxs:
        y = [report.cell(pose, rx).magnitude_db for pose in poses]
        ax.plot(x, y, marker="o", label=rx)
    ax.axhline(report.threshold_db, color="k", linestyle="--", linewidth=0.8)
    ax.set_xticks(x)
    ax.set_xticklabels(poses)
    ax.set_xlabel("pose")
    ax.set_ylabel("|S21| (dB)")
    ax.legend(loc="best", fontsize="small")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def pattern_cut_figure(pattern: FarFieldPattern, path: str) -> None:
    """Polar gain cuts: the azimuth cut nearest the equator and phi = 0."""
    i_eq = int(np.argmin(np.abs(pattern.theta - np.pi / 2.0)))
    azimuth = np.maximum(pattern.gain_dbi[i_eq, :], _GAIN_FLOOR_DBI)
    elevation = np.maximum(pattern.gain_dbi[:, 0], _GAIN_FLOOR_DBI)
    fig, (ax1, ax2) = plt.subplots(
        1, 2, subplot_kw={"projection": "polar"}, figsize=(8.0, 4.0)
    )
    ax1.plot(pattern.phi, azimuth)
    ax1.set_title(f"azimuth cut, theta = {np.degrees(pattern.theta[i_eq]):.1f} deg")
    ax2.plot(pattern.theta, elevation)
    ax2.set_title("elevation cut, phi = 0")
    for ax in (ax1, ax2):
        ax.set_rmin(_GAIN_FLOOR_DBI)
    fig.suptitle("realized gain (dBi)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def lambda_bar_figure(optima: Sequence[OptimalExcitation], path: str) -> None:
    """Per-scenario maximized power transfer, in dB."""
    if not optima:
        raise EmptyEnsembleError("no optima to plot")
    values = 10.0 * np.log10([o.lambda_max for o in optima])
    labels = [o.scenario_tag or str(i) for i, o in enumerate(optima)]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.22 * len(values)), 4.0))
    ax.bar(np.arange(len(values)), values)
    ax.set_xticks(np.arange(len(values)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_ylabel("lambda_max (dB)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def measurement_box_figure(
    groups: Mapping[str, MeasurementStats], path: str
) -> None:
    """Boxplot of measurement series, whiskers at the 1.5*IQR fences."""
    if not groups:
        raise EmptyEnsembleError("no measurement groups to plot")
    stats = []
    for label, g in groups.items():
        stats.append(
            {
                "label": label,
                "mean": g.mean,
                "med": g.median,
                "q1": g.q1,
                "q3": g.q3,
                "whislo": g.whisker_low,
                "whishi": g.whisker_high,
                "fliers": list(g.outliers),
            }
        )
    fig, ax = plt.subplots(figsize=(max(4.0, 1.0 * len(stats)), 4.0))
    ax.bxp(stats, showmeans=True)
    ax.set_ylabel("RSSI (dB)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
