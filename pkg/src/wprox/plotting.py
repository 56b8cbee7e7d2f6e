#!/usr/bin/env python3
"""
Static Plots
============

SVG figures for the experiment harness. Uses the non-interactive Agg backend;
nothing here opens a window.

Author: wprox developers
"""

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

if TYPE_CHECKING:
    from wprox.experiments import Example1Report

logger = logging.getLogger(__name__)

METRIC_LABELS = {
    "frechet-gaussian": "FGD (raw-space Fréchet Gaussian distance)",
    "w1-1d-sorted": "W1 (sorted coupling)",
    "w2-1d-sorted": "W2 (sorted coupling)",
    "sliced-w1-2d": "sliced W1",
}


def _unit(dx: np.ndarray, dy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norm = np.hypot(dx, dy)
    norm = np.where(norm > 0, norm, 1.0)
    return dx / norm, dy / norm


def plot_example1_field(report: "Example1Report", path: Union[str, Path]) -> Path:
    """Unit-length Euclidean and Wasserstein proximal update directions over the grid."""
    path = Path(path)
    grid = report.grid
    fig, ax = plt.subplots(figsize=(7, 6))
    f_grid = grid.pivot(index="b", columns="a", values="F")
    contour = ax.contourf(f_grid.columns, f_grid.index, f_grid.values, levels=20, cmap="Greys", alpha=0.5)
    fig.colorbar(contour, ax=ax, label="F = W1 to target")

    ex, ey = _unit(grid["euclid_dx"].to_numpy(), grid["euclid_dy"].to_numpy())
    wx, wy = _unit(grid["wass_dx"].to_numpy(), grid["wass_dy"].to_numpy())
    ax.quiver(grid["a"], grid["b"], ex, ey, color="tab:blue", angles="xy", scale=30, width=0.003,
              label=f"Euclidean proximal (mean angle {report.euclid_angle:.3f})")
    ax.quiver(grid["a"], grid["b"], wx, wy, color="tab:red", angles="xy", scale=30, width=0.003,
              label=f"Wasserstein proximal (mean angle {report.wass_angle:.3f})")
    ax.plot(*report.target, marker="*", color="black", markersize=14, linestyle="none", label="minimizer")
    ax.set_xlabel("a")
    ax.set_ylabel("b")
    ax.set_title(f"Proximal update directions, alpha = {report.alpha:g}, h = {report.h:g}")
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path


def plot_envelopes(envelope: pd.DataFrame, path: Union[str, Path], metric: str = "frechet-gaussian") -> Path:
    """
    Evaluation metric against wallclock, one colour per penalty: the bold line
    is the mean over seeds and the thin lines are the minimum and maximum.
    """
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 5))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i, (label, frame) in enumerate(envelope.groupby("penalty", sort=True)):
        frame = frame.sort_values("outer_iter")
        color = colors[i % len(colors)]
        x = frame["wallclock_s"].to_numpy()
        ax.plot(x, frame["mean"], color=color, linewidth=2.2, label=str(label))
        ax.plot(x, frame["min"], color=color, linewidth=0.8)
        ax.plot(x, frame["max"], color=color, linewidth=0.8)
    ax.set_xlabel("wallclock (s)")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    ax.set_yscale("log")
    ax.legend(title="penalty")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path
