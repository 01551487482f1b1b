"""Render emitted figure data to a PNG with matplotlib.

The experiment module writes per-repetition CSVs (x, truth, estimate) plus
a gnuplot script; this module provides the equivalent matplotlib rendering
so no external plotting binary is needed.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np


def read_figure_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columns (x, truth, estimate) of one emitted figure CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError(f"{path}: expected three columns x,truth,estimate")
    return data[:, 0], data[:, 1], data[:, 2]


def render_figures(
    csv_paths: Sequence[str | Path],
    out_path: str | Path,
    title: str | None = None,
) -> Path:
    """Overlay the true drift (red, solid) and estimates (black, dashed)."""
    if not csv_paths:
        raise ValueError("no figure CSVs given")
    fig, ax = plt.subplots(figsize=(7.5, 5.3))
    for i, csv_path in enumerate(csv_paths):
        x, truth, estimate = read_figure_csv(csv_path)
        if i == 0:
            ax.plot(x, truth, color="red", lw=2.0, label="true drift")
        ax.plot(
            x,
            estimate,
            color="black",
            ls="--",
            lw=1.0,
            label="monotone estimates" if i == 0 else None,
        )
    ax.set_xlabel("x")
    ax.set_ylabel("drift")
    if title:
        ax.set_title(title)
    ax.legend()
    out = Path(out_path)
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out
