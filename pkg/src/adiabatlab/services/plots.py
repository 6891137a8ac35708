"""
SVG figures for run outputs.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

# no dates or tool versions in the SVG, so reruns are byte-identical
SVG_METADATA = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = "adiabatlab"
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    logger.info(f"Saved figure {path}")
    return path


def loglog_plot(path: Path, series: Dict[str, tuple], xlabel: str, ylabel: str, title: Optional[str] = None) -> Path:
    """One line per series; each series is (x values, y values)."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, (xs, ys) in sorted(series.items()):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = (xs > 0) & (ys > 0)
        ax.loglog(xs[keep], ys[keep], marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def light_cone_plot(path: Path, times: Sequence[float], distances: Sequence[int], values: np.ndarray, velocity: Optional[float] = None) -> Path:
    """Heat map of log10 ‖[𝔘_t(A), B]‖ over (distance, time)."""
    fig, ax = plt.subplots(figsize=(5, 4))
    data = np.log10(np.maximum(np.asarray(values, dtype=float), 1e-16))
    mesh = ax.pcolormesh(np.asarray(distances), np.asarray(times), data, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="log10 commutator norm")
    if velocity:
        ax.plot(np.asarray(distances), np.asarray(distances) / velocity, color="white", linestyle="--")
    ax.set_xlabel("distance")
    ax.set_ylabel("microscopic time")
    return _save(fig, path)


def weight_plot(path: Path, time_rows, freq_rows) -> Path:
    """W(s) and Im Ŵ(ω) side by side."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.5))
    left.plot([r["s"] for r in time_rows], [r["W"] for r in time_rows])
    left.set_xlabel("s")
    left.set_ylabel("W(s)")
    right.plot([r["omega"] for r in freq_rows], [r["im_what"] for r in freq_rows])
    right.set_xlabel("ω")
    right.set_ylabel("Im Ŵ(ω)")
    return _save(fig, path)
