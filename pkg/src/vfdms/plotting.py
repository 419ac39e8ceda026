"""PNG figures for pipeline reports.

Everything renders through the Agg backend with the PNG software tag
removed, so identical inputs give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_distance_matrix",
    "plot_spectrum",
    "plot_coordinates",
    "plot_embedding_3d",
    "plot_divergence",
    "plot_reconstruction_errors",
]

_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 100,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_distance_matrix(d2: np.ndarray, path, title: str = "pairwise distance") -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4))
        im = ax.imshow(np.sqrt(np.maximum(d2, 0.0)), origin="upper", cmap="viridis", interpolation="nearest")
        ax.set_xlabel("frame")
        ax.set_ylabel("frame")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.85)
        fig.tight_layout()
        return _save(fig, path)


def plot_spectrum(eigenvalues: np.ndarray, path, n_show: int = 20) -> Path:
    """Leading eigenvalues, normalised by the largest; negative ones in grey."""
    vals = np.asarray(eigenvalues)[:n_show]
    top = vals[0] if len(vals) and vals[0] > 0 else 1.0
    idx = np.arange(1, len(vals) + 1)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        colors = np.where(vals >= 0, "C0", "0.6")
        ax.bar(idx, vals / top, color=colors)
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xlabel("index")
        ax.set_ylabel("eigenvalue / largest")
        fig.tight_layout()
        return _save(fig, path)


def plot_coordinates(times: np.ndarray, coords: np.ndarray, path, k: int = 3) -> Path:
    """First ``k`` principal coordinates against time."""
    k = min(k, coords.shape[1])
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(max(k, 1), 1, figsize=(5, 1.4 * max(k, 1) + 0.6), sharex=True, squeeze=False)
        for j in range(k):
            ax = axes[j, 0]
            ax.plot(times, coords[:, j], lw=0.8, color=f"C{j}")
            ax.set_ylabel(f"coord {j + 1}")
        if k == 0:
            axes[0, 0].text(0.5, 0.5, "no retained coordinates", ha="center", va="center", transform=axes[0, 0].transAxes)
        axes[-1, 0].set_xlabel("time")
        fig.tight_layout()
        return _save(fig, path)


def plot_embedding_3d(coords: np.ndarray, path) -> Path:
    """Trajectory through the first three coordinates (zero-padded)."""
    pts = np.zeros((coords.shape[0], 3))
    k = min(3, coords.shape[1])
    pts[:, :k] = coords[:, :k]
    with plt.rc_context(_STYLE):
        fig = plt.figure(figsize=(4.5, 4))
        ax = fig.add_subplot(projection="3d")
        ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], lw=0.6, color="0.5")
        ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], c=np.arange(len(pts)), cmap="plasma", s=6)
        ax.set_xlabel("coord 1")
        ax.set_ylabel("coord 2")
        ax.set_zlabel("coord 3")
        fig.tight_layout()
        return _save(fig, path)


def plot_divergence(steps: np.ndarray, curve: np.ndarray, fit_range: tuple[int, int], slope: float, path) -> Path:
    lo, hi = fit_range
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot(steps, curve, "o-", ms=3, lw=0.8)
        ks = steps[lo : hi + 1]
        intercept = np.mean(curve[lo : hi + 1]) - slope * np.mean(ks)
        ax.plot(ks, slope * ks + intercept, "r-", lw=1.5, label=f"slope {slope:.4g}")
        ax.set_xlabel("step")
        ax.set_ylabel("mean log separation")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_reconstruction_errors(errors: np.ndarray, path) -> Path:
    """Relative error per frame for each rank (rows of ``errors`` are ranks)."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        for r, row in enumerate(errors, start=1):
            ax.plot(row, lw=0.8, label=f"k={r}")
        ax.set_xlabel("frame")
        ax.set_ylabel("relative error")
        if len(errors) <= 8:
            ax.legend(frameon=False, ncol=2)
        fig.tight_layout()
        return _save(fig, path)
