"""Low-rank reconstruction of frames from their principal coordinates.

With centred frames F_s - mean and coordinates A from classical MDS, the
mode field of coordinate j is

    M_j = (1 / lambda_j) * sum_s A[s, j] * (F_s - mean)

and frame i at rank k is ``mean + sum_{j<=k} A[i, j] * M_j``. The mode
fields are accumulated once at fit time so that each reconstruction costs
O(k * m) for frames of m scalars.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import PQ, VectorField
from .metrics import distance
from .mds import Embedding
from .series import FieldSeries

__all__ = ["ReconstructionModel", "fit", "reconstruct_frame", "reconstruction_error"]


@dataclass(frozen=True, eq=False)
class ReconstructionModel:
    mean_field: VectorField
    coords: np.ndarray
    inv_lambda2: np.ndarray
    modes: np.ndarray  # (k_modes, n_points, rank), k_modes <= k_retained
    series: FieldSeries
    pq: PQ
    exact: bool  # True when the embedding came from L^{2,2} distances

    @property
    def k_retained(self) -> int:
        return self.coords.shape[1]

    def mode_field(self, j: int) -> VectorField:
        """Mode field of coordinate ``j`` (1-based)."""
        if not 1 <= j <= self.modes.shape[0]:
            raise ValueError(f"mode index must be in [1, {self.modes.shape[0]}]")
        return VectorField(self.series.space, self.modes[j - 1])


def _centred_products(series: FieldSeries, mean: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``weights.T @ (F - mean)`` accumulated over chunks of frames."""
    n = len(series)
    out = np.zeros((weights.shape[1],) + mean.shape)
    chunk = max(1, int(2**26 // max(mean.size, 1)))
    for lo in range(0, n, chunk):
        block = np.asarray(series.data[lo : lo + chunk]) - mean
        out += np.tensordot(weights[lo : lo + chunk].T, block, axes=1)
    return out


def fit(series: FieldSeries, e: Embedding, k_max: int | None = None) -> ReconstructionModel:
    """Precompute the centroid and the first ``k_max`` mode fields.

    ``k_max`` defaults to every retained coordinate. Reconstructions at
    higher rank fall back to evaluating the double sum over frames.
    """
    if len(series) != e.n:
        raise ValueError(f"series has {len(series)} frames but the embedding has {e.n}")
    mean = series.mean_field()
    a = np.asarray(e.coords)
    k = a.shape[1]
    inv = 1.0 / e.eigenvalues[:k] if k else np.zeros(0)
    kk = k if k_max is None else max(0, min(int(k_max), k))
    modes = _centred_products(series, mean.values, a[:, :kk] * inv[:kk])
    modes.flags.writeable = False
    return ReconstructionModel(mean, a, inv, modes, series, e.pq, e.pq.is_euclidean)


def _check_k(model: ReconstructionModel, k: int) -> None:
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if k > model.k_retained:
        raise ValueError(f"k={k} exceeds the {model.k_retained} retained coordinates")


def reconstruct_frame(model: ReconstructionModel, i: int, k: int) -> VectorField:
    """Approximation of frame ``i`` from its first ``k`` principal coordinates.

    ``k`` may be 0 only when the model retained no coordinates, in which
    case the centroid is returned.
    """
    if not 0 <= i < model.coords.shape[0]:
        raise IndexError(f"frame index {i} out of range")
    if model.k_retained == 0 and k == 0:
        return model.mean_field
    _check_k(model, k)
    if k <= model.modes.shape[0]:
        coef = model.coords[i, :k]
        values = model.mean_field.values + np.tensordot(coef, model.modes[:k], axes=1)
    else:
        a = model.coords[:, :k]
        frame_weights = (a @ (a[i] * model.inv_lambda2[:k]))[:, None]
        values = model.mean_field.values + _centred_products(model.series, model.mean_field.values, frame_weights)[0]
    return VectorField(model.series.space, values)


def reconstruction_error(
    model: ReconstructionModel, i: int, k: int, eps: float = 1e-300, rel_floor: float = 1e-6
) -> float:
    """Relative L^{2,2} error of the rank-k reconstruction of frame ``i``.

    The error is divided by the distance of the frame from the centroid,
    floored at ``rel_floor`` times the RMS distance of all frames from the
    centroid (and at ``eps``), so a frame sitting on the centroid reports
    zero instead of a ratio of rounding errors.
    """
    approx = reconstruct_frame(model, i, k)
    frame = model.series[i]
    num = distance(frame, approx, PQ(2, 2))
    spread = float(np.sqrt(np.mean(np.sum(np.asarray(model.coords) ** 2, axis=1)))) if model.k_retained else 0.0
    den = max(distance(frame, model.mean_field, PQ(2, 2)), rel_floor * spread, eps)
    return num / den
