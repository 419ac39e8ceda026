"""Classical multidimensional scaling of squared-distance matrices."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .field import PQ
from .metrics import DistanceMatrix

__all__ = [
    "Embedding",
    "EigensolverError",
    "double_center",
    "embed",
    "variance_captured",
    "write_spectrum_csv",
    "write_coords_csv",
    "write_embedding",
    "read_embedding",
]

EMB_MAGIC = b"DMSE"
EMB_VERSION = 1
_EMB_HEADER = struct.Struct("<4sIQIdd")


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Embedding:
    """Principal coordinates of a distance matrix.

    Attributes
    ----------
    coords : (n, k) array
        Column j is eigenvector j scaled by sqrt(eigenvalue j).
    eigenvalues : (n,) array
        Full spectrum of the centred matrix, sorted descending.
    negative_mass : float
        Sum of |negative eigenvalues| over sum of |eigenvalues|.
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    negative_mass: float
    pq: PQ = PQ()

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def k_retained(self) -> int:
        return self.coords.shape[1]


def double_center(d2) -> np.ndarray:
    """B = -1/2 C D2 C with C the centring matrix I - J/n."""
    if isinstance(d2, DistanceMatrix):
        d2 = d2.d2
    d2 = np.asarray(d2, dtype=np.float64)
    # C D C without forming C: subtract row means, column means, add grand mean
    row = d2.mean(axis=1, keepdims=True)
    col = d2.mean(axis=0, keepdims=True)
    b = -0.5 * (d2 - row - col + d2.mean())
    return 0.5 * (b + b.T)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def embed(dm: DistanceMatrix, eps_keep: float = 1e-9) -> Embedding:
    """Classical MDS.

    Eigenpairs with eigenvalue above ``eps_keep * max(lambda_1, 0)`` become
    coordinates; negative eigenvalues (non-Euclidean input) are dropped and
    summarised in ``negative_mass``. Each eigenvector is flipped so that its
    entry of largest magnitude is positive.
    """
    b = double_center(dm)
    try:
        vals, vecs = scipy.linalg.eigh(b)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(b) if np.all(np.isfinite(b)) else math.inf
        raise EigensolverError(f"eigendecomposition failed (condition number {cond:.3g})") from exc
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    top = max(float(vals[0]), 0.0)
    keep = vals > eps_keep * top if top > 0 else np.zeros(len(vals), dtype=bool)
    k = int(np.count_nonzero(keep))
    y = _fix_signs(vecs[:, :k])
    coords = y * np.sqrt(vals[:k])
    total = float(np.sum(np.abs(vals)))
    neg = float(np.sum(np.abs(vals[vals < 0]))) / total if total > 0 else 0.0
    coords.flags.writeable = False
    vals.flags.writeable = False
    return Embedding(coords, vals, neg, getattr(dm, "pq", PQ()))


def variance_captured(e: Embedding, k: int) -> float:
    """Fraction of the positive spectrum carried by the first k coordinates."""
    if int(k) != k or not 1 <= k <= e.k_retained:
        raise ValueError(f"k must be in [1, {e.k_retained}], got {k}")
    pos = e.eigenvalues[e.eigenvalues > 0]
    return float(np.sum(pos[: int(k)]) / np.sum(pos))


def write_spectrum_csv(e: Embedding, path) -> None:
    idx = np.arange(1, len(e.eigenvalues) + 1)
    np.savetxt(
        path,
        np.column_stack([idx, e.eigenvalues]),
        delimiter=",",
        fmt=["%d", "%.17g"],
        header="index,eigenvalue",
        comments="",
    )


def write_coords_csv(e: Embedding, path, k: int | None = None, timestamps=None) -> None:
    k = e.k_retained if k is None else min(k, e.k_retained)
    frames = np.arange(e.n) if timestamps is None else np.asarray(timestamps)
    cols = ["frame"] + [f"coord_{j + 1}" for j in range(k)]
    data = np.column_stack([frames, e.coords[:, :k]])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=",".join(cols), comments="")


def write_embedding(e: Embedding, path) -> None:
    """Binary format: magic, version, n, k, p, q, eigenvalues, coords row-major."""
    head = _EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, e.n, e.k_retained, e.pq.p, e.pq.q)
    body = np.ascontiguousarray(e.eigenvalues, dtype="<f8").tobytes()
    body += np.ascontiguousarray(e.coords, dtype="<f8").tobytes()
    Path(path).write_bytes(head + body)


def read_embedding(path) -> Embedding:
    raw = Path(path).read_bytes()
    magic, version, n, k, p, q = _EMB_HEADER.unpack_from(raw)
    if magic != EMB_MAGIC or version != EMB_VERSION:
        raise ValueError(f"{path}: not an embedding file")
    arr = np.frombuffer(raw, dtype="<f8", offset=_EMB_HEADER.size)
    if arr.size != n + n * k:
        raise ValueError(f"{path}: size does not match header")
    vals = arr[:n].copy()
    coords = arr[n:].reshape(n, k).copy()
    total = float(np.sum(np.abs(vals)))
    neg = float(np.sum(np.abs(vals[vals < 0]))) / total if total > 0 else 0.0
    return Embedding(coords, vals, neg, PQ(p, q))
