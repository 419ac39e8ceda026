"""Pairwise L^{p,q} distances and trajectory distance matrices."""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .field import PQ, VectorField, aggregate_p, pointwise_qnorm, _check
from .series import FieldSeries

__all__ = [
    "DistanceMatrix",
    "distance",
    "distance_matrix",
    "write_distance_matrix",
    "read_distance_matrix",
    "write_distance_csv",
    "read_distance_csv",
]

DIST_MAGIC = b"DMSD"
DIST_VERSION = 1
_DIST_HEADER = struct.Struct("<4sIQdd")

# frames larger than this (in bytes) are never copied whole into the fast path
DEFAULT_MEMORY_BUDGET = 1 << 30


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric matrix of squared L^{p,q} distances between frames."""

    d2: np.ndarray
    pq: PQ

    def __post_init__(self):
        d2 = np.array(self.d2, dtype=np.float64)
        if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.all(np.isfinite(d2)) or np.any(d2 < 0):
            raise ValueError("squared distances must be finite and non-negative")
        if np.any(np.diag(d2) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        if not np.allclose(d2, d2.T, rtol=0, atol=1e-12 * max(1.0, float(d2.max(initial=0.0)))):
            raise ValueError("distance matrix must be symmetric")
        d2 = 0.5 * (d2 + d2.T)
        d2.flags.writeable = False
        object.__setattr__(self, "d2", d2)

    @property
    def n(self) -> int:
        return self.d2.shape[0]

    def distances(self) -> np.ndarray:
        return np.sqrt(self.d2)


def distance(x: VectorField, y: VectorField, pq: PQ = PQ()) -> float:
    """L^{p,q} distance, i.e. the norm of ``x - y``."""
    _check(x, y)
    diff = x.values - y.values
    return float(aggregate_p(pointwise_qnorm(diff, pq.q), x.space.weights, pq.p))


def _pdist_fast(mat: np.ndarray, rank: int, weights: np.ndarray, pq: PQ) -> np.ndarray | None:
    """Condensed squared distances via scipy when p == q, else None."""
    p, q = pq.p, pq.q
    if p != q:
        return None
    if math.isinf(p):
        cols = np.repeat(weights > 0, rank)
        return pdist(mat[:, cols], "chebyshev") ** 2
    w = np.repeat(weights, rank)
    if p == 2.0:
        return pdist(mat, "sqeuclidean", w=w)
    return pdist(mat, "minkowski", p=p, w=w) ** 2


def _row_block(data, weights, pq: PQ, rows: range, n: int) -> list[np.ndarray]:
    out = []
    for i in rows:
        fi = np.asarray(data[i])
        rest = np.asarray(data[i + 1 : n])
        pw = pointwise_qnorm(rest - fi, pq.q)
        out.append(aggregate_p(pw, weights, pq.p) ** 2)
    return out


def distance_matrix(
    series: FieldSeries,
    pq: PQ = PQ(),
    n_jobs: int = 1,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> DistanceMatrix:
    """Squared distances between all frames of a series.

    Only pairs ``i < j`` are computed; the lower triangle is the mirror
    image and the diagonal is zero. When p == q and the frames fit within
    ``memory_budget`` bytes the pairs go through ``scipy.spatial.distance.pdist``;
    otherwise frames are read row by row (memory-mapped series stay on disk)
    and rows are shared between ``n_jobs`` threads.
    """
    n = len(series)
    if n == 0:
        raise ValueError("cannot build a distance matrix from an empty series")
    weights = series.space.weights
    nbytes = series.data.shape[0] * series.data.shape[1] * series.data.shape[2] * 8
    cond = None
    if nbytes <= memory_budget:
        cond = _pdist_fast(series.matrix(), series.rank, weights, pq)
    if cond is not None:
        d2 = squareform(cond, checks=False)
    else:
        d2 = np.zeros((n, n))
        blocks = [range(k, n, max(n_jobs, 1)) for k in range(max(n_jobs, 1))]
        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                results = list(pool.map(lambda r: _row_block(series.data, weights, pq, r, n), blocks))
        else:
            results = [_row_block(series.data, weights, pq, blocks[0], n)]
        for rows, vals in zip(blocks, results):
            for i, v in zip(rows, vals):
                d2[i, i + 1 :] = v
                d2[i + 1 :, i] = v
    np.fill_diagonal(d2, 0.0)
    return DistanceMatrix(d2, pq)


def _pq_to_float(x: float) -> float:
    return math.inf if math.isinf(x) else float(x)


def write_distance_matrix(dm: DistanceMatrix, path) -> None:
    """Binary format: magic, version, n, p, q (inf as IEEE +inf), n^2 float64."""
    head = _DIST_HEADER.pack(DIST_MAGIC, DIST_VERSION, dm.n, _pq_to_float(dm.pq.p), _pq_to_float(dm.pq.q))
    Path(path).write_bytes(head + np.ascontiguousarray(dm.d2, dtype="<f8").tobytes())


def read_distance_matrix(path) -> DistanceMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _DIST_HEADER.size:
        raise ValueError(f"{path}: truncated distance matrix header")
    magic, version, n, p, q = _DIST_HEADER.unpack_from(raw)
    if magic != DIST_MAGIC:
        raise ValueError(f"{path}: not a distance matrix file")
    if version != DIST_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=_DIST_HEADER.size)
    if body.size != n * n:
        raise ValueError(f"{path}: size does not match header")
    return DistanceMatrix(body.reshape(n, n), PQ(p, q))


def write_distance_csv(dm: DistanceMatrix, path) -> None:
    header = f"n={dm.n} pq={dm.pq} squared distances"
    np.savetxt(path, dm.d2, delimiter=",", fmt="%.17g", header=header)


def read_distance_csv(path) -> DistanceMatrix:
    pq = PQ()
    with open(path) as fh:
        first = fh.readline()
    for tok in first.lstrip("#").split():
        if tok.startswith("pq="):
            pq = PQ.parse(tok[3:])
    d2 = np.loadtxt(path, delimiter=",", ndmin=2)
    return DistanceMatrix(d2, pq)
