"""Vector fields over discrete measure spaces and their L^{p,q} norms.

Norm reductions use numpy's pairwise summation over a fixed memory order,
so results are deterministic for a given input.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .measure_space import MeasureSpace

__all__ = [
    "PQ",
    "VectorField",
    "IncompatibleFieldsError",
    "vnorm_q",
    "pointwise_qnorm",
    "field_norm",
    "inner",
    "add",
    "sub",
    "scale",
    "lattice_gradient",
    "write_field",
    "read_field",
    "write_field_csv",
    "write_pgm",
    "write_ppm",
]

FIELD_MAGIC = b"DMSF"
FIELD_VERSION = 1
_FIELD_HEADER = struct.Struct("<4sIQI")


class IncompatibleFieldsError(ValueError):
    """Raised when two fields do not share a space and rank."""


def _parse_exponent(x) -> float:
    if isinstance(x, str):
        x = x.strip().lower()
        if x in ("inf", "infinity", "oo"):
            return math.inf
    x = float(x)
    if math.isnan(x) or x < 1:
        raise ValueError(f"exponent must be >= 1 or inf, got {x}")
    return x


@dataclass(frozen=True)
class PQ:
    """Exponent pair of an L^{p,q} norm; ``math.inf`` encodes infinity."""

    p: float = 2.0
    q: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "p", _parse_exponent(self.p))
        object.__setattr__(self, "q", _parse_exponent(self.q))

    @classmethod
    def parse(cls, text: str) -> "PQ":
        """Parse ``"2,2"`` or ``"inf,1"``."""
        p, q = text.split(",")
        return cls(p, q)

    @property
    def is_euclidean(self) -> bool:
        return self.p == 2.0 and self.q == 2.0

    def __str__(self):
        f = lambda x: "inf" if math.isinf(x) else f"{x:g}"
        return f"{f(self.p)},{f(self.q)}"


class VectorField:
    """Rank-d real vectors attached to every point of a measure space.

    ``values`` has shape ``(space.n_points, rank)``; row ``s`` holds the
    components of X(s). The array is stored read-only.
    """

    __slots__ = ("space", "values")

    def __init__(self, space: MeasureSpace, values):
        v = np.array(values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != space.n_points or v.shape[1] < 1:
            raise ValueError(
                f"values of shape {v.shape} do not fit a space of {space.n_points} points"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        self.space = space
        self.values = v

    @property
    def rank(self) -> int:
        return self.values.shape[1]

    def compatible(self, other: "VectorField") -> bool:
        return self.rank == other.rank and (self.space is other.space or self.space == other.space)

    def as_image(self) -> np.ndarray:
        """Reshape a lattice field to ``(h, w, rank)``."""
        if self.space.kind != "lattice":
            raise ValueError("only lattice fields can be viewed as images")
        h, w = self.space.shape
        return self.values.reshape(h, w, self.rank)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, c):
        return scale(self, c)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"VectorField(rank={self.rank}, space={self.space!r})"


def _check(x: VectorField, y: VectorField) -> None:
    if not x.compatible(y):
        raise IncompatibleFieldsError(
            f"fields differ in space or rank (rank {x.rank} vs {y.rank})"
        )


def _power_of_two_scale(a: np.ndarray) -> float:
    """Power of two near max|a| (1.0 for an all-zero array).

    Dividing by it is exact, and it keeps squares and p-th powers of the
    scaled values clear of overflow and underflow.
    """
    m = float(np.max(np.abs(a))) if a.size else 0.0
    if m == 0.0 or not math.isfinite(m):
        return 1.0
    return math.ldexp(1.0, math.frexp(m)[1] - 1)


def vnorm_q(v, q: float) -> float:
    """q-norm of a single vector."""
    v = np.asarray(v, dtype=np.float64).ravel()
    q = _parse_exponent(q)
    if math.isinf(q):
        return float(np.max(np.abs(v))) if v.size else 0.0
    c = _power_of_two_scale(v)
    return c * float(np.sum(np.abs(v / c) ** q) ** (1.0 / q))


def pointwise_qnorm(values: np.ndarray, q: float) -> np.ndarray:
    """q-norm along the last axis."""
    a = np.abs(values)
    if math.isinf(q):
        return a.max(axis=-1)
    if q == 1.0:
        return a.sum(axis=-1)
    if q == 2.0:
        return np.sqrt(np.einsum("...i,...i->...", a, a))
    if a.shape[-1] == 1:
        return a[..., 0]
    return np.sum(a**q, axis=-1) ** (1.0 / q)


def aggregate_p(pointwise: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    """Weighted p-aggregation over the last axis of per-point norms.

    Finite p is evaluated as ``m * (sum (n/m)^p mu)^(1/p)`` with ``m`` the
    largest per-point norm, which keeps large exponents from overflowing.
    """
    if math.isinf(p):
        mask = weights > 0
        sel = pointwise[..., mask]
        return sel.max(axis=-1) if sel.shape[-1] else np.zeros(pointwise.shape[:-1])
    if p == 1.0:
        return pointwise @ weights
    if p == 2.0:
        return np.sqrt((pointwise * pointwise) @ weights)
    m = pointwise.max(axis=-1, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    s = ((pointwise / safe) ** p) @ weights
    return np.where(m[..., 0] > 0, safe[..., 0] * s ** (1.0 / p), 0.0)


def field_norm(x: VectorField, pq: PQ = PQ()) -> float:
    """L^{p,q} norm of a field."""
    c = _power_of_two_scale(x.values)
    return c * float(aggregate_p(pointwise_qnorm(x.values / c, pq.q), x.space.weights, pq.p))


def inner(x: VectorField, y: VectorField) -> float:
    """Measure-weighted sum of pointwise inner products."""
    _check(x, y)
    return float(np.einsum("si,si->s", x.values, y.values) @ x.space.weights)


def add(x: VectorField, y: VectorField) -> VectorField:
    _check(x, y)
    return VectorField(x.space, x.values + y.values)


def sub(x: VectorField, y: VectorField) -> VectorField:
    _check(x, y)
    return VectorField(x.space, x.values - y.values)


def scale(x: VectorField, c: float) -> VectorField:
    return VectorField(x.space, float(c) * x.values)


def lattice_gradient(x: VectorField, boundary: str = "periodic") -> VectorField:
    """Forward-difference image gradient.

    For each channel the output holds the pair (row difference, column
    difference), so a rank-r field yields rank 2r; for an RGB image the six
    components are the 3x2 Jacobian flattened row-major. ``boundary`` is
    ``"periodic"`` (wrap around) or ``"clamp"`` (zero difference past the edge).
    """
    if x.space.kind != "lattice":
        raise ValueError("lattice_gradient needs a field over a lattice space")
    img = x.as_image()
    if boundary == "periodic":
        di = np.roll(img, -1, axis=0) - img
        dj = np.roll(img, -1, axis=1) - img
    elif boundary == "clamp":
        di = np.zeros_like(img)
        dj = np.zeros_like(img)
        di[:-1] = img[1:] - img[:-1]
        dj[:, :-1] = img[:, 1:] - img[:, :-1]
    else:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    grad = np.stack([di, dj], axis=-1)  # (h, w, r, 2)
    return VectorField(x.space, grad.reshape(x.space.n_points, 2 * x.rank))


# -- file formats -----------------------------------------------------------


def encode_field(values: np.ndarray) -> bytes:
    values = np.ascontiguousarray(values, dtype="<f8")
    n, r = values.shape
    return _FIELD_HEADER.pack(FIELD_MAGIC, FIELD_VERSION, n, r) + values.tobytes()


def write_field(x: VectorField, path) -> None:
    """Binary field file: magic, version, n_points, rank, float64 row-major."""
    Path(path).write_bytes(encode_field(x.values))


def read_field_values(path, mmap: bool = False) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_FIELD_HEADER.size)
    if len(head) < _FIELD_HEADER.size:
        raise ValueError(f"{path}: truncated field header")
    magic, version, n, r = _FIELD_HEADER.unpack(head)
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field file")
    if version != FIELD_VERSION:
        raise ValueError(f"{path}: unsupported field version {version}")
    expected = _FIELD_HEADER.size + 8 * n * r
    if path.stat().st_size != expected:
        raise ValueError(f"{path}: size does not match header ({n} x {r})")
    if mmap:
        return np.memmap(path, dtype="<f8", mode="r", offset=_FIELD_HEADER.size, shape=(n, r))
    return np.fromfile(path, dtype="<f8", offset=_FIELD_HEADER.size).reshape(n, r)


def read_field(path, space: MeasureSpace) -> VectorField:
    return VectorField(space, read_field_values(path))


def write_field_csv(x: VectorField, path) -> None:
    np.savetxt(path, x.values, delimiter=",", fmt="%.17g")


def _to_bytes(img: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi > lo:
        scaled = (img - lo) * (255.0 / (hi - lo))
    else:
        scaled = np.zeros_like(img)
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def write_pgm(x: VectorField, path, value_range: tuple[float, float] | None = None) -> tuple[float, float]:
    """Write a rank-1 lattice field as binary PGM.

    Values are mapped affinely from ``value_range`` (default: the field's
    min/max) to 0..255; the range used is written to ``<path>.range``.
    """
    if x.rank != 1:
        raise ValueError("PGM export needs a rank-1 field")
    img = x.as_image()[:, :, 0]
    lo, hi = value_range if value_range is not None else (float(img.min()), float(img.max()))
    data = _to_bytes(img, lo, hi)
    h, w = data.shape
    path = Path(path)
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + data.tobytes())
    Path(str(path) + ".range").write_text(f"min {lo!r}\nmax {hi!r}\n")
    return lo, hi


def write_ppm(x: VectorField, path, value_range: tuple[float, float] | None = None) -> tuple[float, float]:
    """Write a rank-3 lattice field as binary PPM (same mapping as PGM)."""
    if x.rank != 3:
        raise ValueError("PPM export needs a rank-3 field")
    img = x.as_image()
    lo, hi = value_range if value_range is not None else (float(img.min()), float(img.max()))
    data = _to_bytes(img, lo, hi)
    h, w, _ = data.shape
    path = Path(path)
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode() + data.tobytes())
    Path(str(path) + ".range").write_text(f"min {lo!r}\nmax {hi!r}\n")
    return lo, hi
