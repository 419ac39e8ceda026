"""Time-ordered sequences of fields over one shared measure space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import VectorField, lattice_gradient
from .measure_space import MeasureSpace

__all__ = ["FieldSeries"]


@dataclass(frozen=True, eq=False)
class FieldSeries:
    """A trajectory F_1..F_n of fields.

    ``data`` has shape ``(n_frames, n_points, rank)`` and may be a read-only
    memory map for series too large to hold in RAM.
    """

    space: MeasureSpace
    data: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        data = self.data
        if not isinstance(data, np.memmap):
            data = np.asarray(data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[1] != self.space.n_points:
            raise ValueError(f"series data of shape {data.shape} does not fit the space")
        if data.shape[0] == 0:
            raise ValueError("a series needs at least one frame")
        t = np.asarray(self.timestamps, dtype=np.float64).ravel()
        if t.size != data.shape[0]:
            raise ValueError("one timestamp per frame is required")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not isinstance(data, np.memmap):
            data.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "timestamps", t)

    @classmethod
    def from_fields(cls, fields, timestamps=None) -> "FieldSeries":
        fields = list(fields)
        if not fields:
            raise ValueError("a series needs at least one frame")
        first = fields[0]
        for i, f in enumerate(fields[1:], 1):
            if not first.compatible(f):
                raise ValueError(f"frame {i} is incompatible with frame 0")
        if timestamps is None:
            timestamps = np.arange(len(fields), dtype=np.float64)
        return cls(first.space, np.stack([f.values for f in fields]), timestamps)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, i) -> VectorField:
        return VectorField(self.space, self.data[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def rank(self) -> int:
        return self.data.shape[2]

    @property
    def n_frames(self) -> int:
        return len(self)

    @property
    def stride(self) -> float | None:
        """Uniform time step between frames, or None if irregular."""
        if len(self) < 2:
            return None
        d = np.diff(self.timestamps)
        return float(d[0]) if np.allclose(d, d[0], rtol=1e-9, atol=0) else None

    def matrix(self) -> np.ndarray:
        """Frames flattened to an ``(n_frames, n_points * rank)`` array."""
        return np.asarray(self.data).reshape(len(self), -1)

    def mean_field(self) -> VectorField:
        return VectorField(self.space, np.mean(self.data, axis=0))

    def component(self, index: int) -> "FieldSeries":
        """Rank-1 series holding one component of every frame."""
        return FieldSeries(self.space, np.asarray(self.data[:, :, index : index + 1]), self.timestamps)

    def select(self, indices) -> "FieldSeries":
        idx = np.asarray(indices)
        return FieldSeries(self.space, np.asarray(self.data[idx]), self.timestamps[idx])

    def gradient(self, boundary: str = "periodic") -> "FieldSeries":
        """Apply the lattice gradient to every frame."""
        frames = [lattice_gradient(f, boundary).values for f in self]
        return FieldSeries(self.space, np.stack(frames), self.timestamps)

    def __repr__(self):
        return f"FieldSeries(n_frames={len(self)}, rank={self.rank}, space={self.space!r})"
