"""Reading and writing whole series: PGM/PPM image stacks and field directories.

A field directory holds

    space.csv        point weights (see ``write_space_csv``)
    mesh.off         only for triangle-mesh spaces
    timestamps.csv   one time per frame
    frame_00000.dmsf ...  one binary field file per frame
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .field import VectorField, read_field_values, write_field
from .measure_space import MeasureSpace, lattice_space, mesh_space, read_off, read_space_csv, write_off, write_space_csv
from .series import FieldSeries

__all__ = ["read_pnm", "image_field", "load_image_series", "load_field_series", "write_series", "IMAGE_SUFFIXES"]

IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")


def _tokens(raw: bytes, count: int, pos: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated integers, skipping # comments."""
    out = []
    n = len(raw)
    while len(out) < count:
        while pos < n and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos : pos + 1] == b"#":
            while pos < n and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("unexpected end of header")
        out.append(int(raw[start:pos]))
    return out, pos


def read_pnm(path) -> np.ndarray:
    """Pixel values of a PGM (h, w) or PPM (h, w, 3) file as float64.

    Binary (P5/P6) and plain (P2/P3) variants are accepted, with 8- or
    16-bit samples. Values are returned unscaled.
    """
    path = Path(path)
    raw = path.read_bytes()
    magic = raw[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ValueError(f"{path}: not a PGM/PPM file")
    channels = 3 if magic in (b"P3", b"P6") else 1
    try:
        (w, h, maxval), pos = _tokens(raw, 3, 2)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise ValueError(f"{path}: bad image header")
    count = w * h * channels
    if magic in (b"P5", b"P6"):
        pos += 1  # single whitespace byte before the raster
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        body = raw[pos : pos + count * dtype.itemsize]
        if len(body) < count * dtype.itemsize:
            raise ValueError(f"{path}: truncated raster")
        data = np.frombuffer(body, dtype=dtype).astype(np.float64)
    else:
        try:
            values, _ = _tokens(raw, count, pos)
        except ValueError:
            raise ValueError(f"{path}: truncated raster") from None
        data = np.array(values, dtype=np.float64)
    if np.any(data > maxval):
        raise ValueError(f"{path}: sample exceeds maxval {maxval}")
    shape = (h, w) if channels == 1 else (h, w, 3)
    return data.reshape(shape)


def load_image_series(directory, lattice: tuple[int, int] | None = None, stride: float = 1.0) -> FieldSeries:
    """Stack every PGM/PPM in ``directory`` (lexicographic order) into a series.

    PGM frames become rank-1 fields and PPM frames rank-3 fields on a
    ``lattice = (w, h)`` grid; when ``lattice`` is omitted the first image
    fixes it. Frame i is stamped ``i * stride``.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"{directory}: not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    if not files:
        raise ValueError(f"{directory}: no PGM/PPM images found")
    frames = []
    expected = None
    for f in files:
        img = read_pnm(f)
        h, w = img.shape[:2]
        rank = 1 if img.ndim == 2 else 3
        if expected is None:
            if lattice is not None and tuple(lattice) != (w, h):
                raise ValueError(f"{f.name}: image is {w}x{h}, declared lattice is {lattice[0]}x{lattice[1]}")
            expected = (w, h, rank)
        elif (w, h, rank) != expected:
            raise ValueError(
                f"{f.name}: {w}x{h} rank {rank} does not match {expected[0]}x{expected[1]} rank {expected[2]}"
            )
        frames.append(img.reshape(h * w, rank))
    w, h, _ = expected
    return FieldSeries(lattice_space(w, h), np.stack(frames), stride * np.arange(len(frames), dtype=np.float64))


def write_series(series: FieldSeries, directory) -> list[Path]:
    """Write a field directory; returns the paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = [directory / "space.csv", directory / "timestamps.csv"]
    write_space_csv(series.space, written[0])
    np.savetxt(written[1], series.timestamps, fmt="%.17g")
    if series.space.mesh is not None:
        write_off(series.space.mesh, directory / "mesh.off")
        written.append(directory / "mesh.off")
    for i, frame in enumerate(series):
        p = directory / f"frame_{i:05d}.dmsf"
        write_field(frame, p)
        written.append(p)
    return written


def _load_space(directory: Path) -> MeasureSpace:
    mesh_file = directory / "mesh.off"
    if mesh_file.exists():
        return mesh_space(read_off(mesh_file))
    space_file = directory / "space.csv"
    if not space_file.exists():
        raise ValueError(f"{directory}: missing space.csv")
    return read_space_csv(space_file)


def load_field_series(directory) -> FieldSeries:
    """Read a field directory written by ``write_series``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"{directory}: not a directory")
    files = sorted(directory.glob("*.dmsf"))
    if not files:
        raise ValueError(f"{directory}: no field files found")
    space = _load_space(directory)
    frames = []
    shape = None
    for f in files:
        values = read_field_values(f)
        if values.shape[0] != space.n_points:
            raise ValueError(f"{f.name}: {values.shape[0]} points, space has {space.n_points}")
        if shape is None:
            shape = values.shape
        elif values.shape != shape:
            raise ValueError(f"{f.name}: rank {values.shape[1]} does not match rank {shape[1]}")
        frames.append(values)
    ts_file = directory / "timestamps.csv"
    if ts_file.exists():
        t = np.atleast_1d(np.loadtxt(ts_file, dtype=np.float64))
        if t.size != len(files):
            raise ValueError(f"{ts_file.name}: {t.size} timestamps for {len(files)} frames")
    else:
        t = np.arange(len(files), dtype=np.float64)
    return FieldSeries(space, np.stack(frames), t)


def image_field(img: np.ndarray) -> VectorField:
    """Lattice field holding the pixels of one (h, w) or (h, w, 3) image."""
    h, w = img.shape[:2]
    rank = 1 if img.ndim == 2 else img.shape[2]
    return VectorField(lattice_space(w, h), np.asarray(img, dtype=np.float64).reshape(h * w, rank))
