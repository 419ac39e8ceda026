"""Discrete measure spaces: pixel lattices, triangle meshes and weighted point sets.

A measure space is a finite, ordered set of points with a non-negative weight
per point. Point order is part of a space's identity; fields defined over the
same space share it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TriMesh",
    "MeasureSpace",
    "lattice_space",
    "mesh_space",
    "generic_space",
    "icosphere",
    "read_off",
    "write_off",
    "read_space_csv",
    "write_space_csv",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangle mesh embedded in R^3.

    Parameters
    ----------
    vertices : (n_vertices, 3) array
    faces : (n_faces, 3) integer array of vertex indices
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (n, 3)")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError("faces must have shape (m, 3)")
        if len(faces) == 0:
            raise ValueError("mesh has no faces")
        if not np.all(np.isfinite(vertices)):
            raise ValueError("vertex coordinates must be finite")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise ValueError("face references a vertex index out of range")
        a, b, c = faces.T
        repeated = (a == b) | (b == c) | (a == c)
        if np.any(repeated):
            bad = int(np.flatnonzero(repeated)[0])
            raise ValueError(f"face {bad} repeats a vertex index")
        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "faces", _frozen(faces))
        object.__setattr__(self, "face_areas", _frozen(triangle_areas(vertices, faces)))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def surface_area(self) -> float:
        return math.fsum(self.face_areas)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as a sorted (n_edges, 2) array."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def is_closed_manifold(self) -> bool:
        """True when every edge is shared by exactly two faces."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e.sort(axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)


def triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (vertices[faces[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)


@dataclass(frozen=True, eq=False)
class MeasureSpace:
    """Finite point set with a weight per point.

    ``kind`` is one of ``"lattice"``, ``"trimesh"`` or ``"generic"``. Lattice
    spaces carry ``shape = (h, w)`` and store points in row-major order
    (index ``i * w + j`` for row ``i``, column ``j``); mesh spaces carry the
    mesh they were built from, one point per face.
    """

    weights: np.ndarray
    kind: str = "generic"
    shape: tuple[int, int] | None = None
    mesh: TriMesh | None = None
    total_measure: float = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if w.size == 0:
            raise ValueError("a measure space needs at least one point")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if not np.any(w > 0):
            raise ValueError("at least one weight must be positive")
        if self.kind not in ("lattice", "trimesh", "generic"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind == "lattice":
            if self.shape is None or self.shape[0] * self.shape[1] != w.size:
                raise ValueError("lattice shape does not match the number of points")
            if not np.all(w == 1.0):
                raise ValueError("lattice weights must all equal 1")
        if self.kind == "trimesh":
            if self.mesh is None or self.mesh.n_faces != w.size:
                raise ValueError("mesh space needs one weight per face")
            if np.any(w <= 0):
                raise ValueError("mesh element areas must be strictly positive")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "total_measure", math.fsum(w))

    @property
    def n_points(self) -> int:
        return self.weights.size

    @property
    def width(self) -> int:
        return self.shape[1]

    @property
    def height(self) -> int:
        return self.shape[0]

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, MeasureSpace):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.shape == other.shape
            and self.weights.shape == other.weights.shape
            and bool(np.array_equal(self.weights, other.weights))
        )

    def __hash__(self):
        return hash((self.kind, self.shape, self.n_points))

    def __repr__(self):
        extra = f", shape={self.shape}" if self.shape else ""
        return f"MeasureSpace(kind={self.kind!r}, n_points={self.n_points}{extra}, total_measure={self.total_measure:g})"


def lattice_space(w: int, h: int) -> MeasureSpace:
    """Uniform ``w`` x ``h`` pixel lattice with unit weights."""
    if int(w) != w or int(h) != h or w < 1 or h < 1:
        raise ValueError(f"lattice dimensions must be positive integers, got ({w}, {h})")
    return MeasureSpace(np.ones(int(w) * int(h)), kind="lattice", shape=(int(h), int(w)))


def mesh_space(mesh: TriMesh) -> MeasureSpace:
    """One point per face, weighted by the face area."""
    areas = mesh.face_areas
    if np.any(areas <= 0):
        bad = int(np.flatnonzero(areas <= 0)[0])
        raise ValueError(f"face {bad} has zero area")
    return MeasureSpace(areas, kind="trimesh", mesh=mesh)


def generic_space(weights) -> MeasureSpace:
    return MeasureSpace(np.asarray(weights, dtype=np.float64), kind="generic")


_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_VERTICES = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=np.float64,
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def icosphere(radius: float = 1.0, level: int = 0) -> TriMesh:
    """Subdivided icosahedron projected onto a sphere of the given radius.

    Each level splits every triangle into four, so the face count is
    ``20 * 4**level``. Faces are oriented with outward normals.
    """
    if not radius > 0 or not math.isfinite(radius):
        raise ValueError("radius must be a positive finite number")
    if int(level) != level or not 0 <= level <= 7:
        raise ValueError("level must be an integer in [0, 7]")
    verts = _ICO_VERTICES / np.linalg.norm(_ICO_VERTICES, axis=1, keepdims=True)
    faces = _ICO_FACES
    for _ in range(int(level)):
        verts, faces = _subdivide(verts, faces)
    return TriMesh(verts * radius, faces)


def _subdivide(verts: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(verts)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    edges, inverse = np.unique(e, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    mid = verts[edges[:, 0]] + verts[edges[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    m = len(faces)
    ab, bc, ca = (n + inverse[i * m:(i + 1) * m] for i in range(3))
    a, b, c = faces.T
    new_faces = np.concatenate(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ]
    )
    return np.concatenate([verts, mid]), new_faces


def write_off(mesh: TriMesh, path) -> None:
    """Write an ASCII OFF file."""
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    lines += [" ".join(repr(float(x)) for x in v) for v in mesh.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def read_off(path) -> TriMesh:
    """Read an ASCII OFF file containing triangles only."""
    words = []
    for line in Path(path).read_text().splitlines():
        words += line.split("#", 1)[0].split()
    if not words or not words[0].startswith("OFF"):
        raise ValueError(f"{path}: missing OFF header")
    pos = 1
    if words[0] != "OFF":
        words[0:1] = ["OFF", words[0][3:]]
    try:
        n_v, n_f = int(words[pos]), int(words[pos + 1])
        pos += 3
        vertices = np.array(words[pos:pos + 3 * n_v], dtype=np.float64).reshape(n_v, 3)
        pos += 3 * n_v
        faces = np.empty((n_f, 3), dtype=np.int64)
        for i in range(n_f):
            if int(words[pos]) != 3:
                raise ValueError(f"{path}: only triangular faces are supported")
            faces[i] = [int(x) for x in words[pos + 1:pos + 4]]
            pos += 4
    except (IndexError, ValueError) as exc:
        if "triangular" in str(exc):
            raise
        raise ValueError(f"{path}: malformed OFF body") from exc
    return TriMesh(vertices, faces)


def write_space_csv(space: MeasureSpace, path) -> None:
    """One weight per line; lattices get a ``# kind,w,h`` header."""
    lines = []
    if space.kind == "lattice":
        lines.append("# kind,w,h")
        lines.append(f"# lattice,{space.width},{space.height}")
    else:
        lines.append(f"# {space.kind}")
    lines += [repr(float(x)) for x in space.weights]
    Path(path).write_text("\n".join(lines) + "\n")


def read_space_csv(path) -> MeasureSpace:
    comments, values = [], []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            values.append(float(line))
    for c in comments:
        parts = [p.strip() for p in c.split(",")]
        if parts[0] == "lattice" and len(parts) == 3:
            space = lattice_space(int(parts[1]), int(parts[2]))
            if space.n_points != len(values):
                raise ValueError(f"{path}: lattice header disagrees with weight count")
            return space
    return generic_space(values)
