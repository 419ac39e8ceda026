"""Vector fields over discrete measure spaces: L^{p,q} distances, classical
MDS embeddings, low-rank reconstruction and Lyapunov estimates, with built-in
Ginzburg-Landau and Gray-Scott simulators."""

__version__ = "0.1.0"

from .field import PQ, VectorField, field_norm, inner, lattice_gradient  # noqa: E402
from .measure_space import MeasureSpace, TriMesh, generic_space, icosphere, lattice_space, mesh_space  # noqa: E402
from .series import FieldSeries  # noqa: E402
from .metrics import DistanceMatrix, distance, distance_matrix  # noqa: E402
from .mds import Embedding, embed, variance_captured  # noqa: E402
from .reconstruct import fit, reconstruct_frame, reconstruction_error  # noqa: E402
from .lyapunov import LyapunovConfig, max_lyapunov  # noqa: E402

__all__ = [
    "PQ",
    "VectorField",
    "field_norm",
    "inner",
    "lattice_gradient",
    "MeasureSpace",
    "TriMesh",
    "generic_space",
    "icosphere",
    "lattice_space",
    "mesh_space",
    "FieldSeries",
    "DistanceMatrix",
    "distance",
    "distance_matrix",
    "Embedding",
    "embed",
    "variance_captured",
    "fit",
    "reconstruct_frame",
    "reconstruction_error",
    "LyapunovConfig",
    "max_lyapunov",
]
