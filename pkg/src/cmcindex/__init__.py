"""Morse index of constant-mean-curvature hypersurfaces in the unit sphere."""

__version__ = "0.1.0"

from .closed_spectrum import IndexCount, closed_index, stability_modes  # noqa: E402
from .geometry import AnalyticFamily, curvature_invariants, frame, position  # noqa: E402
from .quadrature import QuadratureSpec  # noqa: E402

__all__ = [
    "AnalyticFamily",
    "IndexCount",
    "QuadratureSpec",
    "closed_index",
    "curvature_invariants",
    "frame",
    "position",
    "stability_modes",
]
